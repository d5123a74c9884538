"""Behavioral indicators per 50-order window, with cluster and agent views.

Eleven indicators describe how a window of orders was traded: pace
(frequency), sizing (order/trade size, fill rate), book context (spread,
same/opposite queue sizes, absolute and relative to trade size),
direction persistence, and the limit-to-trade modification fraction.
The same-side queue of a buy order is the ask queue: a buy market order
consumes resting asks, so "its" queue sits on the ask side, and the
opposite queue is the bid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .orders import OrderLog, Sample, WindowSet
from .synth import PassiveFills

INDICATOR_NAMES = [
    "frequency", "order_size", "trade_size", "fill_rate", "spread",
    "qs", "opp_qs", "rqs", "opp_rqs", "direction", "modif_frac",
]


@dataclass
class IndicatorSet:
    frequency: float      # trades per minute, 60 / mean interevent gap
    order_size: float     # mean intended quantity
    trade_size: float     # mean filled quantity
    fill_rate: float      # total filled / total intended
    spread: float         # mean best ask - best bid, ticks
    qs: float             # mean same-side best queue
    opp_qs: float         # mean opposite-side best queue
    rqs: float            # mean same-side queue / trade size
    opp_rqs: float        # mean opposite queue / trade size
    direction: float      # |sum q*s| / sum q, 1 = one-sided
    modif_frac: float     # fraction of limit-to-trade modifications

    def validate(self) -> None:
        vals = [getattr(self, name) for name in INDICATOR_NAMES]
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("non-finite indicator")
        if not 0 < self.fill_rate <= 1:
            raise ValueError("fill_rate out of (0, 1]")
        if not 0 <= self.direction <= 1:
            raise ValueError("direction out of [0, 1]")
        if not 0 <= self.modif_frac <= 1:
            raise ValueError("modif_frac out of [0, 1]")

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, name) for name in INDICATOR_NAMES)


def indicators_for_windows(windows: WindowSet) -> pd.DataFrame:
    """All indicators for every window, vectorized; (n, 11) frame."""
    t = windows.column("t")
    span = t[:, -1] - t[:, 0]
    if np.any(span <= 0):
        bad = int(np.flatnonzero(span <= 0)[0])
        raise ValueError(f"window {bad}: t_50 equals t_1, frequency undefined")
    q = windows.column("q_filled").astype(np.float64)
    q_hat = windows.column("q_intended").astype(np.float64)
    side = windows.column("side").astype(np.float64)
    bid_q = windows.column("bid_qty").astype(np.float64)
    ask_q = windows.column("ask_qty").astype(np.float64)
    same_q = np.where(side > 0, ask_q, bid_q)
    opp_q = np.where(side > 0, bid_q, ask_q)
    spread = (windows.column("best_ask")
              - windows.column("best_bid")).astype(np.float64)

    n_steps = t.shape[1] - 1
    data = {
        "frequency": 60.0 / (span / n_steps),
        "order_size": q_hat.mean(axis=1),
        "trade_size": q.mean(axis=1),
        "fill_rate": q.sum(axis=1) / q_hat.sum(axis=1),
        "spread": spread.mean(axis=1),
        "qs": same_q.mean(axis=1),
        "opp_qs": opp_q.mean(axis=1),
        "rqs": (same_q / q).mean(axis=1),
        "opp_rqs": (opp_q / q).mean(axis=1),
        "direction": np.abs((q * side).sum(axis=1)) / q.sum(axis=1),
        "modif_frac": windows.column("modif").mean(axis=1),
    }
    frame = pd.DataFrame(data)
    frame.insert(0, "agent", windows.agent)
    frame.insert(0, "sample_id", np.arange(len(windows), dtype=np.int64))
    return frame


def indicators_for_sample(sample: Sample) -> IndicatorSet:
    """Indicators of a single window."""
    sample.validate()
    ws = WindowSet(sample.log, sample.rows[None, :],
                   np.array([sample.agent]), np.array([sample.day]))
    row = indicators_for_windows(ws).iloc[0]
    out = IndicatorSet(**{name: float(row[name])
                          for name in INDICATOR_NAMES})
    out.validate()
    return out


def _tercile_rating(medians: pd.Series) -> pd.Series:
    """Map cluster medians to +/++/+++ by global terciles (ties go low);
    an exactly zero median reads "none"."""
    lo = medians.quantile(1 / 3)
    hi = medians.quantile(2 / 3)
    def rate(m):
        if m == 0:
            return "none"
        if m <= lo:
            return "+"
        if m <= hi:
            return "++"
        return "+++"
    return medians.map(rate)


def cluster_summary(frame: pd.DataFrame, labels) -> pd.DataFrame:
    """Quartiles of every indicator per cluster, plus tercile ratings.

    ``frame`` is the output of indicators_for_windows; empty clusters
    simply have no rows. Quantiles use linear interpolation.
    """
    labels = np.asarray(labels)
    if len(labels) != len(frame):
        raise ValueError("one cluster label per sample required")
    work = frame.copy()
    work["cluster"] = labels
    rows = []
    for cluster, group in work.groupby("cluster", sort=True):
        for name in INDICATOR_NAMES:
            col = group[name]
            rows.append({
                "cluster": cluster, "indicator": name,
                "n_samples": len(group),
                "p25": col.quantile(0.25), "p50": col.quantile(0.50),
                "p75": col.quantile(0.75),
            })
    out = pd.DataFrame(rows)
    ratings = []
    for name in INDICATOR_NAMES:
        sub = out[out["indicator"] == name].set_index("cluster")
        ratings.append(_tercile_rating(sub["p50"]).rename("rating"))
    rating_map = pd.concat(ratings, keys=INDICATOR_NAMES,
                           names=["indicator", "cluster"])
    out["rating"] = [rating_map[(r.indicator, r.cluster)]
                     for r in out.itertuples()]
    return out


def agent_profile(agent: int, frame: pd.DataFrame, labels,
                  windows: WindowSet):
    """Per-cluster view of one agent: indicator quartiles, hour-of-day
    histograms of sample starts, and a (day, hour, cluster) table.

    Returns (quantiles frame, hour histogram frame, occurrence frame).
    """
    labels = np.asarray(labels)
    mask = frame["agent"].to_numpy() == agent
    if not mask.any():
        raise ValueError(f"agent {agent} has no samples")
    quant = cluster_summary(frame[mask], labels[mask])

    hours = (9 + windows.start_time[mask] // 3600).astype(np.int64)
    hist = (pd.DataFrame({"cluster": labels[mask], "hour": hours})
            .groupby(["cluster", "hour"]).size().rename("count")
            .reset_index())
    occurrences = pd.DataFrame({
        "day": windows.day[mask],
        "hour": hours,
        "cluster": labels[mask],
    }).sort_values(["day", "hour", "cluster"], kind="stable") \
        .reset_index(drop=True)
    return quant, hist, occurrences


def passive_aggressive_ratio(log: OrderLog, passive: PassiveFills,
                             agent: int) -> float:
    """Passive fills over aggressive orders for one agent."""
    n_aggressive = int(np.sum(log.agent == agent))
    if n_aggressive == 0:
        raise ValueError(f"agent {agent} has no aggressive trades")
    n_passive = int(np.sum(passive.agent == agent))
    return n_passive / n_aggressive


def write_indicator_csv(path, frame: pd.DataFrame, labels) -> None:
    """The main indicator table: sample_id, agent, cluster, 11 columns."""
    out = frame.copy()
    out.insert(2, "cluster", np.asarray(labels, dtype=np.int64))
    out.to_csv(path, index=False)
