"""Failure-rate evaluation on held-out triplets, global and per agent.

The failure rate r is the fraction of test triplets whose negative
embeds strictly closer to the anchor than the positive does. Ties count
as non-failures (the comparison is strict) but are reported, so a
collapsed encoder that maps everything to one point shows r = 0 with a
tie count of 100% instead of passing silently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .encoder import EncoderConfig, EncoderParams, encode_batch
from .features import FeatureSet, featurize_windows, fit_normalization
from .orders import WindowSet
from .training import TrainConfig, train


def failure_counts(ea: np.ndarray, ep: np.ndarray,
                   en: np.ndarray) -> tuple[int, int, int]:
    """(failures, ties, total) over triplet embedding arrays."""
    ea, ep, en = np.asarray(ea), np.asarray(ep), np.asarray(en)
    if not ea.shape == ep.shape == en.shape or ea.ndim != 2:
        raise ValueError("embedding arrays must share one (n, d) shape")
    if len(ea) == 0:
        raise ValueError("no triplets to evaluate")
    d_ap = np.sum((ea - ep) ** 2, axis=1)
    d_an = np.sum((ea - en) ** 2, axis=1)
    return int(np.sum(d_an < d_ap)), int(np.sum(d_an == d_ap)), len(ea)


def failure_rate(ea: np.ndarray, ep: np.ndarray, en: np.ndarray) -> float:
    fails, _, n = failure_counts(ea, ep, en)
    return fails / n


def failure_rate_per_agent(ea, ep, en, anchor_agents) -> dict[int, dict]:
    """Per anchor-agent failure rates.

    Returns agent -> {n_anchors, failures, ties, rate}; the count-
    weighted average of the rates equals the global rate.
    """
    anchor_agents = np.asarray(anchor_agents)
    ea, ep, en = np.asarray(ea), np.asarray(ep), np.asarray(en)
    if len(anchor_agents) != len(ea):
        raise ValueError("one anchor agent per triplet required")
    d_ap = np.sum((ea - ep) ** 2, axis=1)
    d_an = np.sum((ea - en) ** 2, axis=1)
    fail = d_an < d_ap
    tie = d_an == d_ap
    out = {}
    for agent in np.unique(anchor_agents):
        mask = anchor_agents == agent
        n = int(mask.sum())
        f = int(fail[mask].sum())
        out[int(agent)] = {"n_anchors": n, "failures": f,
                           "ties": int(tie[mask].sum()), "rate": f / n}
    return out


@dataclass
class EvalReport:
    """Failure-rate table; one global row (agent = ALL) plus per-agent rows."""

    feature_set: str
    n_triplets: int
    failures: int
    ties: int
    per_agent: dict[int, dict]

    @property
    def rate(self) -> float:
        return self.failures / self.n_triplets

    def to_frame(self) -> pd.DataFrame:
        rows = [{"feature_set": self.feature_set, "agent": "ALL",
                 "n_anchors": self.n_triplets,
                 "failure_rate": self.rate, "ties": self.ties}]
        for agent in sorted(self.per_agent):
            d = self.per_agent[agent]
            rows.append({"feature_set": self.feature_set,
                         "agent": str(agent), "n_anchors": d["n_anchors"],
                         "failure_rate": d["rate"], "ties": d["ties"]})
        return pd.DataFrame(rows,
                            columns=["feature_set", "agent", "n_anchors",
                                     "failure_rate", "ties"])

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)


def evaluate_embeddings(ea, ep, en, anchor_agents,
                        feature_set: str = "") -> EvalReport:
    fails, ties, n = failure_counts(ea, ep, en)
    per_agent = failure_rate_per_agent(ea, ep, en, anchor_agents)
    return EvalReport(feature_set=feature_set, n_triplets=n, failures=fails,
                      ties=ties, per_agent=per_agent)


def evaluate(params: EncoderParams, features: np.ndarray,
             triplets: np.ndarray, anchor_agents,
             feature_set: str = "") -> EvalReport:
    """Embed the referenced windows once and score the triplets."""
    triplets = np.asarray(triplets, dtype=np.int64)
    emb = encode_batch(params, features)
    ea = emb[triplets[:, 0]]
    ep = emb[triplets[:, 1]]
    en = emb[triplets[:, 2]]
    return evaluate_embeddings(ea, ep, en, anchor_agents, feature_set)


def run_ablation(train_windows: WindowSet, test_windows: WindowSet,
                 train_triplets: np.ndarray, test_triplets: np.ndarray,
                 train_config: TrainConfig, hidden1: int = 100,
                 hidden2: int = 40, margin: float = 0.5,
                 log=None) -> pd.DataFrame:
    """Train one encoder per feature set on identical triplet indices.

    Everything except the featurization (Basic / BasicM / BasicMQS) is
    held fixed: same windows, same triplets, same seeds and training
    schedule. Returns the concatenated failure-rate table.
    """
    frames = []
    for variant in ("basic", "basic_m", "basic_m_qs"):
        fs = FeatureSet(variant)
        norm = fit_normalization(train_windows, fs)
        feat_train = featurize_windows(train_windows, fs, norm)
        feat_test = featurize_windows(test_windows, fs, norm)
        enc = EncoderConfig(input_width=fs.width, hidden1=hidden1,
                            hidden2=hidden2, margin=margin)
        if log is not None:
            log(f"training feature set {variant} (width {fs.width})")
        ckpt = train(feat_train, train_triplets, enc, train_config, norm,
                     log=log)
        report = evaluate(ckpt.params, feat_test, test_triplets,
                          test_windows.agent[test_triplets[:, 0]],
                          feature_set=variant)
        frames.append(report.to_frame())
        if log is not None:
            log(f"feature set {variant}: r = {report.rate:.4f}")
    return pd.concat(frames, ignore_index=True)
