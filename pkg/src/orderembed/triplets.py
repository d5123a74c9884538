"""Day-level train/test splitting and temporally-local triplet sampling.

A triplet is (anchor, positive, negative): the positive comes from the
anchor's agent without sharing any order with it, the negative from a
different agent, and both must start within the locality horizon of the
anchor (2 hours by default) on the same day.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .orders import WINDOW, WindowSet

DEFAULT_HORIZON_S = 7200.0


@dataclass
class DaySplit:
    train_days: set[int]
    test_days: set[int]

    def validate(self, all_days=None) -> None:
        if self.train_days & self.test_days:
            raise ValueError("train and test days overlap")
        if all_days is not None and \
                self.train_days | self.test_days != set(all_days):
            raise ValueError("split does not cover all days")

    def to_dict(self) -> dict:
        return {"train_days": sorted(self.train_days),
                "test_days": sorted(self.test_days)}

    @classmethod
    def from_dict(cls, d: dict) -> "DaySplit":
        return cls(train_days=set(int(x) for x in d["train_days"]),
                   test_days=set(int(x) for x in d["test_days"]))


def split_days(days, seed: int, ratio: tuple[int, int] = (4, 1)) -> DaySplit:
    """Randomly split day indices into train/test at the given ratio.

    Deterministic for a seed; the test share is rounded to the nearest
    day but never empty. Requires at least 5 days so both sides are
    non-trivial at the default 4:1.
    """
    days = sorted(set(int(d) for d in days))
    if len(days) < 5:
        raise ValueError("need at least 5 days to split")
    r_train, r_test = ratio
    if r_train <= 0 or r_test <= 0:
        raise ValueError("ratio parts must be positive")
    n_test = int(round(len(days) * r_test / (r_train + r_test)))
    n_test = min(max(n_test, 1), len(days) - 1)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(
        [seed, 0x5eed5])))
    perm = rng.permutation(len(days))
    test = {days[i] for i in perm[:n_test]}
    train = set(days) - test
    return DaySplit(train_days=train, test_days=test)


class _DayIndex:
    """Per-day candidate lookup tables over a window set."""

    def __init__(self, windows: WindowSet):
        self.start = windows.start_time
        self.agent = windows.agent
        self.day = windows.day
        self.group, self.pos = windows.group_positions()
        # windows of each day sorted by start time, and of each group
        # sorted by position (= time order within the agent-day)
        self.by_day = {}
        for d in np.unique(self.day):
            idx = np.flatnonzero(self.day == d)
            self.by_day[int(d)] = idx[np.argsort(self.start[idx],
                                                 kind="stable")]
        self.by_group = {}
        for g in np.unique(self.group):
            idx = np.flatnonzero(self.group == g)
            self.by_group[int(g)] = idx[np.argsort(self.pos[idx],
                                                   kind="stable")]

    def positives(self, i: int, horizon: float) -> np.ndarray:
        """Same agent-day windows within the horizon sharing no order."""
        members = self.by_group[int(self.group[i])]
        s = self.start[members]
        lo = np.searchsorted(s, self.start[i] - horizon, side="left")
        hi = np.searchsorted(s, self.start[i] + horizon, side="right")
        cand = members[lo:hi]
        return cand[np.abs(self.pos[cand] - self.pos[i]) >= WINDOW]

    def negatives(self, i: int, horizon: float) -> np.ndarray:
        """Other-agent windows of the same day within the horizon."""
        members = self.by_day[int(self.day[i])]
        s = self.start[members]
        lo = np.searchsorted(s, self.start[i] - horizon, side="left")
        hi = np.searchsorted(s, self.start[i] + horizon, side="right")
        cand = members[lo:hi]
        return cand[self.agent[cand] != self.agent[i]]


def sample_triplets(windows: WindowSet, count: int, seed: int,
                    horizon_s: float = DEFAULT_HORIZON_S) -> np.ndarray:
    """Draw ``count`` triplets of window indices, uniformly at random.

    Anchors are drawn uniformly (with replacement) over windows that
    admit at least one valid positive and negative; the positive and
    negative are then drawn uniformly over their candidate sets. Windows
    must all come from one side of a day split; this function does not
    check that. Returns an (count, 3) int array of window indices.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if horizon_s <= 0:
        raise ValueError("horizon must be positive")
    index = _DayIndex(windows)
    eligible = np.flatnonzero([
        len(index.positives(i, horizon_s)) > 0
        and len(index.negatives(i, horizon_s)) > 0
        for i in range(len(windows))])
    if len(eligible) == 0:
        raise ValueError("no window admits both a positive and a negative "
                         "within the horizon")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(
        [seed, 0x7519])))
    anchors = eligible[rng.integers(0, len(eligible), size=count)]
    out = np.empty((count, 3), dtype=np.int64)
    for k, a in enumerate(anchors):
        pos = index.positives(int(a), horizon_s)
        neg = index.negatives(int(a), horizon_s)
        out[k, 0] = a
        out[k, 1] = pos[rng.integers(0, len(pos))]
        out[k, 2] = neg[rng.integers(0, len(neg))]
    return out


def validate_triplets(windows: WindowSet, triplets: np.ndarray,
                      horizon_s: float = DEFAULT_HORIZON_S) -> None:
    """Independently re-check every triplet invariant; raises on the
    first violation. Overlap is tested on the actual order rows, not on
    the sampler's positional shortcut.
    """
    triplets = np.asarray(triplets)
    if triplets.ndim != 2 or triplets.shape[1] != 3:
        raise ValueError("triplets must be (n, 3) window indices")
    start = windows.start_time
    for k, (a, p, n) in enumerate(triplets):
        if windows.agent[a] != windows.agent[p]:
            raise ValueError(f"triplet {k}: positive from a different agent")
        if windows.agent[a] == windows.agent[n]:
            raise ValueError(f"triplet {k}: negative from the anchor's agent")
        if not (windows.day[a] == windows.day[p] == windows.day[n]):
            raise ValueError(f"triplet {k}: not all on one day")
        if abs(start[p] - start[a]) > horizon_s or \
                abs(start[n] - start[a]) > horizon_s:
            raise ValueError(f"triplet {k}: start times beyond the horizon")
        if np.intersect1d(windows.rows[a], windows.rows[p]).size:
            raise ValueError(f"triplet {k}: anchor and positive share orders")


def save_triplets(path, triplets: np.ndarray) -> None:
    pd.DataFrame(np.asarray(triplets, dtype=np.int64),
                 columns=["anchor", "positive", "negative"]) \
        .to_csv(path, index=False)


def load_triplets(path) -> np.ndarray:
    df = pd.read_csv(path)
    for col in ("anchor", "positive", "negative"):
        if col not in df.columns:
            raise ValueError(f"triplet CSV missing column {col}")
    return df[["anchor", "positive", "negative"]].to_numpy(np.int64)
