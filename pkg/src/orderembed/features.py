"""Feature extraction for 50-order windows.

Three nested feature sets are supported:

    basic       [interevent, quantity, side, best_bid, best_ask]      width 5
    basic_m     basic + [modif]                                       width 6
    basic_m_qs  basic_m + [bid_qty, ask_qty]                          width 8

Encoding choices, applied before standardization:

- interevent time: dt_i = t_i - t_{i-1} with dt_1 = 0 (no information
  about the pre-window gap leaks in), then log(1+x);
- quantity and queue sizes: log(1+x) to tame heavy tails;
- prices: ticks relative to the window's first mid-price, so the level
  drops out and only spread plus intra-window moves remain;
- side and modif: passed through untouched (already in {-1,+1}/{0,1}).

Standardization statistics are fitted on training windows only and
frozen; a constant training column gets its scale floored to 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .orders import WINDOW, OrderLog, Sample, WindowSet


class FeatureSet:
    """One of the three nested feature variants."""

    _WIDTHS = {"basic": 5, "basic_m": 6, "basic_m_qs": 8}
    _COLUMNS = {
        "basic": ["interevent", "quantity", "side", "best_bid", "best_ask"],
        "basic_m": ["interevent", "quantity", "side", "best_bid", "best_ask",
                    "modif"],
        "basic_m_qs": ["interevent", "quantity", "side", "best_bid", "best_ask",
                       "modif", "bid_qty", "ask_qty"],
    }
    # Columns standardized with fitted stats; side/modif pass through.
    _LOG1P = {"interevent", "quantity", "bid_qty", "ask_qty"}
    _PASSTHROUGH = {"side", "modif"}

    def __init__(self, variant: str):
        if variant not in self._WIDTHS:
            raise ValueError(f"unknown feature set {variant!r}; "
                             f"expected one of {sorted(self._WIDTHS)}")
        self.variant = variant

    @property
    def width(self) -> int:
        return self._WIDTHS[self.variant]

    @property
    def columns(self) -> list[str]:
        return self._COLUMNS[self.variant]

    def __eq__(self, other):
        return isinstance(other, FeatureSet) and other.variant == self.variant

    def __repr__(self):
        return f"FeatureSet({self.variant!r})"


BASIC = FeatureSet("basic")
BASIC_M = FeatureSet("basic_m")
BASIC_M_QS = FeatureSet("basic_m_qs")


@dataclass
class NormalizationStats:
    """Frozen per-column mean/scale, fitted on training windows.

    Pass-through columns carry mean 0 / scale 1 so that applying the
    stats is a single vectorized affine map.
    """

    feature_set: FeatureSet
    mean: np.ndarray
    scale: np.ndarray

    def validate(self) -> None:
        w = self.feature_set.width
        if self.mean.shape != (w,) or self.scale.shape != (w,):
            raise ValueError("normalization stats shape mismatch")
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.scale))):
            raise ValueError("non-finite normalization stats")
        if np.any(self.scale <= 0):
            raise ValueError("normalization scale must be positive")

    def to_dict(self) -> dict:
        return {"feature_set": self.feature_set.variant,
                "mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationStats":
        return cls(FeatureSet(d["feature_set"]),
                   np.asarray(d["mean"], dtype=np.float64),
                   np.asarray(d["scale"], dtype=np.float64))

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path) -> "NormalizationStats":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass
class FeatureMatrix:
    """A featurized window: 50 x width, finite, already standardized."""

    values: np.ndarray
    feature_set: FeatureSet

    def validate(self) -> None:
        if self.values.shape != (WINDOW, self.feature_set.width):
            raise ValueError(f"feature matrix shape {self.values.shape} does not "
                             f"match {self.feature_set.variant}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite feature values")


def _raw_window_features(log: OrderLog, rows: np.ndarray, fs: FeatureSet) -> np.ndarray:
    """Pre-standardization features for windows given as a (n, 50) row array.

    Returns (n, 50, width) float64.
    """
    rows = np.asarray(rows, dtype=np.int64)
    squeeze = rows.ndim == 1
    rows = rows.reshape(-1, WINDOW)
    n = len(rows)
    out = np.empty((n, WINDOW, fs.width), dtype=np.float64)

    t = log.t[rows]
    dt = np.zeros_like(t)
    dt[:, 1:] = np.diff(t, axis=1)
    mid0 = (log.best_bid[rows[:, 0]] + log.best_ask[rows[:, 0]]) / 2.0

    for j, name in enumerate(fs.columns):
        if name == "interevent":
            col = np.log1p(dt)
        elif name in ("quantity",):
            col = np.log1p(log.q_filled[rows].astype(np.float64))
        elif name in ("bid_qty", "ask_qty"):
            col = np.log1p(getattr(log, name)[rows].astype(np.float64))
        elif name in ("best_bid", "best_ask"):
            col = getattr(log, name)[rows] - mid0[:, None]
        else:  # side, modif pass through
            col = getattr(log, name)[rows].astype(np.float64)
        out[:, :, j] = col
    return out[0] if squeeze else out


def fit_normalization(windows: WindowSet | list[Sample],
                      fs: FeatureSet) -> NormalizationStats:
    """Fit per-column mean and scale on a training window set.

    Scale is the population standard deviation of the transformed
    column, floored to 1 when the column is constant. Side and modif
    are exempt (mean 0, scale 1).
    """
    if isinstance(windows, WindowSet):
        if len(windows) == 0:
            raise ValueError("cannot fit normalization on an empty window set")
        raw = _raw_window_features(windows.log, windows.rows, fs)
    else:
        if not windows:
            raise ValueError("cannot fit normalization on an empty window set")
        raw = np.stack([_raw_window_features(s.log, s.rows, fs) for s in windows])

    flat = raw.reshape(-1, fs.width)
    mean = flat.mean(axis=0)
    scale = flat.std(axis=0)
    # A constant column can show a ~1e-15 std from summation rounding;
    # treat anything that small as constant and floor its scale to 1.
    scale[scale <= 1e-12 * np.maximum(1.0, np.abs(mean))] = 1.0
    for j, name in enumerate(fs.columns):
        if name in FeatureSet._PASSTHROUGH:
            mean[j], scale[j] = 0.0, 1.0
    stats = NormalizationStats(fs, mean, scale)
    stats.validate()
    return stats


def featurize(sample: Sample, fs: FeatureSet,
              norm: NormalizationStats) -> FeatureMatrix:
    """Featurize one window under frozen normalization stats."""
    if norm.feature_set != fs:
        raise ValueError("normalization stats fitted for a different feature set")
    sample.validate()
    raw = _raw_window_features(sample.log, sample.rows, fs)
    values = (raw - norm.mean) / norm.scale
    fm = FeatureMatrix(values=values, feature_set=fs)
    fm.validate()
    return fm


def featurize_windows(windows: WindowSet, fs: FeatureSet,
                      norm: NormalizationStats) -> np.ndarray:
    """Featurize a whole window set at once; returns (n, 50, width)."""
    if norm.feature_set != fs:
        raise ValueError("normalization stats fitted for a different feature set")
    raw = _raw_window_features(windows.log, windows.rows, fs)
    out = (raw - norm.mean) / norm.scale
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite feature values")
    return out


def unstandardize_interevent(column: np.ndarray,
                             norm: NormalizationStats) -> np.ndarray:
    """Invert the interevent encoding: standardized column -> dt seconds."""
    j = norm.feature_set.columns.index("interevent")
    return np.expm1(column * norm.scale[j] + norm.mean[j])
