"""K-means over embeddings (Lloyd's algorithm), elbow selection, PCA.

All numpy, deterministic for a seed: k-means++ seeding, 10 restarts with
the winner chosen by (WCSS, restart index), empty clusters repaired by
re-seeding at the farthest point, labels canonicalized by descending
cluster size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

ELBOW_CONFIDENCE_MIN = 0.1  # normalized chord distance below this is flagged


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray            # (k, d)
    wcss: float
    iterations: int
    seed: int
    labels: np.ndarray = None        # assignment of the fitted points
    wcss_history: list = field(default_factory=list)

    def validate(self) -> None:
        if self.centroids.shape[0] != self.k:
            raise ValueError("centroid count != k")
        if not np.all(np.isfinite(self.centroids)):
            raise ValueError("non-finite centroids")
        if self.wcss < 0:
            raise ValueError("negative WCSS")

    def to_json(self, path) -> None:
        doc = {"k": self.k, "seed": self.seed, "wcss": self.wcss,
               "iterations": self.iterations,
               "wcss_history": [float(w) for w in self.wcss_history],
               "centroids": [row.tolist() for row in
                             np.asarray(self.centroids, dtype=np.float64)]}
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @classmethod
    def from_json(cls, path) -> "ClusterModel":
        with open(path) as fh:
            doc = json.load(fh)
        return cls(k=int(doc["k"]),
                   centroids=np.asarray(doc["centroids"], dtype=np.float64),
                   wcss=float(doc["wcss"]), iterations=int(doc["iterations"]),
                   seed=int(doc["seed"]),
                   wcss_history=[float(w) for w in doc.get("wcss_history", [])])


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, (n, k)."""
    # ||x - c||^2 = ||x||^2 - 2 x.c + ||c||^2; clamp tiny negatives
    d2 = (np.sum(points ** 2, axis=1)[:, None]
          - 2.0 * points @ centroids.T
          + np.sum(centroids ** 2, axis=1)[None, :])
    return np.maximum(d2, 0.0)


def _plus_plus_seed(points: np.ndarray, k: int,
                    rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = points[rng.integers(0, n)]
    closest = np.sum((points - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # all remaining mass at the chosen points; pick uniformly
            centroids[j] = points[rng.integers(0, n)]
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(closest), r, side="right"))
            idx = min(idx, n - 1)
            centroids[j] = points[idx]
        closest = np.minimum(closest,
                             np.sum((points - centroids[j]) ** 2, axis=1))
    return centroids


def _lloyd(points: np.ndarray, centroids: np.ndarray, max_iter: int,
           tol: float):
    wcss_history = []
    labels = None
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(points, centroids)
        labels = np.argmin(d2, axis=1)           # ties -> lowest index
        wcss_history.append(float(d2[np.arange(len(points)), labels].sum()))

        new_centroids = np.empty_like(centroids)
        counts = np.bincount(labels, minlength=len(centroids))
        for j in range(len(centroids)):
            if counts[j] > 0:
                new_centroids[j] = points[labels == j].mean(axis=0)
        empties = np.flatnonzero(counts == 0)
        if len(empties):
            # re-seed each empty cluster at the point currently farthest
            # from its centroid (distinct points for distinct empties)
            far = np.argsort(d2[np.arange(len(points)), labels],
                             kind="stable")[::-1]
            for e, j in enumerate(empties):
                new_centroids[j] = points[far[e]]
        shift = float(np.max(np.linalg.norm(new_centroids - centroids,
                                            axis=1)))
        centroids = new_centroids
        if shift < tol and not len(empties):
            break
    # final assignment against the final centroids
    d2 = _sq_dists(points, centroids)
    labels = np.argmin(d2, axis=1)
    wcss = float(d2[np.arange(len(points)), labels].sum())
    wcss_history.append(wcss)
    return centroids, labels, wcss, wcss_history, it


def _canonicalize(centroids, labels):
    """Relabel clusters by descending size (ties by old label)."""
    counts = np.bincount(labels, minlength=len(centroids))
    order = np.lexsort((np.arange(len(centroids)), -counts))
    remap = np.empty(len(centroids), dtype=np.int64)
    remap[order] = np.arange(len(centroids))
    return centroids[order], remap[labels]


def kmeans(points: np.ndarray, k: int, seed: int, max_iter: int = 300,
           tol: float = 1e-6, n_init: int = 10) -> ClusterModel:
    """Best-of-restarts Lloyd's algorithm with k-means++ seeding."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be (n, d)")
    if k < 1:
        raise ValueError("k must be >= 1")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if len(points) < k:
        raise ValueError(f"need at least k={k} points, got {len(points)}")
    best = None
    for restart in range(n_init):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([seed, restart])))
        init = _plus_plus_seed(points, k, rng)
        centroids, labels, wcss, history, iters = _lloyd(
            points, init, max_iter, tol)
        if best is None or wcss < best[0]:
            best = (wcss, restart, centroids, labels, history, iters)
    wcss, _, centroids, labels, history, iters = best
    centroids, labels = _canonicalize(centroids, labels)
    model = ClusterModel(k=k, centroids=centroids, wcss=wcss,
                         iterations=iters, seed=seed, labels=labels,
                         wcss_history=history)
    model.validate()
    return model


def assign(model: ClusterModel, points: np.ndarray) -> np.ndarray:
    """Nearest-centroid index per point; ties broken by lowest index."""
    points = np.asarray(points, dtype=np.float64)
    if points.shape[1] != model.centroids.shape[1]:
        raise ValueError("point dimension does not match centroids")
    return np.argmin(_sq_dists(points, model.centroids), axis=1)


@dataclass
class ElbowResult:
    k_star: int
    ks: list[int]
    wcss: list[float]
    distances: list[float]      # normalized chord distances per k
    low_confidence: bool

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"k": self.ks, "wcss": self.wcss,
                             "chord_distance": self.distances,
                             "selected": [int(k == self.k_star)
                                          for k in self.ks]})


def elbow_select(points: np.ndarray, k_range=range(2, 13),
                 seed: int = 0) -> ElbowResult:
    """Fit kmeans across k and pick the knee of the WCSS curve.

    Knee rule: after scaling k and WCSS to [0, 1], the selected k
    maximizes the vertical distance below the chord joining the curve's
    endpoints. A shallow knee (distance < 0.1) is flagged low-confidence
    so a human can override from the emitted curve.
    """
    ks = sorted(int(k) for k in k_range)
    if len(ks) < 3:
        raise ValueError("need at least 3 k values for a knee")
    wcss = [kmeans(points, k, seed).wcss for k in ks]
    lo, hi = min(wcss), max(wcss)
    if hi <= lo:
        return ElbowResult(k_star=ks[0], ks=ks, wcss=wcss,
                           distances=[0.0] * len(ks), low_confidence=True)
    x = (np.array(ks, dtype=np.float64) - ks[0]) / (ks[-1] - ks[0])
    y = (np.array(wcss) - lo) / (hi - lo)
    chord = y[0] + (y[-1] - y[0]) * x
    dist = chord - y
    k_star = ks[int(np.argmax(dist))]
    return ElbowResult(k_star=k_star, ks=ks, wcss=wcss,
                       distances=[float(d) for d in dist],
                       low_confidence=bool(np.max(dist) < ELBOW_CONFIDENCE_MIN))


def pca(points: np.ndarray, out_dim: int):
    """Project mean-centered points onto the top principal axes.

    Returns (projected (n, out_dim), explained-variance ratios). Each
    axis's sign is fixed so its largest-magnitude loading is positive.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) < 2:
        raise ValueError("need at least 2 points")
    if not 1 <= out_dim <= points.shape[1]:
        raise ValueError("out_dim must be in [1, d]")
    centered = points - points.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    flip = np.sign(vt[np.arange(len(vt)),
                      np.argmax(np.abs(vt), axis=1)])
    flip[flip == 0] = 1.0
    vt = vt * flip[:, None]
    var = s ** 2
    total = var.sum()
    ratios = (var[:out_dim] / total if total > 0
              else np.zeros(out_dim))
    return centered @ vt[:out_dim].T, ratios


def write_assignments(path, agents, labels) -> None:
    pd.DataFrame({"sample_id": np.arange(len(labels), dtype=np.int64),
                  "agent": np.asarray(agents, dtype=np.int64),
                  "cluster": np.asarray(labels, dtype=np.int64)}) \
        .to_csv(path, index=False)


def read_assignments(path) -> pd.DataFrame:
    df = pd.read_csv(path)
    for col in ("sample_id", "agent", "cluster"):
        if col not in df.columns:
            raise ValueError(f"assignments CSV missing column {col}")
    return df
