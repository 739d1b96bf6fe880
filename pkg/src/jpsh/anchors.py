"""Anchor-point selection: seeded K-means and the random-sample variant.

Anchors act as landmarks: every sample relates to its nearest anchors instead
of to every other sample, and the per-sample nearest-anchor index doubles as a
pseudo-label for the personalized projections.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._numeric import nearest_index, pairwise_sq_dists
from .data_io import FeatureSet
from .errors import ParamError

log = logging.getLogger(__name__)


@dataclass
class AnchorSet:
    """m anchor points plus the nearest-anchor assignment of the corpus.

    ``assignment`` is None for anchor sets reconstructed from a model file,
    where the training corpus is no longer available.
    """

    centers: np.ndarray
    assignment: np.ndarray | None
    m: int

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64)
        if self.centers.shape[0] != self.m:
            raise ParamError(
                f"centers hold {self.centers.shape[0]} rows, m={self.m}"
            )
        if not np.isfinite(self.centers).all():
            raise ParamError("anchor centers contain non-finite values")
        if self.assignment is not None:
            self.assignment = np.asarray(self.assignment, dtype=np.int64)
            if self.assignment.min() < 0 or self.assignment.max() >= self.m:
                raise ParamError("assignment index out of range")


def _kmeans_pp_init(X: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: spread initial centers by squared-distance sampling."""
    n = X.shape[0]
    centers = np.empty((m, X.shape[1]), dtype=np.float64)
    chosen = np.zeros(n, dtype=bool)
    first = int(rng.integers(n))
    centers[0] = X[first]
    chosen[first] = True
    d2 = pairwise_sq_dists(X, centers[0:1])[:, 0]
    for i in range(1, m):
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass sits on already-chosen points (duplicates);
            # fall back to the lowest-index unchosen row
            idx = int(np.flatnonzero(~chosen)[0])
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[i] = X[idx]
        chosen[idx] = True
        np.minimum(d2, pairwise_sq_dists(X, centers[i : i + 1])[:, 0], out=d2)
    return centers


def _lloyd(
    X: np.ndarray, centers: np.ndarray, max_iters: int
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Lloyd iterations with farthest-point repair for empty clusters.

    Returns (centers, assignment, per-iteration within-cluster sum of squares).
    The WCSS trace is measured at each assignment step, so it is non-increasing.
    """
    n, m = X.shape[0], centers.shape[0]
    assignment = None
    wcss_trace: list[float] = []
    for _ in range(max_iters):
        d2 = pairwise_sq_dists(X, centers)
        new_assignment = np.argmin(d2, axis=1)
        wcss_trace.append(float(d2[np.arange(n), new_assignment].sum()))
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        counts = np.bincount(assignment, minlength=m)
        sums = np.zeros_like(centers)
        np.add.at(sums, assignment, X)
        nonempty = counts > 0
        centers[nonempty] = sums[nonempty] / counts[nonempty, None]
        empties = np.flatnonzero(~nonempty)
        if empties.size:
            # re-seed each empty center from the points farthest to their
            # assigned center, so m never silently shrinks
            farthest = np.argsort(d2[np.arange(n), assignment], kind="stable")[::-1]
            for slot, j in enumerate(empties):
                centers[j] = X[farthest[slot]]
            log.warning("re-seeded %d empty cluster(s)", empties.size)
    return centers, assignment, wcss_trace


def kmeans(fs: FeatureSet, m: int, seed: int, max_iters: int = 100) -> AnchorSet:
    """Seeded K-means anchors (k-means++ init, stop at assignment fixpoint).

    Args:
        fs: corpus to cluster.
        m: number of anchors, 1 <= m <= n.
        seed: RNG seed; identical seeds give identical anchors.
        max_iters: Lloyd iteration cap.

    Raises:
        ParamError: m out of range or max_iters < 1.
    """
    if m < 1 or m > fs.n:
        raise ParamError(f"m={m} must satisfy 1 <= m <= n={fs.n}")
    if max_iters < 1:
        raise ParamError("max_iters must be >= 1")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(fs.features, m, rng)
    centers, assignment, _ = _lloyd(fs.features, centers, max_iters)
    # final pass so the stored assignment matches the returned centers exactly
    assignment = nearest_index(fs.features, centers)
    return AnchorSet(centers, assignment, m)


def random_anchor_set(fs: FeatureSet, m: int, seed: int) -> AnchorSet:
    """Anchors drawn uniformly without replacement from the corpus rows."""
    if m < 1 or m > fs.n:
        raise ParamError(f"m={m} must satisfy 1 <= m <= n={fs.n}")
    rng = np.random.default_rng(seed)
    rows = rng.choice(fs.n, size=m, replace=False)
    centers = fs.features[rows].copy()
    assignment = nearest_index(fs.features, centers)
    return AnchorSet(centers, assignment, m)
