"""Small shared numeric kernels (distance computations, stable neighbor selection)."""

from __future__ import annotations

import numpy as np


def pairwise_sq_dists(X: np.ndarray, C: np.ndarray, chunk: int = 8192) -> np.ndarray:
    """Squared Euclidean distances between rows of X (n, d) and rows of C (m, d).

    Computed via the expanded form with row chunking so memory stays at
    O(chunk * m). Negative values from cancellation are clamped to zero.
    """
    X = np.asarray(X, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    c2 = np.einsum("md,md->m", C, C)
    out = np.empty((X.shape[0], C.shape[0]), dtype=np.float64)
    for start in range(0, X.shape[0], chunk):
        rows = X[start : start + chunk]
        r2 = np.einsum("nd,nd->n", rows, rows)
        d2 = r2[:, None] + c2[None, :] - 2.0 * (rows @ C.T)
        np.maximum(d2, 0.0, out=d2)
        out[start : start + chunk] = d2
    return out


def nearest_index(X: np.ndarray, C: np.ndarray, chunk: int = 8192) -> np.ndarray:
    """Index of the nearest row of C for every row of X; ties go to the lowest index."""
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(X.shape[0], dtype=np.int64)
    for start in range(0, X.shape[0], chunk):
        d2 = pairwise_sq_dists(X[start : start + chunk], C)
        out[start : start + chunk] = np.argmin(d2, axis=1)
    return out


def k_smallest_stable(values: np.ndarray, k: int) -> np.ndarray:
    """Column indices of the k smallest entries per row, ties broken by lower index.

    Returns an (n, k) integer array in ascending value order (stable).
    """
    order = np.argsort(values, axis=1, kind="stable")
    return order[:, :k]
