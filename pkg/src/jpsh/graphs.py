"""Sparse similarity graphs: sample-to-anchor affinity and anchor-to-anchor kernel.

The affinity matrix keeps only each sample's k nearest anchors and row-normalizes
a Gaussian kernel over them, so it is row-stochastic with at most k nonzeros per
row. The anchor similarity graph connects mutual-or neighbors among the anchors
themselves with an (unnormalized) Gaussian kernel.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._numeric import k_smallest_stable, pairwise_sq_dists
from .anchors import AnchorSet
from .data_io import FeatureSet
from .errors import ParamError

log = logging.getLogger(__name__)


@dataclass
class AnchorAffinity:
    """Row-stochastic (n, m) sparse affinity; exactly min(k, m) stored entries per row."""

    values: sp.csr_matrix
    k: int
    theta: float


@dataclass
class AnchorSimilarity:
    """Symmetric (m, m) sparse anchor kernel with zero diagonal."""

    values: sp.csr_matrix
    psi: int
    delta: float


def build_affinity(
    fs: FeatureSet, anchors: AnchorSet, k: int, theta: float | None = None
) -> AnchorAffinity:
    """Truncated kernel weights between every sample and its k nearest anchors.

    Each row i holds exp(-||x_i - c_j||^2 / theta) at the k nearest anchors of
    x_i, normalized to sum to one. Distance ties resolve to the lower anchor
    index. ``theta=None`` selects the bandwidth automatically as the mean
    squared distance to the k-th nearest anchor.

    Raises:
        ParamError: k out of range or theta <= 0.
    """
    m = anchors.m
    if k < 1 or k > m:
        raise ParamError(f"k={k} must satisfy 1 <= k <= m={m}")
    if theta is not None and not theta > 0:
        raise ParamError(f"theta must be positive, got {theta}")
    d2 = pairwise_sq_dists(fs.features, anchors.centers)
    nbr = k_smallest_stable(d2, k)
    sel = np.take_along_axis(d2, nbr, axis=1)
    if theta is None:
        theta = float(sel[:, -1].mean())
        if theta <= 0.0:
            theta = 1.0  # all samples sit on anchors; uniform kernel
    # shifting by the row minimum leaves the normalized weights unchanged
    # but keeps the largest entry at exp(0), avoiding all-zero underflow
    with np.errstate(under="ignore"):
        w = np.exp(-(sel - sel[:, :1]) / theta)
    sums = w.sum(axis=1)
    dead = sums <= 0.0
    if dead.any():
        log.warning("uniform fallback for %d all-zero kernel rows", int(dead.sum()))
        w[dead] = 1.0
        sums[dead] = k
    w /= sums[:, None]
    # store in CSR with ascending column order per row, keeping explicit zeros
    order = np.argsort(nbr, axis=1, kind="stable")
    cols = np.take_along_axis(nbr, order, axis=1).ravel()
    data = np.take_along_axis(w, order, axis=1).ravel()
    indptr = np.arange(0, fs.n * k + 1, k)
    mat = sp.csr_matrix((data, cols, indptr), shape=(fs.n, m))
    return AnchorAffinity(mat, k, theta)


def build_anchor_similarity(
    anchors: AnchorSet, psi: int, delta: float | None = None
) -> AnchorSimilarity:
    """Gaussian kernel between anchors that are psi-nearest neighbors of each other.

    An edge (i, j) exists iff i is among j's psi nearest anchors or vice versa
    (self excluded). ``delta=None`` picks the bandwidth as the mean distance
    from each anchor to its psi neighbors; the kernel is exp(-dist^2 / delta^2).
    """
    m = anchors.m
    if psi < 1 or psi >= m:
        raise ParamError(f"psi={psi} must satisfy 1 <= psi <= m-1={m - 1}")
    if delta is not None and not delta > 0:
        raise ParamError(f"delta must be positive, got {delta}")
    d2 = pairwise_sq_dists(anchors.centers, anchors.centers)
    d2 = 0.5 * (d2 + d2.T)  # exact symmetry
    sel_d2 = d2.copy()
    np.fill_diagonal(sel_d2, np.inf)
    nbr = k_smallest_stable(sel_d2, psi)
    if delta is None:
        delta = float(np.sqrt(np.take_along_axis(d2, nbr, axis=1)).mean())
        if delta <= 0.0:
            delta = 1.0  # coincident anchors
    adj = np.zeros((m, m), dtype=bool)
    np.put_along_axis(adj, nbr, True, axis=1)
    adj |= adj.T
    np.fill_diagonal(adj, False)
    with np.errstate(under="ignore"):
        vals = np.where(adj, np.exp(-d2 / (delta * delta)), 0.0)
    mat = sp.csr_matrix(vals)
    return AnchorSimilarity(mat, psi, delta)


def dump_coo_csv(matrix: sp.spmatrix, path) -> None:
    """Debug dump of a sparse matrix as ``row,col,value`` lines."""
    coo = matrix.tocoo()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("row,col,value\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r},{c},{v!r}\n")
