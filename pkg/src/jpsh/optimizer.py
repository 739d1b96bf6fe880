"""Alternating minimization for jointly personalized sparse hashing.

The training objective couples two branches over binary anchor codes B:

* an anchor branch: each anchor c_j is mapped through its own d x l
  projection P_j and a shared rotation R onto its code b_j, with a squared
  row-sparsity penalty on every P_j and a network penalty tying neighboring
  anchors' projections together;
* a pairwise branch: every sample is mapped through one shared projection W
  and rotation V toward the codes of its nearest anchors, weighted by the
  truncated affinity graph, with a row-sparsity penalty on W.

Each parameter has a closed-form minimizer once the others are frozen: P and W
solve reweighted least-squares systems (the nonsmooth penalties enter through
diagonal / Laplacian-like reweighting matrices K, Q, G refreshed from the
previous iterate), R and V are orthogonal Procrustes solutions, and B is an
entrywise sign. The loop runs these updates in a fixed order until the
objective stalls or the iteration cap is reached.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from . import data_io
from .anchors import AnchorSet, kmeans, random_anchor_set
from .data_io import FeatureSet
from .errors import DivergenceError, ParamError, ShapeError, SolverError
from .graphs import (
    AnchorAffinity,
    AnchorSimilarity,
    build_affinity,
    build_anchor_similarity,
)

log = logging.getLogger(__name__)

MODES = ("jpsh", "jsh_only", "psh_only")

# presets replicating the reported per-dataset settings
_PRESETS = {
    "mnist": dict(k=7, psi=7, m=800, lambda1=1.0, lambda2=1.0, lambda3=10.0, T=10),
    "cifar10": dict(k=7, psi=7, m=800, lambda1=1.0, lambda2=1.0, lambda3=10.0, T=4),
    "nuswide": dict(k=5, psi=5, m=1000, lambda1=10.0, lambda2=10.0, lambda3=1e5, T=5),
    "flickr25k": dict(k=5, psi=5, m=500, lambda1=10.0, lambda2=10.0, lambda3=1e5, T=10),
}


@dataclass(frozen=True)
class Hyperparams:
    """Training knobs. ``jsh_only`` zeroes lambda1/lambda2 and skips the anchor
    branch; ``psh_only`` skips the pairwise branch (W, V, Q stay untouched)."""

    l: int
    m: int
    k: int = 7
    psi: int = 7
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 10.0
    T: int = 10
    eps: float = 1e-8
    mode: str = "jpsh"
    seed: int = 0
    ridge: float = 1e-8

    def __post_init__(self):
        if self.l < 1:
            raise ParamError(f"l must be >= 1, got {self.l}")
        if self.m < 1:
            raise ParamError(f"m must be >= 1, got {self.m}")
        if self.k < 1 or self.psi < 1:
            raise ParamError("k and psi must be >= 1")
        if self.T < 1:
            raise ParamError(f"T must be >= 1, got {self.T}")
        if not self.eps > 0:
            raise ParamError("eps must be positive")
        if min(self.lambda1, self.lambda2, self.lambda3) < 0 or self.ridge < 0:
            raise ParamError("lambda1/2/3 and ridge must be non-negative")
        if self.mode not in MODES:
            raise ParamError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "jsh_only":
            object.__setattr__(self, "lambda1", 0.0)
            object.__setattr__(self, "lambda2", 0.0)

    @property
    def anchor_branch(self) -> bool:
        return self.mode in ("jpsh", "psh_only")

    @property
    def pairwise_branch(self) -> bool:
        return self.mode in ("jpsh", "jsh_only")

    @classmethod
    def preset(cls, dataset: str, l: int, **overrides) -> "Hyperparams":
        """Per-dataset defaults: mnist, cifar10, nuswide, flickr25k."""
        if dataset not in _PRESETS:
            raise ParamError(f"no preset for {dataset!r}")
        kw = dict(_PRESETS[dataset])
        kw.update(overrides)
        return cls(l=l, **kw)


@dataclass
class JpshModel:
    """Learned parameters.

    P holds the m per-anchor projections as an (m, d, l) stack, W the shared
    (d, l) projection, R and V the two (l, l) rotations, and B the (l, m)
    sign matrix of anchor codes. ``center_mean`` is the training mean applied
    to queries before encoding (zeros when centering was disabled).
    """

    P: np.ndarray
    W: np.ndarray
    R: np.ndarray
    V: np.ndarray
    B: np.ndarray
    anchors: AnchorSet
    center_mean: np.ndarray
    hyper: Hyperparams

    def validate(self) -> None:
        l = self.hyper.l
        eye = np.eye(l)
        for name, rot in (("R", self.R), ("V", self.V)):
            resid = np.abs(rot.T @ rot - eye).max()
            if resid > 1e-8:
                raise SolverError(f"{name} is not orthogonal (residual {resid:.2e})")
        if not np.isin(self.B, (-1.0, 1.0)).all():
            raise SolverError("B contains entries other than -1/+1")
        if not (np.isfinite(self.P).all() and np.isfinite(self.W).all()):
            raise SolverError("non-finite entries in P or W")


@dataclass
class WorkState:
    """Per-run derived state: graphs, reweighting matrices and data caches.

    ``centers`` is the (m, d) anchor matrix; the block-diagonal md x m matrix
    pairing each anchor with its own projection is never materialized, all
    products against it are computed blockwise. ``xtx`` and ``xa`` cache
    X^T X and X^T A for the pairwise branch.
    """

    centers: np.ndarray
    K: np.ndarray
    G: np.ndarray
    Q: np.ndarray
    A: AnchorAffinity
    S: AnchorSimilarity
    xtx: np.ndarray | None = None
    xa: np.ndarray | None = None

    @classmethod
    def build(
        cls,
        fs: FeatureSet,
        anchors: AnchorSet,
        A: AnchorAffinity,
        S: AnchorSimilarity,
    ) -> "WorkState":
        m, d = anchors.centers.shape
        xtx = fs.features.T @ fs.features
        xtx = 0.5 * (xtx + xtx.T)
        xa = (A.values.T @ fs.features).T  # X^T A, shape (d, m)
        return cls(
            centers=anchors.centers,
            K=np.ones((m, d)),
            G=np.zeros((m, m)),
            Q=np.ones(d),
            A=A,
            S=S,
            xtx=np.ascontiguousarray(xtx),
            xa=np.ascontiguousarray(xa),
        )


@dataclass
class TrainTrace:
    """Objective values, per-term breakdown and wall time per iteration."""

    objectives: list[float]
    terms: list[tuple[float, float, float, float, float]]
    seconds: list[float]
    converged_at: int | None

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iter,objective,term1,term2,term3,term4,term5,seconds\n")
            for i, (obj, terms, sec) in enumerate(
                zip(self.objectives, self.terms, self.seconds), start=1
            ):
                row = ",".join(repr(t) for t in terms)
                fh.write(f"{i},{obj!r},{row},{sec!r}\n")


class ObjectiveValue(NamedTuple):
    total: float
    terms: tuple[float, float, float, float, float]


# ---------------------------------------------------------------------------
# objective
# ---------------------------------------------------------------------------


def _anchor_projections(P: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """(m, l) matrix whose row j is (P_j^T c_j)^T."""
    return np.einsum("jdt,jd->jt", P, centers)


def _pair_frobenius_gaps(P: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Frobenius norms ||P_i - P_j||_F for the given index pairs, chunked."""
    out = np.empty(rows.size, dtype=np.float64)
    chunk = max(1, int(2e7 // max(P[0].size, 1)))
    for s in range(0, rows.size, chunk):
        diff = P[rows[s : s + chunk]] - P[cols[s : s + chunk]]
        out[s : s + chunk] = np.sqrt(np.einsum("pdl,pdl->p", diff, diff))
    return out


def objective(model: JpshModel, ws: WorkState, fs: FeatureSet) -> ObjectiveValue:
    """Evaluate the training objective with its five-term breakdown.

    Terms: anchor-code fit, affinity-weighted pairwise fit, squared row-sparsity
    of the P blocks, network penalty across neighboring anchors, row-sparsity
    of W. Terms not belonging to the active mode are reported as zero.

    ``fs`` must hold the same (already centered) features used in training.
    """
    hyper = model.hyper
    m, d, l = model.P.shape
    if model.W.shape != (d, l) or model.B.shape != (l, m):
        raise ShapeError(
            f"inconsistent shapes: P {model.P.shape}, W {model.W.shape}, B {model.B.shape}"
        )
    if fs.d != d:
        raise ShapeError(f"features have d={fs.d}, model expects {d}")
    if ws.centers.shape != (m, d):
        raise ShapeError("anchor centers do not match model shape")

    t1 = t2 = t3 = t4 = t5 = 0.0
    if hyper.anchor_branch:
        U = _anchor_projections(model.P, ws.centers) @ model.R.T  # rows (R P_j^T c_j)^T
        t1 = float(((model.B.T - U) ** 2).sum())
        row_norms = np.sqrt(np.einsum("jdt,jdt->jd", model.P, model.P))
        t3 = hyper.lambda1 * float((row_norms.sum(axis=1) ** 2).sum())
        coo = ws.S.values.tocoo()
        if coo.nnz:
            gaps = _pair_frobenius_gaps(model.P, coo.row, coo.col)
            t4 = hyper.lambda2 * float((coo.data * gaps).sum())
    if hyper.pairwise_branch:
        E = (fs.features @ model.W) @ model.V.T  # rows (V W^T x_i)^T
        e2 = np.einsum("nt,nt->n", E, E)
        coo = ws.A.values.tocoo()
        cross = np.einsum("pt,pt->p", E[coo.row], model.B.T[coo.col])
        t2 = float((coo.data * (l + e2[coo.row] - 2.0 * cross)).sum())
        t5 = hyper.lambda3 * float(np.sqrt(np.einsum("dt,dt->d", model.W, model.W)).sum())
    terms = (t1, t2, t3, t4, t5)
    return ObjectiveValue(float(sum(terms)), terms)


# ---------------------------------------------------------------------------
# reweighting matrices
# ---------------------------------------------------------------------------


def compute_K(P: np.ndarray, eps: float) -> np.ndarray:
    """Diagonal reweighting for the squared row-sparsity penalty.

    Entry (j, f) is ||P_j||_{2,1} / (||row f of P_j||_2 + eps), returned as an
    (m, d) array of the block-diagonal entries.
    """
    if not eps > 0:
        raise ParamError("eps must be positive")
    row_norms = np.sqrt(np.einsum("jdt,jdt->jd", P, P))
    block_l21 = row_norms.sum(axis=1, keepdims=True)
    return block_l21 / (row_norms + eps)


def compute_G(P: np.ndarray, S: AnchorSimilarity, eps: float) -> np.ndarray:
    """Laplacian-like reweighting of the network penalty.

    Off-diagonal (i, j) is -S_ij / (||P_i - P_j||_F + eps); the diagonal makes
    every row sum to zero.
    """
    if not eps > 0:
        raise ParamError("eps must be positive")
    m = P.shape[0]
    G = np.zeros((m, m))
    coo = S.values.tocoo()
    if coo.nnz == 0:
        return G
    w = coo.data / (_pair_frobenius_gaps(P, coo.row, coo.col) + eps)
    np.subtract.at(G, (coo.row, coo.col), w)
    np.add.at(G, (coo.row, coo.row), w)
    return G


def compute_Q(W: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Diagonal reweighting of the W row-sparsity penalty: 1 / (2(||w_f|| + eps))."""
    if not eps > 0:
        raise ParamError("eps must be positive")
    row_norms = np.sqrt(np.einsum("dt,dt->d", W, W))
    return 1.0 / (2.0 * (row_norms + eps))


# ---------------------------------------------------------------------------
# linear solves
# ---------------------------------------------------------------------------


def _p_system_ridge(hyper: Hyperparams, centers: np.ndarray) -> float:
    gram_trace = float((centers**2).sum())
    scale = gram_trace / centers.size if gram_trace > 0 else 1.0
    return hyper.ridge * scale


def _apply_p_system(
    centers: np.ndarray,
    K: np.ndarray,
    G: np.ndarray,
    lam1: float,
    lam2: float,
    ridge: float,
    P: np.ndarray,
) -> np.ndarray:
    """Apply the P-update system matrix blockwise to an (m, d, l) stack."""
    out = ridge * P
    if lam1 != 0.0:
        out += lam1 * K[:, :, None] * P
    if lam2 != 0.0:
        out += lam2 * np.tensordot(G, P, axes=1)
    coef = np.einsum("jd,jdl->jl", centers, P)
    out += centers[:, :, None] * coef[:, None, :]
    return out


def _solve_p_dense(centers, K, G, lam1, lam2, ridge, rhs):
    m, d = centers.shape
    md = m * d
    H = lam2 * np.kron(G, np.eye(d)) if lam2 != 0.0 else np.zeros((md, md))
    H[np.arange(md), np.arange(md)] += (lam1 * K).ravel() + ridge
    for j in range(m):
        blk = slice(j * d, (j + 1) * d)
        H[blk, blk] += np.outer(centers[j], centers[j])
    try:
        cho = scipy.linalg.cho_factor(H)
    except scipy.linalg.LinAlgError as exc:
        raise SolverError(
            "P-update system is singular; set ridge > 0"
        ) from exc
    sol = scipy.linalg.cho_solve(cho, rhs.reshape(md, -1))
    return sol.reshape(rhs.shape)


def _solve_p_block(centers, K, G, lam1, lam2, ridge, rhs):
    """Exact solve exploiting structure: after grouping by feature index the
    diagonal-plus-Laplacian part splits into d independent m x m systems, and
    the anchor Gram term is a rank-m correction handled by the matrix
    inversion lemma."""
    m, d = centers.shape
    l = rhs.shape[2]
    T = np.empty((d, m, m))
    T[:] = lam2 * G if lam2 != 0.0 else 0.0
    idx = np.arange(m)
    T[:, idx, idx] += (lam1 * K + ridge).T
    Zf = rhs.transpose(1, 0, 2)
    Yf = np.zeros((d, m, m))
    Yf[:, idx, idx] = centers.T
    try:
        sol = np.linalg.solve(T, np.concatenate([Zf, Yf], axis=2))
    except np.linalg.LinAlgError as exc:
        raise SolverError("P-update system is singular; set ridge > 0") from exc
    TinvZ, TinvY = sol[:, :, :l], sol[:, :, l:]
    Ct = centers.T
    cap = np.eye(m) + np.einsum("fj,fjk->jk", Ct, TinvY)
    w_rhs = np.einsum("fj,fjl->jl", Ct, TinvZ)
    try:
        w = np.linalg.solve(cap, w_rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError("P-update correction is singular; set ridge > 0") from exc
    out = TinvZ - np.einsum("fjk,kl->fjl", TinvY, w)
    return out.transpose(1, 0, 2)


def _solve_p_cg(centers, K, G, lam1, lam2, ridge, rhs, P0):
    m, d = centers.shape
    l = rhs.shape[2]
    md = m * d
    diag = ridge + lam1 * K + centers**2
    if lam2 != 0.0:
        diag = diag + lam2 * np.diag(G)[:, None]
    inv_diag = 1.0 / np.maximum(diag.ravel(), 1e-300)

    def matvec(v):
        return _apply_p_system(
            centers, K, G, lam1, lam2, ridge, v.reshape(m, d, 1)
        ).ravel()

    op = scipy.sparse.linalg.LinearOperator((md, md), matvec=matvec)
    pre = scipy.sparse.linalg.LinearOperator((md, md), matvec=lambda v: inv_diag * v)
    out = np.empty_like(rhs)
    for t in range(l):
        b = rhs[:, :, t].ravel()
        x0 = P0[:, :, t].ravel() if P0 is not None else None
        x, info = scipy.sparse.linalg.cg(
            op, b, x0=x0, rtol=1e-10, atol=0.0, maxiter=10 * md, M=pre
        )
        if info != 0:
            log.warning("cg for code column %d stopped with info=%d", t, info)
        out[:, :, t] = x.reshape(m, d)
    return out


def update_P(
    ws: WorkState,
    B: np.ndarray,
    R: np.ndarray,
    hyper: Hyperparams,
    P0: np.ndarray | None = None,
    solver: str = "auto",
) -> np.ndarray:
    """Closed-form update of the anchor projections.

    Solves (lam1 K + lam2 (G kron I_d) + Y Y^T + ridge I) P = Y B^T R with the
    reweighting matrices K, G held fixed at the previous iterate. ``solver``
    picks the strategy: ``dense`` materializes the md x md system, ``block``
    is the exact structured solve, ``cg`` a Jacobi-preconditioned conjugate
    gradient; ``auto`` chooses by problem size.

    Raises:
        SolverError: singular system or relative residual above 1e-8.
    """
    centers = ws.centers
    m, d = centers.shape
    md = m * d
    ridge = _p_system_ridge(hyper, centers)
    rhs = centers[:, :, None] * (B.T @ R)[:, None, :]  # block j: c_j (B^T R)_j
    if not rhs.any():
        return np.zeros_like(rhs)
    if solver == "auto":
        if md <= 4096:
            solver = "dense"
        elif 2 * d * m * m * 8 <= 1 << 30:
            solver = "block"
        else:
            solver = "cg"
    lam1, lam2 = hyper.lambda1, hyper.lambda2
    if solver == "dense":
        P = _solve_p_dense(centers, ws.K, ws.G, lam1, lam2, ridge, rhs)
    elif solver == "block":
        P = _solve_p_block(centers, ws.K, ws.G, lam1, lam2, ridge, rhs)
    elif solver == "cg":
        P = _solve_p_cg(centers, ws.K, ws.G, lam1, lam2, ridge, rhs, P0)
    else:
        raise ParamError(f"unknown solver {solver!r}")
    resid = _apply_p_system(centers, ws.K, ws.G, lam1, lam2, ridge, P) - rhs
    rel = float(np.linalg.norm(resid.ravel()) / np.linalg.norm(rhs.ravel()))
    if rel > 1e-8:
        raise SolverError(
            f"P-update residual {rel:.2e} exceeds 1e-8; increase ridge"
        )
    return P


def update_W(
    fs: FeatureSet,
    ws: WorkState,
    B: np.ndarray,
    V: np.ndarray,
    hyper: Hyperparams,
) -> np.ndarray:
    """Closed-form update of the shared projection.

    Solves (lam3 Q + X X^T + ridge I) W = X A B^T V with the diagonal
    reweighting Q fixed at the previous iterate.
    """
    if ws.xtx is None or ws.xa is None:
        raise ShapeError("work state was built without pairwise caches")
    d = ws.xtx.shape[0]
    ridge = hyper.ridge * (np.trace(ws.xtx) / d if np.trace(ws.xtx) > 0 else 1.0)
    H = ws.xtx + np.diag(hyper.lambda3 * ws.Q + ridge)
    rhs = ws.xa @ (B.T @ V)
    try:
        cho = scipy.linalg.cho_factor(H)
    except scipy.linalg.LinAlgError as exc:
        raise SolverError(
            "W-update system is singular (can happen with lambda3=0 and n < d); "
            "set ridge > 0"
        ) from exc
    W = scipy.linalg.cho_solve(cho, rhs)
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm > 0:
        rel = float(np.linalg.norm(H @ W - rhs) / rhs_norm)
        if rel > 1e-8:
            raise SolverError(f"W-update residual {rel:.2e} exceeds 1e-8")
    return W


# ---------------------------------------------------------------------------
# rotations and codes
# ---------------------------------------------------------------------------


def procrustes_rotation(M: np.ndarray) -> np.ndarray:
    """The orthogonal matrix maximizing tr(R M): with M = U diag(s) Vt, R = V U^T."""
    U, _, Vt = np.linalg.svd(M)
    return Vt.T @ U.T


def update_R(P: np.ndarray, ws: WorkState, B: np.ndarray) -> np.ndarray:
    """Procrustes rotation aligning the anchor projections with the codes."""
    M = _anchor_projections(P, ws.centers).T @ B.T
    return procrustes_rotation(M)


def update_V(fs: FeatureSet, ws: WorkState, W: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Procrustes rotation aligning the affinity-weighted projections with the codes."""
    M = W.T @ ws.xa @ B.T
    return procrustes_rotation(M)


def update_B(
    P: np.ndarray,
    W: np.ndarray,
    R: np.ndarray,
    V: np.ndarray,
    fs: FeatureSet,
    ws: WorkState,
) -> np.ndarray:
    """Entrywise sign update of the anchor codes; sign(0) is +1.

    The argument is the sum of both branch projections; a zeroed branch
    contributes nothing, so ablation modes get their reduced form for free.
    """
    M = R @ _anchor_projections(P, ws.centers).T + V @ (W.T @ ws.xa)
    return np.where(M >= 0.0, 1.0, -1.0)


def _random_rotation(l: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((l, l)))
    return q * np.where(np.diag(r) >= 0, 1.0, -1.0)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


def train(
    fs: FeatureSet,
    hyper: Hyperparams,
    *,
    center: bool = True,
    anchor_method: str = "kmeans",
    tol: float = 1e-5,
    kmeans_iters: int = 100,
    solver: str = "auto",
) -> tuple[JpshModel, TrainTrace]:
    """Run the full alternating optimization and return the model plus its trace.

    Steps: anchors via seeded K-means (or uniform row sampling with
    ``anchor_method="random"``), affinity and anchor-similarity graphs (the
    affinity neighbor count is capped at m), orthogonal/random initialization,
    then per iteration the update cycle P, W, Q, R, V, B. Stops when the
    relative objective change drops below ``tol`` or after ``hyper.T``
    iterations. Deterministic given the seed.

    Raises:
        ParamError: invalid settings or m > n.
        DivergenceError: non-finite objective.
    """
    if hyper.m > fs.n:
        raise ParamError(f"m={hyper.m} exceeds n={fs.n}")
    if anchor_method not in ("kmeans", "random"):
        raise ParamError(f"unknown anchor_method {anchor_method!r}")

    if center:
        fs_c, mean = data_io.center(fs)
    else:
        fs_c, mean = fs, np.zeros(fs.d)

    if anchor_method == "kmeans":
        anchor_set = kmeans(fs_c, hyper.m, hyper.seed, kmeans_iters)
    else:
        anchor_set = random_anchor_set(fs_c, hyper.m, hyper.seed)

    A = build_affinity(fs_c, anchor_set, min(hyper.k, hyper.m))
    if hyper.m == 1:
        # a single anchor has no neighbors; the network penalty is vacuous
        S = AnchorSimilarity(
            scipy.sparse.csr_matrix((1, 1)), psi=hyper.psi, delta=1.0
        )
    else:
        S = build_anchor_similarity(anchor_set, hyper.psi)
    ws = WorkState.build(fs_c, anchor_set, A, S)

    rng = np.random.default_rng(hyper.seed)
    l, m, d = hyper.l, hyper.m, fs.d
    R = _random_rotation(l, rng)
    V = _random_rotation(l, rng)
    if not hyper.anchor_branch:
        R = np.eye(l)
    if not hyper.pairwise_branch:
        V = np.eye(l)
    B = rng.integers(0, 2, size=(l, m)).astype(np.float64) * 2.0 - 1.0
    P = np.zeros((m, d, l))
    W = np.zeros((d, l))

    model = JpshModel(P, W, R, V, B, anchor_set, mean, hyper)
    trace = TrainTrace([], [], [], None)
    prev_obj = None
    for t in range(1, hyper.T + 1):
        started = time.perf_counter()
        if hyper.anchor_branch:
            if t > 1:
                ws.K = compute_K(model.P, hyper.eps)
                ws.G = compute_G(model.P, S, hyper.eps)
            model.P = update_P(ws, model.B, model.R, hyper, P0=model.P, solver=solver)
        if hyper.pairwise_branch:
            model.W = update_W(fs_c, ws, model.B, model.V, hyper)
            ws.Q = compute_Q(model.W, hyper.eps)
        if hyper.anchor_branch:
            model.R = update_R(model.P, ws, model.B)
        if hyper.pairwise_branch:
            model.V = update_V(fs_c, ws, model.W, model.B)
        model.B = update_B(model.P, model.W, model.R, model.V, fs_c, ws)
        value = objective(model, ws, fs_c)
        trace.objectives.append(value.total)
        trace.terms.append(value.terms)
        trace.seconds.append(time.perf_counter() - started)
        if not np.isfinite(value.total):
            raise DivergenceError(f"objective became non-finite at iteration {t}")
        if prev_obj is not None:
            if abs(value.total - prev_obj) < tol * max(abs(prev_obj), 1e-300):
                trace.converged_at = t
                break
        prev_obj = value.total
    model.validate()
    return model, trace


def train_ablation(fs: FeatureSet, hyper: Hyperparams, **kwargs) -> tuple[JpshModel, TrainTrace]:
    """Train one of the reduced modes (``jsh_only`` or ``psh_only``)."""
    if hyper.mode == "jpsh":
        raise ParamError("train_ablation expects a reduced mode; use train for jpsh")
    return train(fs, hyper, **kwargs)
