"""Sanity-floor baselines sharing the evaluation harness.

LSH here is the classic random-hyperplane sketch: a seeded Gaussian projection
whose sign pattern is the code. The random-anchor variant wires the main
optimizer to uniformly sampled anchors instead of K-means centers, which
isolates how much the learned anchors contribute.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_io import FeatureSet
from .encoder import CodeSet, pack_bits
from .errors import ParamError, ShapeError
from .optimizer import Hyperparams, JpshModel, TrainTrace, train


@dataclass
class LshModel:
    """A d x l Gaussian projection; bit t is the sign of the t-th column response."""

    projection: np.ndarray
    seed: int

    @property
    def l(self) -> int:
        return self.projection.shape[1]


def lsh_train(d: int, l: int, seed: int) -> LshModel:
    """Sample the random-hyperplane projection."""
    if d < 1 or l < 1:
        raise ParamError("d and l must be >= 1")
    rng = np.random.default_rng(seed)
    return LshModel(rng.standard_normal((d, l)), seed)


def lsh_encode(model: LshModel, x: np.ndarray) -> np.ndarray:
    """Packed code of one vector: bit t = 1 iff (projection^T x)_t >= 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.projection.shape[0],):
        raise ShapeError(
            f"query has shape {x.shape}, projection expects "
            f"({model.projection.shape[0]},)"
        )
    return pack_bits((x @ model.projection >= 0.0)[None, :])[0]


def lsh_encode_batch(model: LshModel, fs: FeatureSet) -> CodeSet:
    """Encode a corpus under the projection, preserving row order and ids."""
    if fs.d != model.projection.shape[0]:
        raise ShapeError(
            f"features have d={fs.d}, projection expects {model.projection.shape[0]}"
        )
    bits = fs.features @ model.projection >= 0.0
    return CodeSet(pack_bits(bits), fs.ids, model.l)


def train_random_anchor(
    fs: FeatureSet, hyper: Hyperparams, **kwargs
) -> tuple[JpshModel, TrainTrace]:
    """The main optimizer fed uniformly sampled anchors instead of K-means."""
    return train(fs, hyper, anchor_method="random", **kwargs)
