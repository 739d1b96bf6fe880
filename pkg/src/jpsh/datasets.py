"""Desk-scale datasets for demos and verification runs.

``gaussian_mixture`` builds a labeled mixture with well-separated class means
in the leading dimensions and pure-noise trailing dimensions. ``digits784``
upsamples the bundled 8x8 handwritten-digit images to 28x28 (784 features,
10 classes) with deterministic shift augmentation, standing in for full-size
digit corpora where those are not on disk. ``load_mnist`` reads the standard
idx files when a directory provides them (env var ``JPSH_MNIST_DIR``).
"""

from __future__ import annotations

import os
from functools import lru_cache
from pathlib import Path

import numpy as np

from .data_io import FeatureSet, SplitSpec, load_features, load_labels, split
from .errors import DataError

MNIST_ENV = "JPSH_MNIST_DIR"
_MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def gaussian_mixture(
    n: int,
    d: int,
    n_classes: int = 4,
    sep: float = 6.0,
    noise: float = 1.0,
    seed: int = 0,
) -> FeatureSet:
    """Labeled Gaussian mixture: class c is centered at sep * e_c, noise everywhere.

    Classes are balanced up to rounding; the label matrix is single-label.
    """
    if n_classes > d:
        raise DataError("need d >= n_classes so every class mean fits on an axis")
    rng = np.random.default_rng(seed)
    classes = np.arange(n) % n_classes
    rng.shuffle(classes)
    means = np.zeros((n_classes, d))
    means[np.arange(n_classes), np.arange(n_classes)] = sep
    features = means[classes] + noise * rng.standard_normal((n, d))
    labels = np.zeros((n, n_classes), dtype=bool)
    labels[np.arange(n), classes] = True
    return FeatureSet(features, labels=labels)


@lru_cache(maxsize=1)
def _digits_base() -> tuple[np.ndarray, np.ndarray]:
    """The 8x8 digit images upsampled to 28x28, scaled to [0, 1]."""
    from scipy.ndimage import zoom
    from sklearn.datasets import load_digits

    raw = load_digits()
    images = raw.images / 16.0
    big = zoom(images, (1.0, 3.5, 3.5), order=1)
    big = np.clip(big, 0.0, 1.0)
    return big.reshape(big.shape[0], -1), raw.target.astype(np.int64)


def digits784(seed: int = 0, rounds: int = 3) -> FeatureSet:
    """784-dimensional digit corpus: the upsampled base plus shifted copies.

    Each augmentation round rolls every image by a seeded offset in
    [-2, 2] pixels per axis, keeping the true class label.
    """
    base, classes = _digits_base()
    rng = np.random.default_rng(seed)
    side = 28
    feats = [base]
    labs = [classes]
    for _ in range(rounds):
        shifts = rng.integers(-2, 3, size=(base.shape[0], 2))
        shifted = np.empty_like(base)
        imgs = base.reshape(-1, side, side)
        for i, (dy, dx) in enumerate(shifts):
            shifted[i] = np.roll(imgs[i], (dy, dx), axis=(0, 1)).ravel()
        feats.append(shifted)
        labs.append(classes)
    features = np.concatenate(feats, axis=0)
    all_classes = np.concatenate(labs)
    order = rng.permutation(features.shape[0])
    features = features[order]
    all_classes = all_classes[order]
    labels = np.zeros((features.shape[0], 10), dtype=bool)
    labels[np.arange(features.shape[0]), all_classes] = True
    return FeatureSet(features, labels=labels)


def digits784_split(
    n_train: int, n_test: int, seed: int = 0
) -> tuple[FeatureSet, FeatureSet]:
    """A (train, test) pair of the requested sizes from the digit corpus."""
    fs = digits784(seed)
    train, test = split(fs, SplitSpec(n_test // 10, seed))
    if train.n < n_train:
        raise DataError(f"corpus leaves only {train.n} training rows, need {n_train}")
    rng = np.random.default_rng(seed + 1)
    keep = np.sort(rng.choice(train.n, size=n_train, replace=False))
    return train.subset(keep), test


def mnist_dir() -> Path:
    return Path(os.environ.get(MNIST_ENV, "data/mnist"))


def _find_mnist_file(base: Path, name: str) -> Path | None:
    for candidate in (base / name, base / (name + ".gz")):
        if candidate.exists():
            return candidate
    return None


def mnist_available(base: Path | None = None) -> bool:
    base = base or mnist_dir()
    return all(_find_mnist_file(base, n) is not None for n in _MNIST_FILES.values())


def load_mnist(base: Path | None = None) -> tuple[FeatureSet, FeatureSet]:
    """Load the standard idx train/test corpora with single-label annotations."""
    base = base or mnist_dir()
    paths = {key: _find_mnist_file(base, name) for key, name in _MNIST_FILES.items()}
    missing = [k for k, v in paths.items() if v is None]
    if missing:
        raise DataError(f"missing mnist files under {base}: {', '.join(missing)}")
    train = load_features(paths["train_images"], "idx-image")
    train = FeatureSet(
        train.features, train.ids, load_labels(paths["train_labels"], "idx-labels")
    )
    test = load_features(paths["test_images"], "idx-image")
    test = FeatureSet(
        test.features, test.ids, load_labels(paths["test_labels"], "idx-labels")
    )
    return train, test


def mnist_subset(
    n_train: int, n_test: int, seed: int = 0, base: Path | None = None
) -> tuple[FeatureSet, FeatureSet]:
    """A stratified (train, test) subset of the full training corpus."""
    full, _ = load_mnist(base)
    rest, test = split(full, SplitSpec(n_test // 10, seed))
    rng = np.random.default_rng(seed + 1)
    keep = np.sort(rng.choice(rest.n, size=n_train, replace=False))
    return rest.subset(keep), test
