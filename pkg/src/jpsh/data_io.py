"""Feature-corpus loading, validation, splitting and centering.

On-disk formats
---------------
fvec-binary   magic ``JPSHF1``, then u64 n, u64 d (little endian), then n*d
              little-endian float32 values in row-major order.
csv           one row per sample, comma separated decimal values, no header.
idx-image     ubyte image tensor (magic 0x00000803); images are flattened
              row-major to d = rows*cols and scaled to [0, 1].
labels        one line per sample holding comma-separated label indices
              (may be empty for an unlabeled sample); ``idx-labels`` reads a
              ubyte class vector (magic 0x00000801) as single-label rows.
"""

from __future__ import annotations

import gzip
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, LabelError, ParamError, SplitError

log = logging.getLogger(__name__)

FEATURE_MAGIC = b"JPSHF1"

FORMATS = ("fvec-binary", "csv", "idx-image")


@dataclass
class FeatureSet:
    """An n x d feature matrix with sample ids and optional multi-label annotations.

    Args:
        features: (n, d) real matrix; every entry must be finite.
        ids: n opaque sample identifiers (defaults to 0..n-1).
        labels: optional (n, L) boolean label-membership matrix. Rows with no
            set bit are allowed (logged, not rejected).
    """

    features: np.ndarray
    ids: np.ndarray | None = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise DataError(f"features must be 2-d, got shape {self.features.shape}")
        n, d = self.features.shape
        if n < 1 or d < 1:
            raise DataError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
        finite = np.isfinite(self.features)
        if not finite.all():
            r, c = np.argwhere(~finite)[0]
            raise DataError(f"non-finite feature value at row {r}, column {c}")
        if self.ids is None:
            self.ids = np.arange(n, dtype=np.int64)
        else:
            self.ids = np.asarray(self.ids)
            if self.ids.shape != (n,):
                raise DataError(f"ids has shape {self.ids.shape}, expected ({n},)")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=bool)
            if self.labels.ndim != 2 or self.labels.shape[0] != n:
                raise DataError(
                    f"label matrix shape {self.labels.shape} does not match n={n}"
                )
            empty = int((~self.labels.any(axis=1)).sum())
            if empty:
                log.warning("%d of %d samples carry no label", empty, n)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> "FeatureSet":
        """New FeatureSet restricted to the given row indices (ids preserved)."""
        labels = self.labels[indices] if self.labels is not None else None
        return FeatureSet(self.features[indices], self.ids[indices], labels)


@dataclass(frozen=True)
class SplitSpec:
    """How to carve a corpus into train and test sets.

    ``per-class-stratified`` draws ``test_per_class`` samples from every class
    (labels must be present and single-label); ``uniform`` draws
    ``test_per_class`` samples in total, ignoring labels.
    """

    test_per_class: int
    seed: int
    strategy: str = "per-class-stratified"

    def __post_init__(self):
        if self.test_per_class < 1:
            raise ParamError(f"test_per_class must be >= 1, got {self.test_per_class}")
        if self.strategy not in ("per-class-stratified", "uniform"):
            raise ParamError(f"unknown split strategy {self.strategy!r}")


# ---------------------------------------------------------------------------
# loading / saving
# ---------------------------------------------------------------------------


def _open_maybe_gzip(path: Path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_features(path, format: str) -> FeatureSet:
    """Load a feature corpus from disk.

    Args:
        path: input file.
        format: one of ``fvec-binary``, ``csv``, ``idx-image``.

    Raises:
        FormatError: unknown format or malformed header.
        DataError: non-finite values or inconsistent row widths.
    """
    path = Path(path)
    if not path.exists():
        raise FormatError(f"no such file: {path}")
    if format == "csv":
        return _load_csv(path)
    if format == "fvec-binary":
        return _load_fvec(path)
    if format == "idx-image":
        return _load_idx_images(path)
    raise FormatError(f"unknown feature format {format!r}")


def _load_csv(path: Path) -> FeatureSet:
    rows: list[list[float]] = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise DataError(
                    f"row {lineno} has {len(parts)} columns, expected {width}"
                )
            try:
                values = [float(p) for p in parts]
            except ValueError as exc:
                raise FormatError(f"row {lineno}: unparseable value ({exc})") from exc
            for col, v in enumerate(values):
                if not np.isfinite(v):
                    raise DataError(f"non-finite feature value at row {lineno}, column {col}")
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no samples")
    return FeatureSet(np.asarray(rows, dtype=np.float64))


def _load_fvec(path: Path) -> FeatureSet:
    raw = path.read_bytes()
    header = len(FEATURE_MAGIC) + 16
    if len(raw) < header or raw[: len(FEATURE_MAGIC)] != FEATURE_MAGIC:
        raise FormatError(f"{path}: bad magic, not a fvec-binary file")
    n, d = struct.unpack_from("<QQ", raw, len(FEATURE_MAGIC))
    expected = header + 4 * n * d
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload is {len(raw) - header} bytes, header promises {4 * n * d}"
        )
    if n < 1 or d < 1:
        raise FormatError(f"{path}: header declares empty matrix n={n}, d={d}")
    mat = np.frombuffer(raw, dtype="<f4", offset=header).reshape(n, d)
    finite = np.isfinite(mat)
    if not finite.all():
        r, c = np.argwhere(~finite)[0]
        raise DataError(f"non-finite feature value at row {r}, column {c}")
    return FeatureSet(mat.astype(np.float64))


def _load_idx_images(path: Path) -> FeatureSet:
    with _open_maybe_gzip(path) as fh:
        head = fh.read(4)
        if len(head) != 4 or head[0] != 0 or head[1] != 0:
            raise FormatError(f"{path}: bad idx magic {head!r}")
        dtype_code, ndim = head[2], head[3]
        if dtype_code != 0x08 or ndim != 3:
            raise FormatError(
                f"{path}: expected ubyte image tensor (0x08, 3 dims), "
                f"got code 0x{dtype_code:02x} with {ndim} dims"
            )
        dims = struct.unpack(">III", fh.read(12))
        n, rows, cols = dims
        payload = fh.read()
    if len(payload) != n * rows * cols:
        raise FormatError(f"{path}: truncated image payload")
    mat = np.frombuffer(payload, dtype=np.uint8).reshape(n, rows * cols)
    return FeatureSet(mat.astype(np.float64) / 255.0)


def save_features(fs: FeatureSet, path, format: str = "fvec-binary") -> None:
    """Write features to disk; fvec-binary stores float32, csv full decimal text."""
    path = Path(path)
    if format == "fvec-binary":
        with open(path, "wb") as fh:
            fh.write(FEATURE_MAGIC)
            fh.write(struct.pack("<QQ", fs.n, fs.d))
            fh.write(np.ascontiguousarray(fs.features, dtype="<f4").tobytes())
    elif format == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            for row in fs.features:
                fh.write(",".join(repr(float(v)) for v in row))
                fh.write("\n")
    else:
        raise FormatError(f"unknown feature format {format!r}")


def load_labels(path, format: str = "indices") -> np.ndarray:
    """Read a label file into an (n, L) boolean membership matrix.

    ``indices`` is the text format (comma-separated label indices per line);
    ``idx-labels`` reads a ubyte idx class vector.
    """
    path = Path(path)
    if not path.exists():
        raise FormatError(f"no such file: {path}")
    if format == "indices":
        per_row: list[list[int]] = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh):
                line = line.strip()
                if not line:
                    per_row.append([])
                    continue
                try:
                    idxs = [int(tok) for tok in line.split(",")]
                except ValueError as exc:
                    raise FormatError(f"label row {lineno}: {exc}") from exc
                if any(i < 0 for i in idxs):
                    raise LabelError(f"label row {lineno}: negative label index")
                per_row.append(idxs)
        if not per_row:
            raise LabelError(f"{path}: empty label file")
        n_labels = max((max(r) + 1 for r in per_row if r), default=1)
        mat = np.zeros((len(per_row), n_labels), dtype=bool)
        for i, idxs in enumerate(per_row):
            mat[i, idxs] = True
        return mat
    if format == "idx-labels":
        with _open_maybe_gzip(path) as fh:
            head = fh.read(4)
            if len(head) != 4 or head[:3] != b"\x00\x00\x08" or head[3] != 1:
                raise FormatError(f"{path}: not a ubyte idx class vector")
            (n,) = struct.unpack(">I", fh.read(4))
            payload = fh.read()
        if len(payload) != n:
            raise FormatError(f"{path}: truncated label payload")
        classes = np.frombuffer(payload, dtype=np.uint8)
        mat = np.zeros((n, int(classes.max()) + 1), dtype=bool)
        mat[np.arange(n), classes] = True
        return mat
    raise FormatError(f"unknown label format {format!r}")


def save_labels(labels: np.ndarray, path) -> None:
    """Write a boolean membership matrix in the text ``indices`` format."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.asarray(labels, dtype=bool):
            fh.write(",".join(str(i) for i in np.flatnonzero(row)))
            fh.write("\n")


# ---------------------------------------------------------------------------
# splitting and centering
# ---------------------------------------------------------------------------


def split(fs: FeatureSet, spec: SplitSpec) -> tuple[FeatureSet, FeatureSet]:
    """Partition a corpus into (train, test) sets, deterministically per seed.

    Raises:
        SplitError: stratified split requested without single-label annotations,
            or a class holds fewer samples than ``test_per_class``.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.strategy == "uniform":
        if spec.test_per_class >= fs.n:
            raise SplitError(
                f"test size {spec.test_per_class} must be smaller than n={fs.n}"
            )
        test_idx = np.sort(rng.permutation(fs.n)[: spec.test_per_class])
    else:
        if fs.labels is None:
            raise SplitError("per-class-stratified split requires labels")
        counts = fs.labels.sum(axis=1)
        if not (counts == 1).all():
            raise SplitError("per-class-stratified split requires single-label samples")
        classes = np.argmax(fs.labels, axis=1)
        picks = []
        for cls in range(fs.labels.shape[1]):
            members = np.flatnonzero(classes == cls)
            if members.size == 0:
                continue
            if members.size < spec.test_per_class:
                raise SplitError(
                    f"class {cls} has {members.size} samples, "
                    f"fewer than test_per_class={spec.test_per_class}"
                )
            picks.append(rng.permutation(members)[: spec.test_per_class])
        test_idx = np.sort(np.concatenate(picks))
    mask = np.zeros(fs.n, dtype=bool)
    mask[test_idx] = True
    train_idx = np.flatnonzero(~mask)
    if train_idx.size == 0:
        raise SplitError("split leaves an empty training set")
    return fs.subset(train_idx), fs.subset(test_idx)


def center(fs: FeatureSet) -> tuple[FeatureSet, np.ndarray]:
    """Subtract the per-column mean; returns the centered set and the mean vector.

    The mean is what queries must be shifted by later: use ``apply_center``
    with this vector rather than re-centering on query statistics.
    """
    mean = fs.features.mean(axis=0)
    return FeatureSet(fs.features - mean, fs.ids, fs.labels), mean


def apply_center(fs: FeatureSet, mean: np.ndarray) -> FeatureSet:
    """Shift features by a previously computed training mean."""
    mean = np.asarray(mean, dtype=np.float64)
    if mean.shape != (fs.d,):
        raise DataError(f"mean has shape {mean.shape}, expected ({fs.d},)")
    return FeatureSet(fs.features - mean, fs.ids, fs.labels)
