"""Out-of-sample encoding: map arbitrary feature vectors to packed l-bit codes.

A query is shifted by the stored training mean, assigned to its nearest anchor
j, and the code is the entrywise sign of R P_j^T c_j + V W^T x. Bits pack
little-endian: bit t of the code is bit (t mod 64) of 64-bit word (t div 64),
with +1 -> 1 and -1 -> 0.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._numeric import nearest_index
from .data_io import FeatureSet
from .errors import FormatError, ShapeError
from .optimizer import JpshModel, _anchor_projections

CODES_MAGIC = b"JPSHC1"


@dataclass
class CodeSet:
    """Bit-packed l-bit codes with aligned sample ids.

    ``codes`` is an (n, ceil(l/64)) uint64 array; bits beyond l in the last
    word are zero.
    """

    codes: np.ndarray
    ids: np.ndarray
    l: int

    def __post_init__(self):
        self.codes = np.ascontiguousarray(self.codes, dtype=np.uint64)
        self.ids = np.asarray(self.ids)
        words = (self.l + 63) // 64
        if self.codes.ndim != 2 or self.codes.shape[1] != words:
            raise ShapeError(
                f"codes shape {self.codes.shape} inconsistent with l={self.l}"
            )
        if self.ids.shape != (self.codes.shape[0],):
            raise ShapeError("ids must align with codes")

    def __len__(self) -> int:
        return self.codes.shape[0]


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack an (n, l) boolean array into (n, ceil(l/64)) little-endian words."""
    bits = np.asarray(bits, dtype=bool)
    n, l = bits.shape
    words = (l + 63) // 64
    padded = np.zeros((n, words * 64), dtype=np.uint8)
    padded[:, :l] = bits
    packed = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").reshape(n, words)


def unpack_bits(codes: np.ndarray, l: int) -> np.ndarray:
    """Inverse of pack_bits: (n, words) uint64 -> (n, l) boolean."""
    codes = np.ascontiguousarray(codes, dtype="<u8")
    as_bytes = codes.view(np.uint8).reshape(codes.shape[0], -1)
    bits = np.unpackbits(as_bytes, axis=1, bitorder="little")
    return bits[:, :l].astype(bool)


def _scores(model: JpshModel, X: np.ndarray) -> np.ndarray:
    """Pre-sign code scores, one row per query."""
    Xc = X - model.center_mean
    assign = nearest_index(Xc, model.anchors.centers)
    anchor_rows = _anchor_projections(model.P, model.anchors.centers) @ model.R.T
    pair_rows = (Xc @ model.W) @ model.V.T
    return anchor_rows[assign] + pair_rows


def encode(model: JpshModel, x: np.ndarray) -> np.ndarray:
    """Encode a single d-vector into a packed code (1-d uint64 array).

    Raises:
        ShapeError: wrong dimensionality.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.anchors.centers.shape[1],):
        raise ShapeError(
            f"query has shape {x.shape}, model expects ({model.anchors.centers.shape[1]},)"
        )
    scores = _scores(model, x[None, :])
    return pack_bits(scores >= 0.0)[0]


def encode_batch(model: JpshModel, fs: FeatureSet, chunk: int = 4096) -> CodeSet:
    """Encode a corpus row by row; order-preserving and deterministic."""
    d = model.anchors.centers.shape[1]
    if fs.d != d:
        raise ShapeError(f"features have d={fs.d}, model expects {d}")
    parts = []
    for start in range(0, fs.n, chunk):
        scores = _scores(model, fs.features[start : start + chunk])
        parts.append(pack_bits(scores >= 0.0))
    return CodeSet(np.vstack(parts), fs.ids, model.hyper.l)


# ---------------------------------------------------------------------------
# code files
# ---------------------------------------------------------------------------


def save_codes(cs: CodeSet, path) -> None:
    """Write a code file (magic, u64 count, u32 l, packed words) plus an id sidecar."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(CODES_MAGIC)
        fh.write(struct.pack("<QI", len(cs), cs.l))
        fh.write(np.ascontiguousarray(cs.codes, dtype="<u8").tobytes())
    with open(path.with_name(path.name + ".ids"), "w", encoding="utf-8") as fh:
        for i in cs.ids:
            fh.write(f"{i}\n")


def load_codes(path) -> CodeSet:
    """Read a code file written by save_codes; ids come from the sidecar."""
    path = Path(path)
    raw = path.read_bytes()
    header = len(CODES_MAGIC) + 12
    if len(raw) < header or raw[: len(CODES_MAGIC)] != CODES_MAGIC:
        raise FormatError(f"{path}: not a code file")
    count, l = struct.unpack_from("<QI", raw, len(CODES_MAGIC))
    words = (l + 63) // 64
    expected = header + count * words * 8
    if len(raw) != expected:
        raise FormatError(f"{path}: truncated code payload")
    codes = np.frombuffer(raw, dtype="<u8", offset=header).reshape(count, words)
    sidecar = path.with_name(path.name + ".ids")
    if sidecar.exists():
        lines = sidecar.read_text(encoding="utf-8").splitlines()
        if len(lines) != count:
            raise FormatError(f"{sidecar}: id count does not match code count")
        try:
            ids = np.asarray([int(s) for s in lines], dtype=np.int64)
        except ValueError:
            ids = np.asarray(lines)
    else:
        ids = np.arange(count, dtype=np.int64)
    return CodeSet(codes.copy(), ids, l)
