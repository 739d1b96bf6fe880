"""Versioned binary container for trained models.

Layout: magic ``JPSHM1``, u32 version, u64 header length, a canonical JSON
header (model type, hyperparameters, array manifest), then the raw array bytes
in manifest order. All integers and floats are little-endian; the header JSON
is serialized with sorted keys so identical models produce identical bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .anchors import AnchorSet
from .baselines import LshModel
from .errors import FormatError
from .optimizer import Hyperparams, JpshModel

MODEL_MAGIC = b"JPSHM1"
MODEL_VERSION = 1

_DTYPES = {"f8": "<f8", "i8": "<i8"}


def _array_manifest(arrays: dict[str, np.ndarray]) -> list[dict]:
    manifest = []
    for name, arr in arrays.items():
        code = "i8" if np.issubdtype(arr.dtype, np.integer) else "f8"
        manifest.append({"name": name, "shape": list(arr.shape), "dtype": code})
    return manifest


def save_model(model: JpshModel | LshModel, path) -> None:
    """Serialize a trained model (either kind) to the container format."""
    if isinstance(model, JpshModel):
        arrays = {
            "P": model.P,
            "W": model.W,
            "R": model.R,
            "V": model.V,
            "B": model.B,
            "anchor_centers": model.anchors.centers,
            "center_mean": model.center_mean,
        }
        header = {
            "model_type": "jpsh",
            "hyper": asdict(model.hyper),
            "arrays": _array_manifest(arrays),
        }
    elif isinstance(model, LshModel):
        arrays = {"projection": model.projection}
        header = {
            "model_type": "lsh",
            "seed": model.seed,
            "arrays": _array_manifest(arrays),
        }
    else:
        raise FormatError(f"cannot serialize {type(model).__name__}")
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<IQ", MODEL_VERSION, len(blob)))
        fh.write(blob)
        for entry in header["arrays"]:
            arr = arrays[entry["name"]]
            fh.write(np.ascontiguousarray(arr, dtype=_DTYPES[entry["dtype"]]).tobytes())


def load_model(path) -> JpshModel | LshModel:
    """Read a model container back; anchor assignments are not stored and load as None."""
    path = Path(path)
    raw = path.read_bytes()
    fixed = len(MODEL_MAGIC) + 12
    if len(raw) < fixed or raw[: len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise FormatError(f"{path}: not a model container")
    version, header_len = struct.unpack_from("<IQ", raw, len(MODEL_MAGIC))
    if version != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported container version {version}")
    try:
        header = json.loads(raw[fixed : fixed + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt header ({exc})") from exc
    offset = fixed + header_len
    arrays = {}
    for entry in header["arrays"]:
        dtype = _DTYPES[entry["dtype"]]
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(raw):
            raise FormatError(f"{path}: truncated array payload for {entry['name']}")
        arrays[entry["name"]] = (
            np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
            .reshape(shape)
            .copy()
        )
        offset += nbytes
    if offset != len(raw):
        raise FormatError(f"{path}: trailing bytes after arrays")
    if header["model_type"] == "lsh":
        return LshModel(arrays["projection"], int(header["seed"]))
    if header["model_type"] == "jpsh":
        hyper = Hyperparams(**header["hyper"])
        centers = arrays["anchor_centers"]
        anchor_set = AnchorSet(centers, None, centers.shape[0])
        return JpshModel(
            P=arrays["P"],
            W=arrays["W"],
            R=arrays["R"],
            V=arrays["V"],
            B=arrays["B"],
            anchors=anchor_set,
            center_mean=arrays["center_mean"],
            hyper=hyper,
        )
    raise FormatError(f"{path}: unknown model type {header['model_type']!r}")
