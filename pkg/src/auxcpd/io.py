"""Portable tensor files and supervised-model files.

Both formats are one line of JSON (UTF-8, ``\\n``-terminated) followed by
raw little-endian float64 values in column-major order.

Tensor file header::

    {"version": 1, "shape": [...], "order": "column-major", "dtype": "f64le",
     "labels": [...]?, "split": ["train"|"test", ...]?, "axes": {...}?, ...}

``labels`` and ``split`` index the last axis. Extra keys are preserved.

Model file header::

    {"version": 1, "kind": "supervised-cpd", "shape": [I1, I2, I3, I4],
     "classes": [...], "rank": R, "factor_order": [...],
     "order": "column-major", "dtype": "f64le", "blocks": [[rows, cols], ...]}

followed by the five factor matrices and the projection matrix, in that
order, each with the dimensions listed in ``blocks``.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .supervised import SupervisedModel

__all__ = [
    "FORMAT_VERSION",
    "TensorFileError",
    "write_tensor",
    "read_tensor",
    "load_tensor_file",
    "save_model",
    "load_model",
]

FORMAT_VERSION = 1
FACTOR_ORDER = ["channel", "frequency", "time", "trial", "class"]
_DTYPE = np.dtype("<f8")


class TensorFileError(ValueError):
    pass


def _write(path, header: dict, arrays) -> None:
    payload = b"".join(
        np.asarray(a, dtype=_DTYPE).reshape(-1, order="F").tobytes() for a in arrays
    )
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(payload)


def _read(path) -> tuple[dict, bytes]:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise TensorFileError(f"{path}: missing header line")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TensorFileError(f"{path}: bad header: {exc}") from None
    if header.get("version") != FORMAT_VERSION:
        raise TensorFileError(f"{path}: unsupported version {header.get('version')!r}")
    if header.get("dtype", "f64le") != "f64le" or header.get("order", "column-major") != "column-major":
        raise TensorFileError(f"{path}: only column-major f64le payloads are supported")
    return header, raw[nl + 1 :]


def write_tensor(path, t: np.ndarray, **meta) -> None:
    """Write ``t`` with optional metadata (labels, split, axes, ...)."""
    t = np.asarray(t, dtype=np.float64)
    if np.isnan(t).any():
        raise TensorFileError("NaN values cannot be stored")
    header = {"version": FORMAT_VERSION, "shape": list(t.shape), "order": "column-major", "dtype": "f64le"}
    header.update(meta)
    _write(path, header, [t])


def read_tensor(path) -> tuple[np.ndarray, dict]:
    """Read a tensor file; returns the array and its full header."""
    header, payload = _read(path)
    shape = tuple(int(s) for s in header.get("shape", ()))
    count = int(np.prod(shape))
    if len(payload) != count * _DTYPE.itemsize:
        raise TensorFileError(
            f"{path}: payload holds {len(payload)} bytes, shape {list(shape)} needs {count * 8}"
        )
    t = np.frombuffer(payload, dtype=_DTYPE).astype(np.float64).reshape(shape, order="F")
    if np.isnan(t).any():
        raise TensorFileError(f"{path}: NaN values are not allowed")
    n_last = shape[-1] if shape else 0
    for key in ("labels", "split"):
        if key in header and len(header[key]) != n_last:
            raise TensorFileError(f"{path}: {key} has {len(header[key])} entries, last axis has {n_last}")
    return t, header


load_tensor_file = read_tensor


def save_model(path, model: SupervisedModel) -> None:
    blocks = list(model.factors) + [model.projection]
    header = {
        "version": FORMAT_VERSION,
        "kind": "supervised-cpd",
        "shape": [int(f.shape[0]) for f in model.factors[:4]],
        "classes": [c.item() if isinstance(c, np.generic) else c for c in model.classes],
        "rank": int(model.rank),
        "factor_order": FACTOR_ORDER,
        "order": "column-major",
        "dtype": "f64le",
        "blocks": [list(b.shape) for b in blocks],
    }
    _write(path, header, blocks)


def load_model(path) -> SupervisedModel:
    header, payload = _read(path)
    if header.get("kind") != "supervised-cpd":
        raise TensorFileError(f"{path}: not a supervised model file")
    values = np.frombuffer(payload, dtype=_DTYPE)
    need = sum(r * c for r, c in header["blocks"])
    if values.size * 8 != len(payload) or values.size != need:
        raise TensorFileError(f"{path}: payload size does not match the declared blocks")
    out, pos = [], 0
    for rows, cols in header["blocks"]:
        block = values[pos : pos + rows * cols].astype(np.float64).reshape((rows, cols), order="F")
        block.setflags(write=False)
        out.append(block)
        pos += rows * cols
    return SupervisedModel(factors=tuple(out[:5]), classes=tuple(header["classes"]), projection=out[5])
