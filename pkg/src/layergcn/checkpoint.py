"""Byte-stable checkpoint files: one JSON header line, then raw little-endian floats."""

from __future__ import annotations

import json

import numpy as np

from .errors import DataError

MAGIC = "layergcn-checkpoint/1"
REQUIRED = ("n_users", "n_items", "dim", "dtype")


def save_checkpoint(path, x0: np.ndarray, header: dict) -> None:
    """Write ``x0`` with ``header``; shape and dtype fields are filled in here."""
    x0 = np.ascontiguousarray(x0)
    meta = dict(header, magic=MAGIC, dim=int(x0.shape[1]), dtype=x0.dtype.name)
    if meta.get("n_users", 0) + meta.get("n_items", 0) != x0.shape[0]:
        raise ValueError(f"header n_users + n_items does not match {x0.shape[0]} embedding rows")
    with open(path, "wb") as fh:
        fh.write(json.dumps(meta, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(x0.astype(x0.dtype.newbyteorder("<"), copy=False).tobytes())


def load_checkpoint(path):
    """Return ``(x0, header)``."""
    with open(path, "rb") as fh:
        first = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(first)
    except ValueError as exc:
        raise DataError(f"{path}: not a checkpoint (bad header)") from exc
    if header.get("magic") != MAGIC:
        raise DataError(f"{path}: not a checkpoint (magic {header.get('magic')!r})")
    missing = [key for key in REQUIRED if key not in header]
    if missing:
        raise DataError(f"{path}: checkpoint header lacks {', '.join(missing)}")
    dtype = np.dtype(header["dtype"]).newbyteorder("<")
    rows = header["n_users"] + header["n_items"]
    expected = rows * header["dim"] * dtype.itemsize
    if len(payload) != expected:
        raise DataError(f"{path}: payload has {len(payload)} bytes, header implies {expected}")
    x0 = np.frombuffer(payload, dtype=dtype).reshape(rows, header["dim"])
    return x0.astype(header["dtype"]), header
