"""Serialization of spike samples and weight matrices.

Two sample containers:

* CSV: one row per neuron, one column per time bin (-K+1..T), plus a JSON
  sidecar at ``<path>.json`` holding {n_neurons, memory_cap, horizon,
  virtual_past}.
* Packed binary ("NGSP"): magic bytes b"NGSP", then a little-endian header
  u32 N, u32 K, u64 T, followed by one bit-packed row per neuron covering
  K+T bins, LSB-first within each byte, padded to a byte boundary per row.

Weight matrices and graphs travel as plain float / 0-1 CSV with no header.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import InputError
from .model import SpikeSample, WeightMatrix

__all__ = [
    "MAGIC",
    "write_sample_csv",
    "read_sample_csv",
    "write_sample_bin",
    "read_sample_bin",
    "write_sample",
    "read_sample",
    "write_matrix_csv",
    "read_matrix_csv",
]

MAGIC = b"NGSP"
_HEADER = struct.Struct("<IIQ")


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def write_sample_csv(sample: SpikeSample, path) -> None:
    path = Path(path)
    np.savetxt(path, sample.data, fmt="%d", delimiter=",")
    meta = {
        "n_neurons": sample.n_neurons,
        "memory_cap": sample.memory_cap,
        "horizon": sample.horizon,
        "virtual_past": sample.virtual_past,
    }
    _sidecar(path).write_text(json.dumps(meta, indent=2) + "\n")


def read_sample_csv(path) -> SpikeSample:
    path = Path(path)
    side = _sidecar(path)
    if not side.exists():
        raise InputError(f"missing JSON sidecar {side}")
    meta = json.loads(side.read_text())
    data = np.loadtxt(path, delimiter=",", dtype=np.uint8, ndmin=2)
    if data.shape != (meta["n_neurons"], meta["memory_cap"] + meta["horizon"]):
        raise InputError(
            f"CSV shape {data.shape} disagrees with sidecar metadata {meta}"
        )
    return SpikeSample(data, meta["memory_cap"], meta.get("virtual_past", False))


def write_sample_bin(sample: SpikeSample, path) -> None:
    n, k, t = sample.n_neurons, sample.memory_cap, sample.horizon
    chunks = [MAGIC, _HEADER.pack(n, k, t)]
    for row in sample.data:
        chunks.append(np.packbits(row, bitorder="little").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def read_sample_bin(path) -> SpikeSample:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise InputError(
            f"{path}: not a packed spike sample (expected magic {MAGIC!r})"
        )
    if len(raw) < 4 + _HEADER.size:
        raise InputError(f"{path}: truncated header")
    n, k, t = _HEADER.unpack_from(raw, 4)
    bins = k + t
    row_bytes = (bins + 7) // 8
    body = raw[4 + _HEADER.size :]
    if len(body) != n * row_bytes:
        raise InputError(
            f"{path}: expected {n * row_bytes} payload bytes, got {len(body)}"
        )
    packed = np.frombuffer(body, dtype=np.uint8).reshape(n, row_bytes)
    data = np.unpackbits(packed, axis=1, bitorder="little")[:, :bins]
    return SpikeSample(data, k)


def write_sample(sample: SpikeSample, path, fmt: str | None = None) -> None:
    """Write a sample as CSV or packed binary; format inferred from suffix."""
    fmt = fmt or ("csv" if str(path).endswith(".csv") else "bin")
    if fmt == "csv":
        write_sample_csv(sample, path)
    elif fmt == "bin":
        write_sample_bin(sample, path)
    else:
        raise InputError(f"unknown sample format {fmt!r} (use csv or bin)")


def read_sample(path) -> SpikeSample:
    """Read a sample in either container.

    Files ending in .bin are always treated as packed (so a corrupted
    header is reported as such); anything else is sniffed by magic.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC or path.suffix == ".bin":
        return read_sample_bin(path)
    return read_sample_csv(path)


def write_matrix_csv(matrix, path, fmt: str = "%.17g") -> None:
    arr = matrix.weights if isinstance(matrix, WeightMatrix) else np.asarray(matrix)
    np.savetxt(Path(path), arr, fmt=fmt, delimiter=",")


def read_matrix_csv(path) -> WeightMatrix:
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    try:
        arr = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise InputError(f"{path}: not a numeric CSV matrix ({exc})") from exc
    return WeightMatrix(arr)
