"""Writers for the prioritizer's on-disk formats.

The exporter deliberately re-implements these (they are the component
boundary): manifest JSON, NNWB weight blobs, and TBIN tensor files, all
little-endian.  A TBIN reader is included so tests can round-trip files
without touching the consuming package.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

_NNWB_MAGIC = b"NNWB"
_TBIN_MAGIC = b"TBIN"
_VERSION = 1
DTYPE_F32 = 0
DTYPE_U32 = 1


class ExportError(Exception):
    """Anything that prevents a faithful export."""


def write_manifest(name: str, task: str, input_shape, layers: list[dict], path) -> None:
    doc = {
        "name": name,
        "task": task,
        "input_shape": [int(d) for d in input_shape],
        "layers": layers,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def write_weights(weights: dict[str, np.ndarray], path) -> None:
    """NNWB blob: header, name table, then raw float32 payloads.

    Table entries: u32 name_len, UTF-8 name, u8 dtype (0 = f32), u8 rank,
    u32 dims[rank], u64 byte offset relative to the payload section, u64
    byte length.
    """
    table = bytearray()
    payload = bytearray()
    offset = 0
    for name, arr in weights.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        if arr.ndim < 1:
            raise ExportError(f"weight {name!r} must have rank >= 1")
        raw = arr.tobytes()
        encoded = name.encode("utf-8")
        table += struct.pack("<I", len(encoded)) + encoded
        table += struct.pack("<BB", DTYPE_F32, arr.ndim)
        table += struct.pack(f"<{arr.ndim}I", *arr.shape)
        table += struct.pack("<QQ", offset, len(raw))
        payload += raw
        offset += len(raw)
    header = _NNWB_MAGIC + struct.pack("<II", _VERSION, len(weights))
    Path(path).write_bytes(header + bytes(table) + bytes(payload))


def write_tbin(arr: np.ndarray, path, dtype_code: int | None = None) -> None:
    arr = np.asarray(arr)
    if dtype_code is None:
        dtype_code = DTYPE_U32 if np.issubdtype(arr.dtype, np.integer) else DTYPE_F32
    wire = "<u4" if dtype_code == DTYPE_U32 else "<f4"
    if dtype_code == DTYPE_U32:
        if arr.min(initial=0) < 0:
            raise ExportError("u32 tensor files cannot hold negative values")
        if arr.size and int(arr.max()) > 0xFFFFFFFF:
            raise ExportError("value does not fit in u32")
    out = np.ascontiguousarray(arr).astype(wire)
    header = _TBIN_MAGIC + struct.pack("<IBB", _VERSION, dtype_code, out.ndim)
    header += struct.pack(f"<{out.ndim}I", *out.shape)
    Path(path).write_bytes(header + out.tobytes())


def read_tbin(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:4] != _TBIN_MAGIC:
        raise ExportError(f"{path}: bad magic")
    version, dtype, rank = struct.unpack_from("<IBB", blob, 4)
    if version != _VERSION:
        raise ExportError(f"{path}: unsupported version {version}")
    dims = struct.unpack_from(f"<{rank}I", blob, 10)
    wire = "<u4" if dtype == DTYPE_U32 else "<f4"
    start = 10 + 4 * rank
    count = int(np.prod(dims))
    got = len(blob) - start
    if got != 4 * count:
        raise ExportError(f"{path}: payload holds {got} bytes, expected {4 * count}")
    return np.frombuffer(blob, dtype=wire, count=count, offset=start).reshape(dims).copy()
