"""Versioned binary container for named arrays plus text metadata.

Layout (all integers little-endian):
    magic b"MMTC", u32 version,
    u32 meta length, meta utf-8 "key=value" lines,
    u32 entry count, then per entry:
    u16 name length, name utf-8, u8 dtype code, u8 ndim, ndim x u64 extents,
    raw array bytes (C order, little-endian).

Checkpoints store model weights, optimizer moments, and run provenance
(config text, seeds, step counter) in one file; dataset samples reuse the
same container for their arrays.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"MMTC"
VERSION = 1

_DTYPES = {0: "<f8", 1: "<f4", 2: "<i8", 3: "<c16", 4: "<u1"}
_CODES = {np.dtype(v): k for k, v in _DTYPES.items()}


def _encode_meta(meta: dict[str, str]) -> bytes:
    for k, v in meta.items():
        if "=" in k or "\n" in k or "\n" in str(v):
            raise DataError(f"metadata key/value must be single-line, got {k!r}")
    return "".join(f"{k}={v}\n" for k, v in meta.items()).encode("utf-8")


def _decode_meta(raw: bytes) -> dict[str, str]:
    meta = {}
    for line in raw.decode("utf-8").splitlines():
        if line:
            k, _, v = line.partition("=")
            meta[k] = v
    return meta


def save_tensors(path: str | Path, arrays: dict[str, np.ndarray],
                 meta: dict[str, str] | None = None) -> None:
    path = Path(path)
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    mb = _encode_meta(meta or {})
    chunks.append(struct.pack("<I", len(mb)))
    chunks.append(mb)
    chunks.append(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        key = np.dtype(arr.dtype.str.replace(">", "<"))
        if key not in _CODES:
            raise DataError(f"unsupported dtype {arr.dtype} for entry {name!r}")
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<BB", _CODES[key], arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b"")
        chunks.append(np.ascontiguousarray(arr, dtype=key).tobytes())
    path.write_bytes(b"".join(chunks))


def load_tensors(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read container {path}: {e}") from e
    if raw[:4] != MAGIC:
        raise DataError(f"{path} is not a tensor container (bad magic)")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != VERSION:
        raise DataError(f"{path}: unsupported container version {version}")
    off = 8
    (mlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    meta = _decode_meta(raw[off : off + mlen])
    off += mlen
    (count,) = struct.unpack_from("<I", raw, off)
    off += 4
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off : off + nlen].decode("utf-8")
        off += nlen
        code, ndim = struct.unpack_from("<BB", raw, off)
        off += 2
        shape = struct.unpack_from(f"<{ndim}Q", raw, off) if ndim else ()
        off += 8 * ndim
        dt = np.dtype(_DTYPES[code])
        n = int(np.prod(shape)) if shape else 1
        arrays[name] = np.frombuffer(
            raw, dtype=dt, count=n, offset=off
        ).reshape(shape).copy()
        off += n * dt.itemsize
    return arrays, meta
