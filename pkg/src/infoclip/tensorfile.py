"""ICTF binary tensor files.

Layout (little-endian, no padding)::

    offset 0   4 bytes   magic b"ICTF"
    offset 4   u32       version (1)
    offset 8   u32       dtype tag: 1 = float32, 2 = float64
    offset 12  u32       rank
    offset 16  u64*rank  dims
    ...        payload   row-major values
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import FormatError, InputError

MAGIC = b"ICTF"
VERSION = 1
DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_TAGS = {"float32": 1, "float64": 2}


def atomic_write_bytes(path, data: bytes):
    """Write ``data`` to a temporary file next to ``path``, then rename it into place."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_tensor(array, dtype: str = "float64") -> bytes:
    if dtype not in _TAGS:
        raise InputError(f"unsupported dtype {dtype!r}")
    a = np.asarray(array, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise InputError("refusing to write non-finite values")
    tag = _TAGS[dtype]
    header = MAGIC + struct.pack("<III", VERSION, tag, a.ndim)
    header += struct.pack(f"<{a.ndim}Q", *a.shape)
    return header + np.ascontiguousarray(a, dtype=DTYPES[tag]).tobytes()


def decode_tensor(data: bytes) -> np.ndarray:
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("bad magic, expected b'ICTF'", offset=0)
    if len(data) < 16:
        raise FormatError("truncated header", offset=len(data))
    version, tag, rank = struct.unpack_from("<III", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    if tag not in DTYPES:
        raise FormatError(f"unsupported dtype tag {tag}", offset=8)
    dims_end = 16 + 8 * rank
    if len(data) < dims_end:
        raise FormatError(f"truncated dims for rank {rank}", offset=len(data))
    dims = struct.unpack_from(f"<{rank}Q", data, 16)
    dtype = DTYPES[tag]
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    expected = count * dtype.itemsize
    payload = len(data) - dims_end
    if payload < expected:
        raise FormatError(
            f"truncated payload: dims {tuple(dims)} need {expected} bytes, found {payload}",
            offset=len(data),
        )
    if payload > expected:
        raise FormatError(f"{payload - expected} trailing bytes after payload", offset=dims_end + expected)
    values = np.frombuffer(data, dtype=dtype, count=count, offset=dims_end)
    return values.reshape(dims).astype(dtype.newbyteorder("="))


def write_tensor(path, array, dtype: str = "float64"):
    atomic_write_bytes(path, encode_tensor(array, dtype))


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_tensor(fh.read())
