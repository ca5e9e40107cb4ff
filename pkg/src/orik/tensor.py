"""NHWC tensors: deterministic random generation and the ``OT1D`` binary format.

Tensors are plain ``numpy.ndarray`` objects of shape ``(N, H, W, C)`` with
dtype float32 or float64, C-contiguous so channels vary fastest.
"""
from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"OT1D"
VERSION = 1
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class InvalidShapeError(ValueError):
    pass


class TensorFormatError(ValueError):
    """Raised for a malformed tensor file; ``offset`` is the failing byte position."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class Rng:
    """SplitMix64 stream. Not thread-safe; use one instance per task."""

    def __init__(self, seed: int):
        self.state = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)

    def next_u64(self, n: int) -> np.ndarray:
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = self.state + steps * _GOLDEN
            self.state = self.state + np.uint64(n) * _GOLDEN
            return _mix(states)

    def uniform(self, n: int, dtype=np.float64) -> np.ndarray:
        """``n`` values uniform in [-1, 1).

        float64 uses the top 53 bits of each draw and float32 the top 24, so
        ``2u - 1`` is exact in the target dtype and never reaches 1.
        """
        z = self.next_u64(n)
        dtype = np.dtype(dtype)
        if dtype == np.float32:
            u = (z >> np.uint64(40)).astype(np.float32) * np.float32(2.0**-24)
            return u * np.float32(2) - np.float32(1)
        if dtype == np.float64:
            u = (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
            return u * 2.0 - 1.0
        raise ValueError(f"unsupported dtype {dtype}")


def _check_shape(shape):
    shape = tuple(int(d) for d in shape)
    if not shape or any(d < 1 for d in shape):
        raise InvalidShapeError(f"all dimensions must be >= 1, got {shape}")
    return shape


def tensor_random(shape, dtype=np.float32, seed: int = 0) -> np.ndarray:
    shape = _check_shape(shape)
    n = int(np.prod(shape))
    return Rng(seed).uniform(n, dtype).reshape(shape)


def tensor_write(t: np.ndarray, path) -> None:
    t = np.asarray(t)
    if t.dtype not in _DTYPE_CODES:
        raise TypeError(f"unsupported dtype {t.dtype}")
    _check_shape(t.shape)
    header = MAGIC + struct.pack("<HBB", VERSION, _DTYPE_CODES[t.dtype], t.ndim)
    header += struct.pack(f"<{t.ndim}Q", *t.shape)
    payload = np.ascontiguousarray(t).astype(t.dtype.newbyteorder("<"), copy=False)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def tensor_read(path) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 8:
        raise TensorFormatError("truncated header", len(buf))
    if buf[:4] != MAGIC:
        raise TensorFormatError(f"bad magic {buf[:4]!r}", 0)
    version, code, rank = struct.unpack_from("<HBB", buf, 4)
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}", 4)
    if code not in _CODE_DTYPES:
        raise TensorFormatError(f"unknown dtype code {code}", 6)
    dims_end = 8 + 8 * rank
    if len(buf) < dims_end:
        raise TensorFormatError("truncated dims", len(buf))
    shape = struct.unpack_from(f"<{rank}Q", buf, 8)
    if rank == 0 or any(d == 0 for d in shape):
        raise TensorFormatError(f"invalid shape {shape}", 8)
    dtype = _CODE_DTYPES[code]
    nbytes = int(np.prod(shape)) * dtype.itemsize
    if len(buf) - dims_end < nbytes:
        raise TensorFormatError(
            f"truncated payload: expected {nbytes} bytes, found {len(buf) - dims_end}",
            len(buf),
        )
    data = np.frombuffer(buf, dtype=dtype.newbyteorder("<"), count=int(np.prod(shape)), offset=dims_end)
    return data.astype(dtype).reshape(shape)


def default_threads() -> int:
    env = os.environ.get("ORIK_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1
