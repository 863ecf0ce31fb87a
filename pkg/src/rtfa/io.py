"""Tensor-series and matrix file formats.

Series, text encoding::

    TSR 1 text
    K p_1 ... p_K T
    <p values>          (T lines, slice entries in storage order, %.17g)

Series, binary encoding: magic ``TSRB``, version byte 1, u32 K, K u32 dims,
u64 T, then T*p little-endian f64 in the same order.

Matrix, text::

    MTX 1
    rows cols
    <cols values>       (rows lines)
"""

from __future__ import annotations

import math
import struct

import numpy as np

_MAGIC = b"TSRB"
_VERSION = 1
_U32_MAX = 2**32 - 1
_U64_MAX = 2**64 - 1


class FileFormatError(Exception):
    """Malformed or truncated tensor-series / matrix file."""


def _storage_flat(series: np.ndarray) -> np.ndarray:
    # slice-major, mode-1-major within each slice == F-order of (dims..., T)
    return np.moveaxis(series, 0, -1).ravel(order="F")


def _from_storage_flat(data: np.ndarray, dims: tuple[int, ...], t_len: int) -> np.ndarray:
    shaped = data.reshape((*dims, t_len), order="F")
    return np.ascontiguousarray(np.moveaxis(shaped, -1, 0))


def write_series(series: np.ndarray, path, encoding: str = "binary") -> None:
    """Write a (T, p_1..p_K) series in the text or binary format."""
    series = np.asarray(series, dtype=float)
    if series.ndim < 2:
        raise ValueError("series must have a time axis plus at least one mode")
    t_len, dims = series.shape[0], series.shape[1:]
    if len(dims) > _U32_MAX or any(d > _U32_MAX for d in dims) or t_len > _U64_MAX:
        raise FileFormatError("dimension overflow for the series format")
    flat = _storage_flat(series)
    if encoding == "text":
        p = math.prod(dims)
        with open(path, "w") as fh:
            fh.write("TSR 1 text\n")
            fh.write(" ".join(str(v) for v in (len(dims), *dims, t_len)) + "\n")
            for t in range(t_len):
                chunk = flat[t * p:(t + 1) * p]
                fh.write(" ".join(f"{v:.17g}" for v in chunk) + "\n")
    elif encoding == "binary":
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<B", _VERSION))
            fh.write(struct.pack("<I", len(dims)))
            fh.write(struct.pack(f"<{len(dims)}I", *dims))
            fh.write(struct.pack("<Q", t_len))
            fh.write(flat.astype("<f8").tobytes())
    else:
        raise ValueError(f"unknown encoding {encoding!r}")


def _read_text_series(path) -> np.ndarray:
    with open(path, "r") as fh:
        header = fh.readline().split()
        if header != ["TSR", "1", "text"]:
            raise FileFormatError("bad text series header")
        try:
            nums = [int(v) for v in fh.readline().split()]
        except ValueError as exc:
            raise FileFormatError("bad dimension line") from exc
        if len(nums) < 3:
            raise FileFormatError("bad dimension line")
        k = nums[0]
        if k < 1 or len(nums) != k + 2:
            raise FileFormatError("dimension count mismatch")
        dims = tuple(nums[1:-1])
        t_len = nums[-1]
        if any(d < 1 for d in dims) or t_len < 1:
            raise FileFormatError("dimensions must be positive")
        try:
            data = np.array([float(v) for v in fh.read().split()])
        except ValueError as exc:
            raise FileFormatError("non-numeric payload") from exc
    expected = t_len * math.prod(dims)
    if data.size != expected:
        raise FileFormatError(f"truncated payload: expected {expected} values, found {data.size}")
    return _from_storage_flat(data, dims, t_len)


def _read_binary_series(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise FileFormatError("bad magic bytes")
    if len(blob) < 5 or blob[4] != _VERSION:
        raise FileFormatError("unsupported version")
    off = 5
    if len(blob) < off + 4:
        raise FileFormatError("truncated header")
    (k,) = struct.unpack_from("<I", blob, off)
    off += 4
    if k < 1:
        raise FileFormatError("dimension count must be >= 1")
    if len(blob) < off + 4 * k + 8:
        raise FileFormatError("truncated header")
    dims = struct.unpack_from(f"<{k}I", blob, off)
    off += 4 * k
    (t_len,) = struct.unpack_from("<Q", blob, off)
    off += 8
    if any(d < 1 for d in dims) or t_len < 1:
        raise FileFormatError("dimensions must be positive")
    expected = t_len * math.prod(dims)
    payload = blob[off:]
    if len(payload) != 8 * expected:
        raise FileFormatError(
            f"truncated payload: expected {8 * expected} bytes, found {len(payload)}"
        )
    data = np.frombuffer(payload, dtype="<f8").astype(float)
    return _from_storage_flat(data, dims, t_len)


def read_series(path) -> np.ndarray:
    """Read a series file, auto-detecting the encoding from the header."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == _MAGIC:
        return _read_binary_series(path)
    if head[:3] == b"TSR":
        return _read_text_series(path)
    raise FileFormatError("not a tensor series file")


def write_matrix(a: np.ndarray, path) -> None:
    """Write a matrix in the 2-line-header text format."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("expected a matrix")
    with open(path, "w") as fh:
        fh.write("MTX 1\n")
        fh.write(f"{a.shape[0]} {a.shape[1]}\n")
        for row in a:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_matrix(path) -> np.ndarray:
    with open(path, "r") as fh:
        if fh.readline().split() != ["MTX", "1"]:
            raise FileFormatError("bad matrix header")
        try:
            rows, cols = (int(v) for v in fh.readline().split())
        except ValueError as exc:
            raise FileFormatError("bad matrix shape line") from exc
        if rows < 1 or cols < 1:
            raise FileFormatError("matrix shape must be positive")
        try:
            data = np.array([float(v) for v in fh.read().split()])
        except ValueError as exc:
            raise FileFormatError("non-numeric payload") from exc
    if data.size != rows * cols:
        raise FileFormatError(f"truncated payload: expected {rows * cols} values, found {data.size}")
    return data.reshape(rows, cols)
