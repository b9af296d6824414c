"""Binary tensor files and CSV/JSON report emission.

File layout (all little-endian)::

    offset  size     field
    0       4        magic  b"IFSQ"
    4       2        version (uint16, currently 1)
    6       1        dtype code (uint8): 0 = float32, 1 = float64
    7       1        rank (uint8)
    8       8*rank   extents (uint64 each)
    ...              payload, row-major, prod(extents) * itemsize bytes

Nothing is allocated for the payload until the header has been validated
against the file size.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import struct
import sys
from pathlib import Path

import numpy as np

from .metrics import FeatureTensor

MAGIC = b"IFSQ"
VERSION = 1
DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_PREFIX = struct.Struct("<4sHBB")
_MAX_BYTES = (1 << 63) - 1


class TensorFormatError(ValueError):
    code = "corrupt"


class TruncatedHeaderError(TensorFormatError):
    code = "truncated_header"


class BadMagicError(TensorFormatError):
    code = "bad_magic"


class UnsupportedVersionError(TensorFormatError):
    code = "unsupported_version"


class UnsupportedDtypeError(TensorFormatError):
    code = "unsupported_dtype"


class SizeOverflowError(TensorFormatError):
    code = "size_overflow"


class LengthMismatchError(TensorFormatError):
    code = "length_mismatch"


def encode_array(values) -> bytes:
    arr = np.asarray(values)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("refusing to write non-finite values")
    if arr.ndim > 255:
        raise ValueError("rank must fit in a uint8")
    code = 0 if arr.dtype == np.float32 else 1
    header = _PREFIX.pack(MAGIC, VERSION, code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + np.ascontiguousarray(arr, dtype=DTYPES[code]).tobytes()


def decode_array(data: bytes) -> np.ndarray:
    """Parse a complete file image held in memory."""
    return _parse(io.BytesIO(data), len(data))


def _parse(fh, total: int) -> np.ndarray:
    prefix = fh.read(_PREFIX.size)
    if len(prefix) < 4:
        raise TruncatedHeaderError("file shorter than the magic number")
    if prefix[:4] != MAGIC:
        raise BadMagicError(f"bad magic {prefix[:4]!r}")
    if len(prefix) < _PREFIX.size:
        raise TruncatedHeaderError("file ends inside the header")
    _, version, code, rank = _PREFIX.unpack(prefix)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    if code not in DTYPES:
        raise UnsupportedDtypeError(f"unsupported dtype code {code}")
    raw = fh.read(8 * rank)
    if len(raw) < 8 * rank:
        raise TruncatedHeaderError("file ends inside the extents")
    dims = struct.unpack(f"<{rank}Q", raw)
    dtype = DTYPES[code]
    nbytes = math.prod(dims) * dtype.itemsize
    if nbytes > _MAX_BYTES:
        raise SizeOverflowError(f"extents {dims} overflow the addressable size")
    header_size = _PREFIX.size + 8 * rank
    if total - header_size != nbytes:
        raise LengthMismatchError(
            f"payload is {total - header_size} bytes, extents {dims} need {nbytes}"
        )
    payload = fh.read(nbytes)
    if len(payload) != nbytes:
        raise LengthMismatchError("payload ended early")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).astype(dtype.type)


def write_array(values, path) -> None:
    data = encode_array(values)
    Path(path).write_bytes(data)


def read_array(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return _parse(fh, os.fstat(fh.fileno()).st_size)


def write_tensor(t, path) -> None:
    """Write a :class:`FeatureTensor` (or any float array) to ``path``."""
    write_array(t.values if isinstance(t, FeatureTensor) else t, path)


def read_tensor(path, layer_id: int | None = None) -> FeatureTensor:
    arr = read_array(path)
    if arr.ndim != 2:
        raise TensorFormatError(f"expected a rank-2 tensor, got rank {arr.ndim}")
    return FeatureTensor(arr, layer_id)


def csv_to_tensor(csv_path, out_path, dtype: str = "float32") -> FeatureTensor:
    """Convert a headerless numeric CSV (one token per row) into a tensor file."""
    arr = np.loadtxt(csv_path, delimiter=",", dtype=np.dtype(dtype), ndmin=2)
    t = FeatureTensor(arr)
    write_tensor(t, out_path)
    return t


def format_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def format_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


SWEEP_HEADER = ("alpha", "ks", "rmse", "n", "seed")
SCHEME_HEADER = ("bin", "count", "prob", "center", "mse_contrib")
METRICS_HEADER = ("layer", "sts", "nts")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("usage: python -m ifsq.tensor_io INPUT.csv OUTPUT.ifsq", file=sys.stderr)
        return 1
    t = csv_to_tensor(argv[0], argv[1])
    print(f"wrote {t.tokens}x{t.dim} tensor to {argv[1]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
