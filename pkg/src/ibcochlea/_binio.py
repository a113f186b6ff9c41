"""Low-level helpers shared by the model, snapshot and checkpoint formats.

All formats are native-endian with an explicit marker word, so a file
written on one machine either reads back bit-exactly or is rejected.
"""

import struct

import numpy as np

ENDIAN_MARK = 0x01020304


class FormatError(ValueError):
    """Raised when a binary file does not match its declared layout."""


def write_magic(fh, magic: bytes, version: int):
    fh.write(magic)
    fh.write(struct.pack("=II", ENDIAN_MARK, version))


def read_magic(fh, magic: bytes, path="") -> int:
    got = fh.read(len(magic))
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    mark, version = struct.unpack("=II", _read_exact(fh, 8, path))
    if mark != ENDIAN_MARK:
        raise FormatError(f"{path}: endianness mismatch (marker 0x{mark:08x})")
    return version


def _read_exact(fh, n: int, path="") -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"{path}: truncated file (wanted {n} bytes, got {len(buf)})")
    return buf


def write_str(fh, s: str):
    b = s.encode("utf-8")
    fh.write(struct.pack("=H", len(b)))
    fh.write(b)


def read_str(fh, path="") -> str:
    (n,) = struct.unpack("=H", _read_exact(fh, 2, path))
    return _read_exact(fh, n, path).decode("utf-8")


def write_values(fh, fmt: str, *vals):
    fh.write(struct.pack("=" + fmt, *vals))


def read_values(fh, fmt: str, path=""):
    fmt = "=" + fmt
    return struct.unpack(fmt, _read_exact(fh, struct.calcsize(fmt), path))


def write_array(fh, arr: np.ndarray, dtype):
    np.ascontiguousarray(arr, dtype=dtype).tofile(fh)


def read_array(fh, dtype, shape, path="") -> np.ndarray:
    count = int(np.prod(shape)) if len(shape) else 1
    arr = np.fromfile(fh, dtype=dtype, count=count)
    if arr.size != count:
        raise FormatError(f"{path}: truncated array (wanted {count} items, got {arr.size})")
    return arr.reshape(shape)
