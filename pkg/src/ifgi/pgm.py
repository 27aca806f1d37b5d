"""Portable graymap (PGM) reading and writing, ASCII (P2) and binary (P5).

Format reference: http://netpbm.sourceforge.net/doc/pgm.html.  Binary
samples wider than one byte are big-endian.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np


class PgmError(ValueError):
    pass


def _tokens(buffer: bytes):
    """Yield (token, end_offset) for header tokens, skipping comments."""
    i, n = 0, len(buffer)
    while i < n:
        ch = buffer[i : i + 1]
        if ch == b"#":
            while i < n and buffer[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < n and not buffer[j : j + 1].isspace() and buffer[j : j + 1] != b"#":
                j += 1
            yield buffer[i:j], j
            i = j


def parse_pgm(buffer: bytes) -> tuple[np.ndarray, int]:
    """Decode a PGM byte string into ``(array[height, width], maxval)``."""
    tokens = _tokens(buffer)
    try:
        magic, _ = next(tokens)
        if magic not in (b"P2", b"P5"):
            raise PgmError(f"not a graymap (magic {magic!r})")
        width, height, maxval = [int(next(tokens)[0]) for _ in range(3)]
    except StopIteration:
        raise PgmError("truncated PGM header") from None
    except ValueError as exc:
        if isinstance(exc, PgmError):
            raise
        raise PgmError("malformed PGM header") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise PgmError(f"bad PGM dimensions {width}x{height} maxval {maxval}")

    count = width * height
    if magic == b"P2":
        try:
            values = [int(tok) for tok, _ in tokens]
        except ValueError:
            raise PgmError("non-integer sample in P2 body") from None
        if len(values) < count:
            raise PgmError(f"expected {count} samples, found {len(values)}")
        data = np.array(values[:count], dtype=np.int64)
    else:
        # exactly one whitespace byte separates maxval from the raster
        _, end = _maxval_end(buffer)
        dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
        body = buffer[end + 1 :]
        if len(body) < count * dtype.itemsize:
            raise PgmError("truncated P5 raster")
        data = np.frombuffer(body, dtype=dtype, count=count).astype(np.int64)
    if np.any(data > maxval) or np.any(data < 0):
        raise PgmError("sample exceeds maxval")
    return data.reshape(height, width), maxval


def _maxval_end(buffer):
    tokens = _tokens(buffer)
    for _ in range(3):
        next(tokens)
    return next(tokens)


def read_pgm(path) -> tuple[np.ndarray, int]:
    with open(path, "rb") as f:
        return parse_pgm(f.read())


def encode_pgm(data, maxval: int | None = None, binary: bool = True) -> bytes:
    data = np.asarray(data)
    if data.ndim != 2:
        raise PgmError("graymap data must be 2-D")
    if data.size and (data.min() < 0):
        raise PgmError("graymap samples must be non-negative")
    top = int(data.max()) if data.size else 0
    if maxval is None:
        maxval = 255 if top <= 255 else 65535
    if top > maxval or maxval > 65535:
        raise PgmError(f"sample {top} does not fit maxval {maxval}")
    height, width = data.shape
    header = f"P{5 if binary else 2}\n{width} {height}\n{maxval}\n".encode("ascii")
    if binary:
        dtype = "u1" if maxval < 256 else ">u2"
        return header + data.astype(dtype).tobytes()
    rows = "\n".join(" ".join(str(int(v)) for v in row) for row in data)
    return header + rows.encode("ascii") + b"\n"


def atomic_write(path, payload: bytes) -> None:
    """Write ``payload`` to ``path`` through a temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_pgm(path, data, maxval: int | None = None, binary: bool = True) -> None:
    atomic_write(path, encode_pgm(data, maxval=maxval, binary=binary))
