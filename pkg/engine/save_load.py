"""Binary persistence helpers shared by datasets, models and diag files.

Every artifact is little-endian. Writes are atomic (temp file + rename);
reads go through BinaryReader, which tracks the byte offset so format errors
can say exactly where a file went wrong.
"""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile
from typing import Any, Tuple

import numpy as np

from engine.exceptions import FormatError, TruncationError


def atomic_write_bytes(path: str, payload: bytes) -> None:
    """Write payload to path via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def read_bytes(path: str) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


class BinaryReader:
    """Sequential little-endian reader over an in-memory payload."""

    def __init__(self, payload: bytes, path: str | None = None) -> None:
        self.payload = payload
        self.offset = 0
        self.path = path

    @property
    def remaining(self) -> int:
        return len(self.payload) - self.offset

    def _take(self, n: int) -> bytes:
        if n > self.remaining:
            raise TruncationError(
                f"need {n} bytes, only {self.remaining} left", self.offset, self.path)
        chunk = self.payload[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def raw(self, n: int) -> bytes:
        return self._take(n)

    def expect_magic(self, magic: bytes) -> None:
        start = self.offset
        found = self._take(len(magic))
        if found != magic:
            raise FormatError(f"bad magic {found!r}, expected {magic!r}", start, self.path)

    def unpack(self, fmt: str) -> Tuple[Any, ...]:
        fmt = "<" + fmt
        return struct.unpack(fmt, self._take(struct.calcsize(fmt)))

    def array(self, dtype: str, count: int) -> np.ndarray:
        dt = np.dtype(dtype).newbyteorder("<")
        raw = self._take(dt.itemsize * count)
        return np.frombuffer(raw, dtype=dt, count=count).copy()

    def expect_end(self) -> None:
        if self.remaining:
            raise TruncationError(
                f"{self.remaining} trailing bytes after declared content",
                self.offset, self.path)


def pack(fmt: str, *values: Any) -> bytes:
    return struct.pack("<" + fmt, *values)


def pack_array(values: np.ndarray, dtype: str) -> bytes:
    return np.ascontiguousarray(values, dtype=np.dtype(dtype).newbyteorder("<")).tobytes()
