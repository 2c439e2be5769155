"""AgopDiagonal: mean squared input-gradient per pixel, with provenance.

File format (.diag): magic "AGOPD1", u8 version, u8 only_correct, u32 d,
u64 n_acc, u64 step, then d f64 values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from engine.exceptions import DegeneratePriorError, FormatError, ParameterError
from engine.save_load import BinaryReader, atomic_write_bytes, pack, pack_array, read_bytes

MAGIC = b"AGOPD1"
FORMAT_VERSION = 1


@dataclass
class AgopDiagonal:
    values: np.ndarray
    n_acc: int
    step: int
    only_correct: bool

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if np.any(self.values < 0):
            raise ParameterError("diag(M) values must be non-negative")

    @property
    def d(self) -> int:
        return int(self.values.size)

    def weights(self) -> np.ndarray:
        """sqrt(diag / max diag): 1 at the strongest pixel, in [0, 1] elsewhere."""
        peak = float(self.values.max()) if self.values.size else 0.0
        if peak <= 0.0:
            raise DegeneratePriorError("diag(M) is all zero; cannot normalise by its maximum")
        return np.sqrt(self.values / peak)

    def as_map(self, side: int) -> np.ndarray:
        if self.d != side * side:
            raise ParameterError(f"diag has {self.d} entries, cannot reshape to {side}x{side}")
        return self.values.reshape(side, side).copy()


def encode_diag(diag: AgopDiagonal) -> bytes:
    return b"".join([
        MAGIC,
        pack("BBIQQ", FORMAT_VERSION, int(diag.only_correct), diag.d, diag.n_acc, diag.step),
        pack_array(diag.values, "f8"),
    ])


def decode_diag(payload: bytes, path: str | None = None) -> AgopDiagonal:
    reader = BinaryReader(payload, path)
    reader.expect_magic(MAGIC)
    version_offset = reader.offset
    version, only_correct, d, n_acc, step = reader.unpack("BBIQQ")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", version_offset, path)
    values = reader.array("f8", d)
    reader.expect_end()
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise FormatError("diag values must be finite and non-negative", reader.offset, path)
    return AgopDiagonal(values=values, n_acc=int(n_acc), step=int(step),
                        only_correct=bool(only_correct))


def save_diag(path: str, diag: AgopDiagonal) -> None:
    atomic_write_bytes(path, encode_diag(diag))


def load_diag(path: str) -> AgopDiagonal:
    return decode_diag(read_bytes(path), path)
