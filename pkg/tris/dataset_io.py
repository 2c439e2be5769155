"""Dataset file format (.xtrb).

Header: magic "XTRB1", u8 version, u32 n, u32 H, u32 W.
Record: H*W f32 image, u8 label, H*W u8 mask.
"""

from __future__ import annotations

from typing import List, Sequence

import numpy as np

from constants import IMAGE_SIZE
from engine.exceptions import FormatError, TruncationError
from engine.save_load import BinaryReader, atomic_write_bytes, pack, pack_array, read_bytes
from tris.scenarios import Sample

MAGIC = b"XTRB1"
FORMAT_VERSION = 1
HEADER_SIZE = len(MAGIC) + 1 + 4 + 4 + 4


def record_size(height: int = IMAGE_SIZE, width: int = IMAGE_SIZE) -> int:
    return height * width * 4 + 1 + height * width


def encode_dataset(samples: Sequence[Sample]) -> bytes:
    parts = [MAGIC, pack("BIII", FORMAT_VERSION, len(samples), IMAGE_SIZE, IMAGE_SIZE)]
    for s in samples:
        parts.append(pack_array(s.image.reshape(-1), "f4"))
        parts.append(pack("B", s.label))
        parts.append(pack_array(s.mask.reshape(-1), "u1"))
    return b"".join(parts)


def decode_dataset(payload: bytes, path: str | None = None) -> List[Sample]:
    reader = BinaryReader(payload, path)
    reader.expect_magic(MAGIC)
    version_offset = reader.offset
    (version,) = reader.unpack("B")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", version_offset, path)
    n, height, width = reader.unpack("III")
    expected = HEADER_SIZE + n * record_size(height, width)
    if len(payload) != expected:
        raise TruncationError(
            f"file is {len(payload)} bytes, header implies {expected}", len(payload), path)

    pixels = height * width
    samples: List[Sample] = []
    for _ in range(n):
        image = reader.array("f4", pixels).astype(np.float64).reshape(1, height, width)
        label_offset = reader.offset
        (label,) = reader.unpack("B")
        if label not in (0, 1):
            raise FormatError(f"label {label} not in {{0, 1}}", label_offset, path)
        mask = reader.array("u1", pixels).astype(bool)
        samples.append(Sample(image=image, label=int(label), mask=mask))
    reader.expect_end()
    return samples


def write_dataset(path: str, samples: Sequence[Sample]) -> None:
    atomic_write_bytes(path, encode_dataset(samples))


def read_dataset(path: str) -> List[Sample]:
    return decode_dataset(read_bytes(path), path)
