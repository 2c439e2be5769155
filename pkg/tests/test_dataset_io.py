import os

import numpy as np
import pytest

from engine.exceptions import FormatError, TruncationError
from engine.save_load import BinaryReader, atomic_write_bytes, read_bytes, sha256_file
from tris.dataset_io import (
    HEADER_SIZE, MAGIC, decode_dataset, encode_dataset, read_dataset, record_size, write_dataset,
)
from tris.scenarios import ScenarioSpec, generate_dataset


@pytest.fixture
def samples():
    return generate_dataset(ScenarioSpec("transrot", "correlated", n=10, seed=21))


def test_round_trip_is_exact(samples, tmp_path):
    path = str(tmp_path / "d.xtrb")
    write_dataset(path, samples)
    loaded = read_dataset(path)
    assert len(loaded) == len(samples)
    for a, b in zip(samples, loaded):
        np.testing.assert_array_equal(a.image, b.image)
        assert a.label == b.label
        np.testing.assert_array_equal(a.mask, b.mask)


def test_file_length_matches_header(samples, tmp_path):
    path = str(tmp_path / "d.xtrb")
    write_dataset(path, samples)
    assert HEADER_SIZE == 18
    assert record_size() == 321
    assert os.path.getsize(path) == 18 + 10 * 321


def test_bad_magic_is_rejected(samples):
    payload = bytearray(encode_dataset(samples))
    payload[0:5] = b"NOPE!"
    with pytest.raises(FormatError) as info:
        decode_dataset(bytes(payload))
    assert info.value.offset == 0


def test_unsupported_version(samples):
    payload = bytearray(encode_dataset(samples))
    payload[len(MAGIC)] = 9
    with pytest.raises(FormatError) as info:
        decode_dataset(bytes(payload))
    assert info.value.offset == len(MAGIC)


def test_truncated_file(samples):
    payload = encode_dataset(samples)
    with pytest.raises(TruncationError):
        decode_dataset(payload[:-1])


def test_trailing_bytes(samples):
    with pytest.raises(TruncationError):
        decode_dataset(encode_dataset(samples) + b"\x00")


def test_bad_label_reports_offset(samples):
    payload = bytearray(encode_dataset(samples))
    label_offset = HEADER_SIZE + 64 * 4
    payload[label_offset] = 7
    with pytest.raises(FormatError) as info:
        decode_dataset(bytes(payload))
    assert info.value.offset == label_offset


def test_atomic_write_leaves_no_temp_files(tmp_path):
    path = str(tmp_path / "sub" / "blob.bin")
    atomic_write_bytes(path, b"abc")
    atomic_write_bytes(path, b"abcd")
    assert read_bytes(path) == b"abcd"
    assert os.listdir(tmp_path / "sub") == ["blob.bin"]


def test_sha256_of_known_content(tmp_path):
    path = str(tmp_path / "x")
    atomic_write_bytes(path, b"abc")
    assert sha256_file(path) == (
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")


def test_reader_reports_short_reads():
    reader = BinaryReader(b"\x01\x02", path="p")
    with pytest.raises(TruncationError) as info:
        reader.unpack("I")
    assert info.value.offset == 0
    assert "p:" in str(info.value)
