import struct

import numpy as np
import pytest

from geomorph.image import Image
from geomorph.io import (ImageFormatError, decode_pgm, decode_raw, encode_pgm, encode_raw,
                         format_of, load, load_pgm, load_raw, store_pgm, store_raw)

from conftest import DTYPES, random_image


def test_pgm_minimal():
    img = decode_pgm(b"P5 2 2 255\n" + bytes([1, 2, 3, 4]))
    assert img.elem.tag == "U8"
    assert img.data.tolist() == [[1, 2], [3, 4]]


def test_pgm_comments_and_whitespace():
    img = decode_pgm(b"P5\n# made by hand\n3 1\n# max\n255\n" + bytes([7, 8, 9]))
    assert img.data.tolist() == [[7, 8, 9]]


def test_pgm_u8_round_trip(tmp_path, rng):
    a = random_image(rng, (17, 23), np.uint8)
    store_pgm(a, tmp_path / "a.pgm")
    assert np.array_equal(load_pgm(tmp_path / "a.pgm").data, a)


def test_pgm_u16_big_endian(tmp_path, rng):
    a = random_image(rng, (9, 11), np.uint16)
    raw = encode_pgm(a)
    header = b"P5\n11 9\n65535\n"
    assert raw.startswith(header)
    assert raw[len(header):] == a.astype(">u2").tobytes()
    assert np.array_equal(decode_pgm(raw).data, a)
    # independent reader
    Image_ = pytest.importorskip("PIL.Image")
    path = tmp_path / "a.pgm"
    path.write_bytes(raw)
    with Image_.open(path) as im:
        assert np.array_equal(np.asarray(im).astype(np.uint16), a)


def test_pgm_maxval_in_between():
    data = b"P5 2 1 1000\n" + np.array([3, 999], ">u2").tobytes()
    assert decode_pgm(data).data.tolist() == [[3, 999]]


@pytest.mark.parametrize("data", [
    b"P2 2 2 255\n\x00\x00\x00\x00",
    b"P5 2 x 255\n\x00\x00\x00\x00",
    b"P5 2 2 255\n\x00\x00\x00",
    b"P5 2 2 0\n\x00\x00\x00\x00",
    b"P5 2 2",
])
def test_pgm_errors(data):
    with pytest.raises(ImageFormatError):
        decode_pgm(data)


def test_pgm_rejects_float():
    with pytest.raises(ImageFormatError):
        encode_pgm(np.zeros((2, 2), np.float32))


def test_raw_single_f64():
    raw = encode_raw(np.array([[1.5]]))
    assert len(raw) == 13 + 8 == 21
    assert raw[:4] == b"GMS1"
    assert struct.unpack("<IIB", raw[4:13]) == (1, 1, 3)
    assert decode_raw(raw).data.tolist() == [[1.5]]


@pytest.mark.parametrize("dtype", DTYPES)
def test_raw_round_trip(tmp_path, rng, dtype):
    a = random_image(rng, (13, 7), dtype)
    store_raw(a, tmp_path / "a.gms")
    b = load_raw(tmp_path / "a.gms")
    assert b.dtype == a.dtype
    assert a.tobytes() == b.to_array().tobytes()


def test_raw_errors():
    good = encode_raw(np.zeros((2, 2), np.uint8))
    with pytest.raises(ImageFormatError):
        decode_raw(good[:-1])
    with pytest.raises(ImageFormatError):
        decode_raw(b"GMS2" + good[4:])
    with pytest.raises(ImageFormatError):
        decode_raw(good[:12] + bytes([9]) + good[13:])
    with pytest.raises(ImageFormatError):
        decode_raw(good[:5])
    three = struct.pack("<4sIIB", b"GMS1", 2, 2, 1) + np.zeros(3, "<u2").tobytes()
    with pytest.raises(ImageFormatError):
        decode_raw(three)


def test_load_sniffs_format(tmp_path):
    a = np.arange(6, dtype=np.uint8).reshape(2, 3)
    store_pgm(a, tmp_path / "x")
    store_raw(a, tmp_path / "y")
    assert format_of(tmp_path / "x") == "pgm" and format_of(tmp_path / "y") == "raw"
    assert load(tmp_path / "x") == load(tmp_path / "y") == Image.from_array(a)
    (tmp_path / "z").write_bytes(b"JUNK")
    with pytest.raises(ImageFormatError):
        load(tmp_path / "z")
