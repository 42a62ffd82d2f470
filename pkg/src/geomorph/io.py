"""Binary PGM (P5) and GMS1 raw container I/O."""

from __future__ import annotations

import os
import struct

import numpy as np

from .image import ElementType, Image, as_image

GMS1_MAGIC = b"GMS1"
_GMS1_HEADER = struct.Struct("<4sIIB")


class ImageFormatError(ValueError):
    pass


def _pgm_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """Read ``count`` whitespace-separated header integers after the magic.

    Returns the values and the offset of the payload, which starts after
    exactly one whitespace byte following the last token.
    """
    pos = 2
    values = []
    n = len(data)
    while len(values) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise ImageFormatError("malformed PGM header")
        values.append(int(data[start:pos]))
    if pos >= n or not data[pos:pos + 1].isspace():
        raise ImageFormatError("malformed PGM header")
    return values, pos + 1


def decode_pgm(data: bytes) -> Image:
    if data[:2] != b"P5":
        raise ImageFormatError(f"unsupported magic {data[:2]!r}")
    (width, height, maxval), offset = _pgm_tokens(data, 3)
    if width < 1 or height < 1:
        raise ImageFormatError(f"bad PGM dimensions {width}x{height}")
    if not 0 < maxval <= 65535:
        raise ImageFormatError(f"bad PGM maxval {maxval}")
    dtype = np.dtype(np.uint8) if maxval <= 255 else np.dtype(">u2")
    need = width * height * dtype.itemsize
    payload = data[offset:offset + need]
    if len(payload) < need:
        raise ImageFormatError(f"truncated PGM payload: {len(payload)} of {need} bytes")
    pixels = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return Image.from_array(pixels.astype(dtype.newbyteorder("=")))


def encode_pgm(f) -> bytes:
    f = as_image(f)
    if f.elem == ElementType.U8:
        maxval, payload = 255, f.to_array().tobytes()
    elif f.elem == ElementType.U16:
        maxval, payload = 65535, f.to_array().astype(">u2").tobytes()
    else:
        raise ImageFormatError(f"PGM stores U8/U16 only, not {f.elem.tag}")
    return b"P5\n%d %d\n%d\n" % (f.width, f.height, maxval) + payload


def load_pgm(path) -> Image:
    with open(path, "rb") as fh:
        return decode_pgm(fh.read())


def store_pgm(f, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(f))


def decode_raw(data: bytes) -> Image:
    if len(data) < _GMS1_HEADER.size:
        raise ImageFormatError("truncated GMS1 header")
    magic, width, height, code = _GMS1_HEADER.unpack_from(data)
    if magic != GMS1_MAGIC:
        raise ImageFormatError(f"bad magic {magic!r}")
    try:
        elem = ElementType.from_code(code)
    except ValueError as exc:
        raise ImageFormatError(str(exc)) from None
    if width < 1 or height < 1:
        raise ImageFormatError(f"bad dimensions {width}x{height}")
    payload = data[_GMS1_HEADER.size:]
    need = width * height * elem.size_bytes
    if len(payload) != need:
        raise ImageFormatError(f"size mismatch: header needs {need} bytes, found {len(payload)}")
    pixels = np.frombuffer(payload, dtype=elem.dtype.newbyteorder("<"))
    return Image.from_array(pixels.astype(elem.dtype).reshape(height, width))


def encode_raw(f) -> bytes:
    f = as_image(f)
    header = _GMS1_HEADER.pack(GMS1_MAGIC, f.width, f.height, f.elem.code)
    return header + f.to_array().astype(f.elem.dtype.newbyteorder("<")).tobytes()


def load_raw(path) -> Image:
    with open(path, "rb") as fh:
        return decode_raw(fh.read())


def store_raw(f, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_raw(f))


def load(path) -> Image:
    """Load by content: PGM when the file starts with ``P5``, else GMS1."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] == b"P5":
        return decode_pgm(data)
    if data[:4] == GMS1_MAGIC:
        return decode_raw(data)
    raise ImageFormatError(f"{os.fspath(path)}: neither PGM (P5) nor GMS1")


def format_of(path) -> str:
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head[:2] == b"P5":
        return "pgm"
    if head == GMS1_MAGIC:
        return "raw"
    raise ImageFormatError(f"{os.fspath(path)}: neither PGM (P5) nor GMS1")
