"""Pixel buffers, element types and pointwise arithmetic."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

# Rows are padded to this many bytes so a full 256-bit lane group can be
# loaded at any in-row offset without leaving the allocation.
ROW_ALIGN_BYTES = 64
LANE_BYTES = 32
LEAD = 1


@dataclass(frozen=True)
class _ElemInfo:
    code: int
    dtype: np.dtype


class ElementType(enum.Enum):
    U8 = _ElemInfo(0, np.dtype(np.uint8))
    U16 = _ElemInfo(1, np.dtype(np.uint16))
    F32 = _ElemInfo(2, np.dtype(np.float32))
    F64 = _ElemInfo(3, np.dtype(np.float64))

    @property
    def tag(self) -> str:
        return self.name

    @property
    def code(self) -> int:
        return self.value.code

    @property
    def dtype(self) -> np.dtype:
        return self.value.dtype

    @property
    def size_bytes(self) -> int:
        return self.dtype.itemsize

    @property
    def is_float(self) -> bool:
        return self.dtype.kind == "f"

    @property
    def neutral_min(self):
        """Identity of the ``min`` fold (greatest finite value)."""
        if self.is_float:
            return self.dtype.type(np.finfo(self.dtype).max)
        return self.dtype.type(np.iinfo(self.dtype).max)

    @property
    def neutral_max(self):
        """Identity of the ``max`` fold (least finite value)."""
        if self.is_float:
            return self.dtype.type(-np.finfo(self.dtype).max)
        return self.dtype.type(np.iinfo(self.dtype).min)

    @property
    def register_lanes(self) -> int:
        """Elements per 256-bit register."""
        return LANE_BYTES // self.size_bytes

    @classmethod
    def from_dtype(cls, dtype) -> "ElementType":
        dtype = np.dtype(dtype)
        for et in cls:
            if et.dtype == dtype:
                return et
        raise TypeError(f"unsupported element type {dtype}")

    @classmethod
    def from_code(cls, code: int) -> "ElementType":
        for et in cls:
            if et.code == code:
                return et
        raise ValueError(f"unknown element code {code}")

    @classmethod
    def parse(cls, name) -> "ElementType":
        if isinstance(name, ElementType):
            return name
        try:
            return cls[str(name).upper()]
        except KeyError:
            return cls.from_dtype(name)


def _stride_for(width: int, elem: ElementType) -> int:
    per_align = ROW_ALIGN_BYTES // elem.size_bytes
    needed = LEAD + width + elem.register_lanes
    return -(-needed // per_align) * per_align


class Image:
    """Row-major 2-D image with padded rows.

    Pixel ``(x, y)`` lives at ``buf[y, LEAD + x]``; ``stride`` is the padded
    row length in elements. ``data`` is a writable view of the pixels.
    """

    __slots__ = ("width", "height", "elem", "stride", "buf")

    def __init__(self, width: int, height: int, elem=ElementType.U8):
        width, height = int(width), int(height)
        if width < 1 or height < 1:
            raise ValueError(f"image dimensions must be >= 1, got {width}x{height}")
        self.elem = ElementType.parse(elem)
        self.width = width
        self.height = height
        self.stride = _stride_for(width, self.elem)
        self.buf = np.zeros((height, self.stride), dtype=self.elem.dtype)

    @classmethod
    def from_array(cls, array) -> "Image":
        a = np.asarray(array)
        if a.ndim == 1:
            a = a[np.newaxis, :]
        if a.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {a.shape}")
        img = cls(a.shape[1], a.shape[0], ElementType.from_dtype(a.dtype))
        img.data[...] = a
        return img

    @property
    def data(self) -> np.ndarray:
        return self.buf[:, LEAD:LEAD + self.width]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def dtype(self) -> np.dtype:
        return self.elem.dtype

    def to_array(self) -> np.ndarray:
        return np.ascontiguousarray(self.data)

    def copy(self) -> "Image":
        out = Image(self.width, self.height, self.elem)
        out.buf[...] = self.buf
        return out

    def like(self) -> "Image":
        return Image(self.width, self.height, self.elem)

    def fill_padding(self, value) -> None:
        self.buf[:, :LEAD] = value
        self.buf[:, LEAD + self.width:] = value

    def __array__(self, dtype=None, copy=None):
        a = self.to_array()
        return a if dtype is None else a.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return (self.shape == other.shape and self.elem == other.elem
                and np.array_equal(self.data, other.data))

    __hash__ = None

    def __repr__(self):
        return f"Image({self.width}x{self.height}, {self.elem.tag})"


def as_image(f) -> Image:
    return f if isinstance(f, Image) else Image.from_array(f)


def new_filled(width: int, height: int, elem, value) -> Image:
    elem = ElementType.parse(elem)
    img = Image(width, height, elem)
    if not elem.is_float:
        info = np.iinfo(elem.dtype)
        if value != int(value) or not info.min <= value <= info.max:
            raise ValueError(f"value {value!r} not representable as {elem.tag}")
    img.data[...] = elem.dtype.type(value)
    return img


def _check_pair(a: Image, b: Image) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.elem != b.elem:
        raise TypeError(f"element type mismatch: {a.elem.tag} vs {b.elem.tag}")


def pointwise(a, b, op: str) -> Image:
    """Per-pixel ``min``, ``max``, ``sub_saturating`` or ``sub``.

    ``sub_saturating`` clamps at zero for unsigned types and is exact
    subtraction for floats; ``sub`` wraps for unsigned types.
    """
    a, b = as_image(a), as_image(b)
    _check_pair(a, b)
    out = a.like()
    x, y = a.data, b.data
    if op == "min":
        np.minimum(x, y, out=out.data)
    elif op == "max":
        np.maximum(x, y, out=out.data)
    elif op == "sub":
        np.subtract(x, y, out=out.data)
    elif op == "sub_saturating":
        if a.elem.is_float:
            np.subtract(x, y, out=out.data)
        else:
            np.subtract(x, np.minimum(x, y), out=out.data)
    else:
        raise ValueError(f"unknown pointwise op {op!r}")
    return out


def sub_scalar_saturating(f, h) -> Image:
    """``f - h`` clamped at zero on unsigned types."""
    f = as_image(f)
    out = f.like()
    if f.elem.is_float:
        np.subtract(f.data, f.elem.dtype.type(h), out=out.data)
    else:
        h = f.elem.dtype.type(h)
        np.subtract(f.data, np.minimum(f.data, h), out=out.data)
    return out


def global_extreme(f, which: str):
    f = as_image(f)
    if which == "min":
        return f.data.min()
    if which == "max":
        return f.data.max()
    raise ValueError(f"which must be 'min' or 'max', got {which!r}")
