"""Streaming, in-place 3x3 kernels.

Every stage makes one top-to-bottom pass over an image and overwrites it
in place. Two row caches hold the horizontal pass of the previous two input
rows; the horizontal pass of the next row is computed on the fly, so the
only auxiliary storage is ``2 * width`` elements.

Rows are consumed under a gate: before producing output row ``y`` a stage
waits until its predecessor has published ``min(y + 2, height)`` rows, and
after writing row ``y`` it publishes ``y + 1`` with release ordering.

Pixels outside the image never take part in a fold, which is the same as
reading the fold's neutral element there.
"""

from __future__ import annotations

import enum
import functools

import numpy as np
from numba import njit

from ._atomics import no_vectorize, publish, wait_for
from .image import LEAD, ElementType, Image, as_image

LANE_CHOICES = (1, 2, 4, 8, 16, 32)
WIDEST_LANES = 32

# stage modes
PLAIN = 0
GEODESIC = 1
CONVERGENT = 2
QDT = 3
ETA = 4

ABORTED = -1


class KernelKind(enum.Enum):
    ERODE3X3 = (False, PLAIN)
    DILATE3X3 = (True, PLAIN)
    GEODESIC_ERODE = (False, GEODESIC)
    GEODESIC_DILATE = (True, GEODESIC)
    GEODESIC_ERODE_CONVERGENT = (False, CONVERGENT)
    GEODESIC_DILATE_CONVERGENT = (True, CONVERGENT)
    QDT_ERODE_STEP = (False, QDT)
    ETA_STEP = (False, ETA)

    @property
    def is_max(self) -> bool:
        return self.value[0]

    @property
    def mode(self) -> int:
        return self.value[1]

    @property
    def needs_mask(self) -> bool:
        return self.mode in (GEODESIC, CONVERGENT)

    @property
    def convergent(self) -> bool:
        return self.mode in (CONVERGENT, ETA)

    def neutral(self, elem: ElementType):
        return elem.neutral_max if self.is_max else elem.neutral_min


class LaneConfig:
    """Number of elements processed per step."""

    __slots__ = ("lanes",)

    def __init__(self, lanes: int):
        if lanes not in LANE_CHOICES:
            raise ValueError(f"lanes must be one of {LANE_CHOICES}, got {lanes}")
        self.lanes = lanes

    @classmethod
    def widest(cls, elem=None) -> "LaneConfig":
        # a 32-element group fills one 256-bit register for U8 and spans
        # several for wider types; narrower groups are not widened by LLVM
        return cls(WIDEST_LANES)

    @classmethod
    def resolve(cls, lanes, elem) -> "LaneConfig":
        if lanes is None:
            return cls.widest(elem)
        if isinstance(lanes, LaneConfig):
            return lanes
        return cls(int(lanes))

    def __eq__(self, other):
        return isinstance(other, LaneConfig) and other.lanes == self.lanes

    def __hash__(self):
        return hash(self.lanes)

    def __repr__(self):
        return f"LaneConfig({self.lanes})"


class QdtState:
    """Largest residual seen so far and the stage that produced it."""

    def __init__(self, width: int, height: int, elem):
        self.r = Image(width, height, elem)
        self.d = Image(width, height, ElementType.U16)

    @classmethod
    def for_image(cls, f: Image) -> "QdtState":
        return cls(f.width, f.height, f.elem)


class RowCache:
    """The two row buffers of a streaming stage. Owned by a single worker
    and reused across its stages."""

    def __init__(self):
        self.c1 = self.c2 = None

    def ensure(self, width: int, dtype) -> None:
        dtype = np.dtype(dtype)
        if self.c1 is None or self.c1.shape[0] != width or self.c1.dtype != dtype:
            self.c1 = np.empty(width, dtype)
            self.c2 = np.empty(width, dtype)

    @property
    def elements(self) -> int:
        """Elements held in the two row buffers (``2 * width``)."""
        return 0 if self.c1 is None else self.c1.shape[0] + self.c2.shape[0]

    @property
    def nbytes(self) -> int:
        return 0 if self.c1 is None else self.c1.nbytes + self.c2.nbytes


@njit(inline="always")
def _fold(a, b, is_max):
    if is_max:
        return a if a > b else b
    return a if a < b else b


@njit(inline="always")
def _hx_at(row, x, X, is_max):
    """Horizontal 3-tap fold at column ``x`` of a padded row, clipped.

    Out-of-row neighbours are replaced by the centre pixel, which leaves
    the fold unchanged and avoids data-dependent branches."""
    lo = x - 1 if x > 0 else x
    hi = x + 1 if x + 1 < X else x
    return _fold(_fold(row[LEAD + lo], row[LEAD + x], is_max), row[LEAD + hi], is_max)


@njit(inline="always")
def _update(mode, is_max, out, mrow, rrow, drow, xb, a, jd):
    """Write the elementary result ``a`` for buffer index ``xb`` of the
    output row according to the stage mode; returns whether the pixel
    changed (always False for plain and geodesic stages)."""
    if mode == PLAIN:
        out[xb] = a
        return False
    if mode == GEODESIC:
        out[xb] = _fold(a, mrow[xb], not is_max)
        return False
    old = out[xb]
    if mode == CONVERGENT:
        v = _fold(a, mrow[xb], not is_max)
        if v != old:
            out[xb] = v
            return True
        return False
    if mode == QDT:
        out[xb] = a
        res = old - a
        if res > rrow[xb]:
            rrow[xb] = res
            drow[xb] = jd
        return old != a
    # ETA
    if old - a > 1:
        out[xb] = a + 1
        return True
    return False


@functools.lru_cache(maxsize=None)
def _stage_kernel(is_max: bool, mode: int, lanes: int):
    # Only plain constants are captured so the compiled kernels can be
    # cached on disk.
    scalar = lanes == 1

    @njit(nogil=True, cache=True)
    def stage(f, m, r, d, c1, c2, pred, own, abort, log, j, X, Y, neutral):
        logging = log.shape[0] > 0
        jd = np.uint16(j)
        Lu = np.uintp(lanes)
        one = np.uintp(1)
        two = np.uintp(2)
        zero = np.uintp(0)
        # row 0 is consumed eagerly to seed the cache
        if wait_for(pred, 1, abort) < 0:
            return ABORTED
        row0 = f[0]
        for x in range(X):
            c2[x] = _hx_at(row0, x, X, is_max)
            c1[x] = neutral
        # interior columns [1, body_end) go in whole lane groups
        body_end = np.uintp(1 + ((X - 2) // lanes) * lanes if X > 2 else 1)
        last_end = np.uintp(X - X % lanes)
        changed = False
        for y in range(Y):
            seen = wait_for(pred, min(y + 2, Y), abort)
            if seen < 0:
                return ABORTED
            if logging:
                log[y] = seen
            out = f[y]
            mrow = m[y]
            rrow = r[y]
            drow = d[y] if d.shape[0] > 1 else d[0]
            yn = y + 1
            if yn < Y:
                nxt = f[yn]
                cv = _hx_at(nxt, 0, X, is_max)
                a = _fold(_fold(c1[0], c2[0], is_max), cv, is_max)
                c1[0] = cv
                changed |= _update(mode, is_max, out, mrow, rrow, drow, LEAD, a, jd)
                for x0 in range(one, body_end, Lu):
                    if scalar:
                        no_vectorize()
                    for k in range(Lu):
                        # column x sits at buffer index x + 1
                        x = x0 + k
                        cv = _fold(_fold(nxt[x], nxt[x + one], is_max), nxt[x + two], is_max)
                        a = _fold(_fold(c1[x], c2[x], is_max), cv, is_max)
                        c1[x] = cv
                        changed |= _update(mode, is_max, out, mrow, rrow, drow, x + one, a, jd)
                for x in range(body_end, X):
                    cv = _hx_at(nxt, x, X, is_max)
                    a = _fold(_fold(c1[x], c2[x], is_max), cv, is_max)
                    c1[x] = cv
                    changed |= _update(mode, is_max, out, mrow, rrow, drow, x + LEAD, a, jd)
            else:
                # last row: nothing below
                for x0 in range(zero, last_end, Lu):
                    if scalar:
                        no_vectorize()
                    for k in range(Lu):
                        x = x0 + k
                        a = _fold(c1[x], c2[x], is_max)
                        changed |= _update(mode, is_max, out, mrow, rrow, drow, x + one, a, jd)
                for x in range(last_end, X):
                    a = _fold(c1[x], c2[x], is_max)
                    changed |= _update(mode, is_max, out, mrow, rrow, drow, x + LEAD, a, jd)
            c1, c2 = c2, c1
            publish(own, yn)
        return 1 if changed else 0

    return stage


_NO_D = np.zeros((1, 1), np.uint16)
_NO_LOG = np.zeros(0, np.int64)


def full_counter(height: int) -> np.ndarray:
    """A predecessor counter that never blocks."""
    return np.full(1, height, np.int64)


def run_stage(kind: KernelKind, f: Image, *, mask: Image | None = None,
              qdt: QdtState | None = None, j: int = 1, lanes=None,
              pred: np.ndarray | None = None, own: np.ndarray | None = None,
              cache: RowCache | None = None, abort: np.ndarray | None = None,
              log: np.ndarray | None = None) -> int:
    """Run one streaming stage over ``f`` in place.

    Returns 1 if any pixel changed, 0 otherwise, or ``ABORTED``. The change
    flag is only tracked for convergent and QDT kinds; other kinds report 0.
    """
    lanes = LaneConfig.resolve(lanes, f.elem).lanes
    if kind.needs_mask:
        if mask is None:
            raise ValueError(f"{kind.name} needs a mask image")
        if mask.shape != f.shape or mask.elem != f.elem:
            raise ValueError("mask must match the marker's shape and element type")
        m = mask.buf
    else:
        m = f.buf
    if kind.mode == QDT:
        if qdt is None:
            raise ValueError("QDT_ERODE_STEP needs a QdtState")
        if qdt.r.shape != f.shape or qdt.r.elem != f.elem:
            raise ValueError("QdtState does not match the image")
        if not 1 <= j <= np.iinfo(np.uint16).max:
            raise ValueError(f"stage index {j} does not fit the distance image")
        r, d = qdt.r.buf, qdt.d.buf
    else:
        r, d = f.buf, _NO_D
    if cache is None:
        cache = RowCache()
    cache.ensure(f.width, f.dtype)
    if pred is None:
        pred = full_counter(f.height)
    if own is None:
        own = np.zeros(1, np.int64)
    if abort is None:
        abort = np.zeros(1, np.int64)
    if log is None:
        log = _NO_LOG
    kern = _stage_kernel(kind.is_max, kind.mode, lanes)
    return kern(f.buf, m, r, d, cache.c1, cache.c2, pred, own, abort,
                log, int(j), f.width, f.height, kind.neutral(f.elem))


def stream_erode3x3(f, lanes=None, gate=None, counter=None, **kw) -> Image:
    f = as_image(f)
    run_stage(KernelKind.ERODE3X3, f, lanes=lanes, pred=gate, own=counter, **kw)
    return f


def stream_dilate3x3(f, lanes=None, gate=None, counter=None, **kw) -> Image:
    f = as_image(f)
    run_stage(KernelKind.DILATE3X3, f, lanes=lanes, pred=gate, own=counter, **kw)
    return f


def stream_geodesic_erode(f, m, lanes=None, gate=None, counter=None, **kw) -> Image:
    f = as_image(f)
    run_stage(KernelKind.GEODESIC_ERODE, f, mask=as_image(m), lanes=lanes,
              pred=gate, own=counter, **kw)
    return f


def stream_geodesic_dilate(f, m, lanes=None, gate=None, counter=None, **kw) -> Image:
    f = as_image(f)
    run_stage(KernelKind.GEODESIC_DILATE, f, mask=as_image(m), lanes=lanes,
              pred=gate, own=counter, **kw)
    return f


def stream_geodesic_erode_convergent(f: Image, m, lanes=None, gate=None,
                                     counter=None, **kw) -> bool:
    """Geodesic erosion in place; True iff no pixel changed."""
    return run_stage(KernelKind.GEODESIC_ERODE_CONVERGENT, f, mask=as_image(m),
                     lanes=lanes, pred=gate, own=counter, **kw) == 0


def stream_geodesic_dilate_convergent(f: Image, m, lanes=None, gate=None,
                                      counter=None, **kw) -> bool:
    return run_stage(KernelKind.GEODESIC_DILATE_CONVERGENT, f, mask=as_image(m),
                     lanes=lanes, pred=gate, own=counter, **kw) == 0


def qdt_erode_step(f: Image, qdt: QdtState, j: int, lanes=None, gate=None,
                   counter=None, **kw) -> bool:
    """Erode ``f`` in place and record residuals larger than any seen so
    far, tagged with ``j``. True iff ``f`` did not change (it is flat)."""
    return run_stage(KernelKind.QDT_ERODE_STEP, f, qdt=qdt, j=j, lanes=lanes,
                     pred=gate, own=counter, **kw) == 0


def eta_step(f: Image, lanes=None, gate=None, counter=None, **kw) -> bool:
    """Lower every pixel exceeding its neighbourhood minimum by more than
    one to that minimum plus one. True iff nothing changed."""
    return run_stage(KernelKind.ETA_STEP, f, lanes=lanes, pred=gate,
                     own=counter, **kw) == 0


# --- building blocks kept for testing the decomposition in isolation ---

@functools.lru_cache(maxsize=None)
def _row_kernels(is_max: bool, lanes: int):
    L = lanes
    o = LEAD

    @njit(nogil=True, cache=True)
    def load(f, y, x, X, neutral, out):
        for k in range(L):
            xx = x + k
            out[k] = f[y, o + xx] if 0 <= xx < X else neutral

    @njit(nogil=True, cache=True)
    def horizontal(f, y, x, X, neutral):
        a = np.empty(L, f.dtype)
        b = np.empty(L, f.dtype)
        c = np.empty(L, f.dtype)
        load(f, y, x - 1, X, neutral, a)
        load(f, y, x, X, neutral, b)
        load(f, y, x + 1, X, neutral, c)
        for k in range(L):
            b[k] = _fold(_fold(a[k], b[k], is_max), c[k], is_max)
        return b

    @njit(nogil=True, cache=True)
    def row_inplace(f, y, X, neutral):
        a = np.empty(L, f.dtype)
        b = np.empty(L, f.dtype)
        c = np.empty(L, f.dtype)
        # preload the register that carries the overlap value
        load(f, y, -1, X, neutral, a)
        for x in range(0, X, L):
            load(f, y, x, X, neutral, b)
            load(f, y, x + 1, X, neutral, c)
            for k in range(L):
                b[k] = _fold(_fold(a[k], b[k], is_max), c[k], is_max)
            load(f, y, x + L - 1, X, neutral, a)
            for k in range(L):
                if x + k < X:
                    f[y, o + x + k] = b[k]

    @njit(nogil=True, cache=True)
    def vertical_inplace(f, X, Y, neutral):
        c = np.empty(X, f.dtype)
        c[:] = neutral
        for y in range(Y):
            for x0 in range(0, X, L):
                for k in range(min(L, X - x0)):
                    x = x0 + k
                    below = f[y + 1, o + x] if y + 1 < Y else neutral
                    cur = f[y, o + x]
                    f[y, o + x] = _fold(_fold(c[x], cur, is_max), below, is_max)
                    c[x] = cur

    return horizontal, row_inplace, vertical_inplace


def _fold_is_max(fold: str) -> bool:
    if fold not in ("min", "max"):
        raise ValueError(f"fold must be 'min' or 'max', got {fold!r}")
    return fold == "max"


def horizontal_pass_stride(f: Image, idx: int, lanes, fold: str = "min") -> np.ndarray:
    """Horizontal 3-tap fold of the lane group starting at linear offset
    ``idx`` (``y * stride + x``). Slots past the row end read as neutral."""
    is_max = _fold_is_max(fold)
    L = LaneConfig.resolve(lanes, f.elem).lanes
    y, x = divmod(int(idx), f.stride)
    if not (0 <= y < f.height and 0 <= x < f.width):
        raise IndexError(f"offset {idx} is outside the image")
    neutral = f.elem.neutral_max if is_max else f.elem.neutral_min
    return _row_kernels(is_max, L)[0](f.buf, y, x, f.width, neutral)


def inplace_row_erode(f: Image, y: int, lanes=None, fold: str = "min") -> Image:
    is_max = _fold_is_max(fold)
    if not 0 <= y < f.height:
        raise IndexError(f"row {y} out of range")
    L = LaneConfig.resolve(lanes, f.elem).lanes
    neutral = f.elem.neutral_max if is_max else f.elem.neutral_min
    _row_kernels(is_max, L)[1](f.buf, int(y), f.width, neutral)
    return f


def inplace_horizontal(f: Image, lanes=None, fold: str = "min") -> Image:
    for y in range(f.height):
        inplace_row_erode(f, y, lanes, fold)
    return f


def inplace_vertical_erode(f: Image, lanes=None, fold: str = "min") -> Image:
    is_max = _fold_is_max(fold)
    L = LaneConfig.resolve(lanes, f.elem).lanes
    neutral = f.elem.neutral_max if is_max else f.elem.neutral_min
    _row_kernels(is_max, L)[2](f.buf, f.width, f.height, neutral)
    return f
