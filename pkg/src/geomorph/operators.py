"""Geodesic operators built from chains of elementary 3x3 stages.

Every operator works on a copy of its input and returns a result of the
same kind: an :class:`Image` for an Image, an ndarray for an array. With
``report=True`` the result is wrapped in an :class:`OperatorResult` that
also carries the number of stages executed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import Image, as_image, global_extreme, pointwise, sub_scalar_saturating
from .kernel import KernelKind, QdtState
from .pipeline import FilterTask, Pipeline, shared_pipeline

DISTANCE_MAX = np.iinfo(np.uint16).max


@dataclass
class OperatorResult:
    image: object
    iterations: int
    converged: bool | None = None


@dataclass
class GranulometryResult:
    sizes: np.ndarray
    G: np.ndarray
    PS: np.ndarray


def _pipe(pipeline: Pipeline | None) -> Pipeline:
    return shared_pipeline() if pipeline is None else pipeline


def _is_signal(f) -> bool:
    return not isinstance(f, Image) and np.ndim(f) == 1


def _out(img: Image, like):
    if isinstance(like, Image):
        return img
    a = img.to_array()
    return a.ravel() if _is_signal(like) else a


def _finish(img: Image, like, iterations: int, converged, report: bool):
    out = _out(img, like)
    return OperatorResult(out, iterations, converged) if report else out


def _chain(kinds) -> list[FilterTask]:
    return [FilterTask(k) for k in kinds]


def _effective_size(f: Image, s: int) -> int:
    # past max(X, Y) - 1 every window covers the whole image
    return min(s, max(f.width, f.height) - 1)


# --- erosion / dilation -------------------------------------------------------

def _window(f, s, kind, pipeline, report):
    if s < 0:
        raise ValueError(f"size must be >= 0, got {s}")
    img = as_image(f).copy()
    n = _effective_size(img, int(s))
    if n:
        _pipe(pipeline).run_chain(img, _chain([kind] * n))
    return _finish(img, f, n, None, report)


def erode_s(f, s: int, pipeline: Pipeline | None = None, report: bool = False):
    """Erosion by the ``(2s+1) x (2s+1)`` square, as ``s`` chained 3x3
    erosions."""
    return _window(f, s, KernelKind.ERODE3X3, pipeline, report)


def dilate_s(f, s: int, pipeline: Pipeline | None = None, report: bool = False):
    return _window(f, s, KernelKind.DILATE3X3, pipeline, report)


# --- reconstruction ------------------------------------------------------------

def _reconstruct(marker, mask, kind, pipeline):
    work = as_image(marker).copy()
    m = as_image(mask)
    if work.shape != m.shape or work.elem != m.elem:
        raise ValueError("marker and mask must have the same shape and element type")
    pipe = _pipe(pipeline)
    tasks = [FilterTask(kind, mask=m, requeue=True) for _ in range(pipe.threads)]
    rep = pipe.run_chain(work, tasks)
    return work, rep.iterations, bool(rep.converged)


def reconstruct_erode(marker, mask, pipeline: Pipeline | None = None) -> OperatorResult:
    """Fixpoint of geodesic erosion of ``marker`` above ``mask``."""
    img, n, conv = _reconstruct(marker, mask, KernelKind.GEODESIC_ERODE_CONVERGENT, pipeline)
    return OperatorResult(_out(img, marker), n, conv)


def reconstruct_dilate(marker, mask, pipeline: Pipeline | None = None) -> OperatorResult:
    """Fixpoint of geodesic dilation of ``marker`` under ``mask``."""
    img, n, conv = _reconstruct(marker, mask, KernelKind.GEODESIC_DILATE_CONVERGENT, pipeline)
    return OperatorResult(_out(img, marker), n, conv)


def _check_h(f: Image, h) -> None:
    if f.elem.is_float:
        if not np.isfinite(h) or h < 0:
            raise ValueError(f"h must be finite and >= 0, got {h!r}")
        return
    info = np.iinfo(f.dtype)
    if h != int(h) or not 0 <= h <= info.max:
        raise ValueError(f"h={h!r} is not representable as {f.elem.tag}")


def hmax(f, h, pipeline: Pipeline | None = None, report: bool = False):
    """Suppress maxima of height at most ``h``."""
    img = as_image(f)
    _check_h(img, h)
    rec, n, conv = _reconstruct(sub_scalar_saturating(img, h), img,
                                KernelKind.GEODESIC_DILATE_CONVERGENT, pipeline)
    return _finish(rec, f, n, conv, report)


def dome(f, h, pipeline: Pipeline | None = None, report: bool = False):
    """Top-hat ``f - hmax(f, h)``."""
    img = as_image(f)
    r = hmax(img, h, pipeline, report=True)
    return _finish(pointwise(img, r.image, "sub_saturating"), f, r.iterations,
                   r.converged, report)


def _marker(f, fill) -> Image:
    m = as_image(f).copy()
    if _is_signal(f):
        # a 1-D signal's border is its two end points
        m.data[0, 1:-1] = fill
    elif m.height > 2 and m.width > 2:
        m.data[1:-1, 1:-1] = fill
    return m


def marker_hfill(f):
    """Border ring of ``f``, interior flooded with the global maximum."""
    return _out(_marker(f, global_extreme(f, "max")), f)


def marker_raobj(f):
    return _out(_marker(f, global_extreme(f, "min")), f)


def hfill(f, pipeline: Pipeline | None = None, report: bool = False):
    """Fill every regional minimum not connected to the border."""
    img = as_image(f)
    rec, n, conv = _reconstruct(_marker(f, global_extreme(img, "max")), img,
                                KernelKind.GEODESIC_ERODE_CONVERGENT, pipeline)
    return _finish(rec, f, n, conv, report)


def raobj(f, pipeline: Pipeline | None = None, report: bool = False):
    """Remove structures connected to the border."""
    img = as_image(f)
    rec, n, conv = _reconstruct(_marker(f, global_extreme(img, "min")), img,
                                KernelKind.GEODESIC_DILATE_CONVERGENT, pipeline)
    return _finish(pointwise(img, rec, "sub_saturating"), f, n, conv, report)


def open_by_reconstruction(f, s: int, pipeline: Pipeline | None = None,
                           report: bool = False):
    """Remove bright components the ``(2s+1)`` square does not fit in."""
    if s < 1:
        raise ValueError(f"size must be >= 1, got {s}")
    img = as_image(f)
    marker = erode_s(img, s, pipeline, report=True)
    rec, n, conv = _reconstruct(marker.image, img,
                                KernelKind.GEODESIC_DILATE_CONVERGENT, pipeline)
    return _finish(rec, f, marker.iterations + n, conv, report)


# --- quasi-distance -------------------------------------------------------------

def quasi_distance(f, pipeline: Pipeline | None = None, return_residual: bool = False):
    """Quasi-distance transform.

    Returns ``(d, iterations)``, or ``(d, r, iterations)`` with
    ``return_residual``. ``d`` is U16: the erosion count with the largest
    residual (first one on ties, 0 where no residual is positive),
    lowered until neighbouring values differ by at most one.
    """
    img = as_image(f)
    pipe = _pipe(pipeline)
    n = max(img.width, img.height)
    if n > DISTANCE_MAX:
        raise ValueError(f"image dimension {n} exceeds the U16 distance range")
    work = img.copy()
    state = QdtState.for_image(work)
    tasks = [FilterTask(KernelKind.QDT_ERODE_STEP, qdt=state, requeue=True, limit=n)
             for _ in range(min(pipe.threads, n))]
    iterations = pipe.run_chain(work, tasks).iterations
    d = state.d
    tasks = [FilterTask(KernelKind.ETA_STEP, requeue=True) for _ in range(pipe.threads)]
    iterations += pipe.run_chain(d, tasks).iterations
    d_out, r_out = _out(d, f), _out(state.r, f)
    if return_residual:
        return d_out, r_out, iterations
    return d_out, iterations


# --- size distributions ----------------------------------------------------------

def _opening_chain(s: int) -> list[FilterTask]:
    return _chain([KernelKind.ERODE3X3] * s + [KernelKind.DILATE3X3] * s)


def _closing_chain(s: int) -> list[FilterTask]:
    return _chain([KernelKind.DILATE3X3] * s + [KernelKind.ERODE3X3] * s)


def _exact_sum(a: np.ndarray, elem_max: int):
    if a.dtype.kind == "f":
        return np.float64(a.astype(np.float64).sum())
    if a.size * elem_max < np.iinfo(np.int64).max:
        return np.int64(a.astype(np.int64).sum())
    return int(sum(int(v) for v in a.astype(np.uint64).ravel()))


def granulometry(f, S: int, pipeline: Pipeline | None = None) -> GranulometryResult:
    """Sums of the openings of size ``0..S`` and their differences."""
    if S < 1:
        raise ValueError(f"max size must be >= 1, got {S}")
    img = as_image(f)
    pipe = _pipe(pipeline)
    top = 0 if img.elem.is_float else int(np.iinfo(img.dtype).max)
    sums = []
    for s in range(S + 1):
        work = img.copy()
        if s:
            pipe.run_chain(work, _opening_chain(s))
        sums.append(_exact_sum(work.to_array(), top))
    G = np.array(sums) if all(isinstance(v, np.generic) for v in sums) else np.array(sums, object)
    return GranulometryResult(np.arange(S + 1), G, G[:-1] - G[1:])


def asf(f, S: int, pipeline: Pipeline | None = None, report: bool = False):
    """Alternating sequential filter: opening then closing for sizes
    ``1..S``, run as a single chain."""
    if S < 1:
        raise ValueError(f"max size must be >= 1, got {S}")
    work = as_image(f).copy()
    tasks = []
    for s in range(1, S + 1):
        tasks += _opening_chain(s) + _closing_chain(s)
    n = _pipe(pipeline).run_chain(work, tasks).iterations
    return _finish(work, f, n, None, report)
