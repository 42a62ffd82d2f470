"""Naive reference implementations.

Everything here works on plain numpy arrays, out of place, and favours
being obviously right over being fast. Windows are clipped to the image,
which is what neutral-element padding gives for min/max folds.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _neutral(dtype, is_max):
    dtype = np.dtype(dtype)
    info = np.finfo(dtype) if dtype.kind == "f" else np.iinfo(dtype)
    if dtype.kind == "f":
        return dtype.type(-info.max if is_max else info.max)
    return dtype.type(info.min if is_max else info.max)


def _window_fold(f, s, is_max):
    f = np.asarray(f)
    if f.ndim == 1:
        return _window_fold(f[np.newaxis], s, is_max)[0]
    if s == 0:
        return f.copy()
    padded = np.pad(f, s, mode="constant", constant_values=_neutral(f.dtype, is_max))
    windows = sliding_window_view(padded, (2 * s + 1, 2 * s + 1))
    return windows.max(axis=(-2, -1)) if is_max else windows.min(axis=(-2, -1))


def naive_erode(f, s=1):
    """Minimum over the clipped ``(2s+1) x (2s+1)`` window of every pixel."""
    if s < 0:
        raise ValueError("s must be >= 0")
    return _window_fold(f, s, False)


def naive_dilate(f, s=1):
    if s < 0:
        raise ValueError("s must be >= 0")
    return _window_fold(f, s, True)


def naive_geodesic_step(f, m, direction="erode"):
    f, m = np.asarray(f), np.asarray(m)
    if f.shape != m.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {m.shape}")
    if direction == "erode":
        return np.maximum(naive_erode(f, 1), m)
    if direction == "dilate":
        return np.minimum(naive_dilate(f, 1), m)
    raise ValueError(f"direction must be 'erode' or 'dilate', got {direction!r}")


def naive_reconstruct(marker, mask, direction="dilate", return_steps=False):
    """Iterate the geodesic step until nothing changes."""
    cur = np.asarray(marker).copy()
    steps = 0
    while True:
        nxt = naive_geodesic_step(cur, mask, direction)
        steps += 1
        if np.array_equal(nxt, cur):
            break
        cur = nxt
    return (cur, steps) if return_steps else cur


def saturating_sub(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype.kind == "f":
        return a - b
    return np.where(a > b, a - b, 0).astype(a.dtype)


def naive_marker(f, fill):
    f = np.asarray(f)
    out = f.copy()
    if f.ndim == 1:
        out[1:-1] = fill
    else:
        out[1:-1, 1:-1] = fill
    return out


def naive_hmax(f, h):
    f = np.asarray(f)
    marker = saturating_sub(f, np.full_like(f, h))
    return naive_reconstruct(marker, f, "dilate")


def naive_dome(f, h):
    return saturating_sub(f, naive_hmax(f, h))


def naive_hfill(f):
    f = np.asarray(f)
    return naive_reconstruct(naive_marker(f, f.max()), f, "erode")


def naive_raobj(f):
    f = np.asarray(f)
    return saturating_sub(f, naive_reconstruct(naive_marker(f, f.min()), f, "dilate"))


def naive_open_by_reconstruction(f, s):
    return naive_reconstruct(naive_erode(f, s), f, "dilate")


def naive_opening(f, s):
    return naive_dilate(naive_erode(f, s), s)


def naive_closing(f, s):
    return naive_erode(naive_dilate(f, s), s)


def naive_asf(f, S):
    out = np.asarray(f)
    for s in range(1, S + 1):
        out = naive_closing(naive_opening(out, s), s)
    return out


def naive_granulometry(f, S):
    f = np.asarray(f)
    acc = np.float64 if f.dtype.kind == "f" else np.int64
    G = np.array([naive_opening(f, s).astype(acc).sum() for s in range(S + 1)])
    return G, G[:-1] - G[1:]


def naive_eta(d):
    e = naive_erode(d, 1)
    bump = (e + 1).astype(d.dtype)
    return np.where(d - e > 1, bump, d).astype(d.dtype)


def naive_qdt(f, return_raw=False):
    """Quasi-distance transform.

    ``d`` is the first erosion count whose residual is the largest positive
    one at each pixel (0 where no residual is positive), then lowered until
    it is 1-Lipschitz. Erosions are materialised for ``s = 0..max(X, Y)``.
    """
    f = np.asarray(f)
    n = max(f.shape)
    erosions = [f]
    for _ in range(n):
        erosions.append(naive_erode(erosions[-1], 1))
    best = np.zeros_like(f)
    d = np.zeros(f.shape, np.uint16)
    for s in range(n):
        res = (erosions[s] - erosions[s + 1]).astype(f.dtype)
        better = res > best
        best[better] = res[better]
        d[better] = s + 1
    raw = d.copy()
    while True:
        nxt = naive_eta(d)
        if np.array_equal(nxt, d):
            break
        d = nxt
    return (d, best, raw) if return_raw else (d, best)
