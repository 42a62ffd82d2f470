import numpy as np
import pytest

from geomorph import operators as ops
from geomorph import oracle
from geomorph.image import Image
from geomorph.pipeline import Pipeline

from conftest import DTYPES, random_image

u8 = lambda v: np.array(v, np.uint8)


@pytest.fixture(scope="module")
def p3():
    with Pipeline(3, "none") as p:
        yield p


def test_erode_dilate_s(p3, rng):
    a = random_image(rng, (64, 64), np.uint8)
    assert np.array_equal(ops.erode_s(a, 0, p3), a)
    assert np.array_equal(ops.erode_s(a, 2, p3), oracle.naive_erode(a, 2))
    assert np.array_equal(ops.dilate_s(a, 3, p3), oracle.naive_dilate(a, 3))
    assert np.all(ops.erode_s(a, 64, p3) == a.min())
    assert np.all(ops.dilate_s(a[:5, :9], 1000, p3) == a[:5, :9].max())
    with pytest.raises(ValueError):
        ops.erode_s(a, -1, p3)


def test_operators_keep_input(p3, rng):
    a = random_image(rng, (10, 10), np.uint8)
    keep = a.copy()
    img = Image.from_array(a)
    out = ops.hmax(img, 5, p3)
    assert isinstance(out, Image) and out is not img
    ops.asf(a, 1, p3)
    assert np.array_equal(a, keep) and np.array_equal(img.data, keep)


def test_reconstruct_examples(p3):
    r = ops.reconstruct_dilate(u8([0, 2, 0, 4, 0]), u8([1, 3, 1, 5, 1]), p3)
    assert r.image.tolist() == [1, 2, 1, 4, 1] and r.converged
    m = u8([[3, 1, 4], [1, 5, 9]])
    r = ops.reconstruct_erode(m, m, p3)
    assert np.array_equal(r.image, m) and r.converged and r.iterations == p3.threads
    with pytest.raises(ValueError):
        ops.reconstruct_erode(m, m[:1], p3)


@pytest.mark.parametrize("dtype", DTYPES)
def test_reconstruct_idempotent(p3, rng, dtype):
    mask = random_image(rng, (30, 30), dtype)
    marker = np.minimum(mask, random_image(rng, (30, 30), dtype))
    r = ops.reconstruct_dilate(marker, mask, p3).image
    assert np.array_equal(r, oracle.naive_reconstruct(marker, mask, "dilate"))
    again = ops.reconstruct_dilate(r, mask, p3)
    assert np.array_equal(again.image, r) and again.iterations == p3.threads
    hi = np.maximum(mask, random_image(rng, (30, 30), dtype))
    e = ops.reconstruct_erode(hi, mask, p3).image
    assert np.array_equal(e, oracle.naive_reconstruct(hi, mask, "erode"))
    assert np.array_equal(ops.reconstruct_erode(e, mask, p3).image, e)


def test_hmax_dome_examples(p3):
    f = u8([1, 3, 1, 5, 1])
    assert ops.hmax(f, 1, p3).tolist() == [1, 2, 1, 4, 1]
    assert ops.dome(f, 1, p3).tolist() == [0, 1, 0, 1, 0]
    assert np.array_equal(ops.hmax(f, 0, p3), f)
    assert not ops.dome(f, 0, p3).any()
    # a constant image is one plateau: the reconstruction keeps it at f - h
    assert np.all(ops.dome(np.full((4, 4), 7, np.uint8), 3, p3) == 3)
    assert np.all(ops.dome(np.full((4, 4), 2, np.uint8), 3, p3) == 2)
    big = ops.hmax(f, 200, p3)
    assert np.array_equal(big, oracle.naive_hmax(f, 200))
    with pytest.raises(ValueError):
        ops.hmax(f, 256, p3)
    with pytest.raises(ValueError):
        ops.hmax(f, -1, p3)
    with pytest.raises(ValueError):
        ops.hmax(np.zeros(3), float("nan"), p3)


def test_hfill_examples(p3, rng):
    assert ops.hfill(u8([5, 0, 5]), p3).tolist() == [5, 5, 5]
    ramp = np.add.outer(np.arange(6), np.arange(7)).astype(np.uint8)
    assert np.array_equal(ops.hfill(ramp, p3), ramp)
    a = random_image(rng, (20, 20), np.uint8)
    h = ops.hfill(a, p3)
    assert np.all(h >= a)
    ring = np.ones_like(a, bool)
    ring[1:-1, 1:-1] = False
    assert np.array_equal(h[ring], a[ring])


def test_raobj_examples(p3, rng):
    assert ops.raobj(u8([9, 9, 0, 7, 0]), p3).tolist() == [0, 0, 0, 7, 0]
    assert not ops.raobj(np.zeros((6, 6), np.uint8), p3).any()
    f = np.full((9, 9), 2, np.uint8)
    f[3:6, 3:6] = 50
    assert np.array_equal(ops.raobj(f, p3), f - 2)
    a = random_image(rng, (20, 20), np.uint8)
    r = ops.raobj(a, p3)
    assert r[0].sum() == r[-1].sum() == r[:, 0].sum() == r[:, -1].sum() == 0


def test_open_by_reconstruction_examples(p3):
    spot = np.zeros((8, 8), np.uint8)
    spot[4, 4] = 10
    assert not ops.open_by_reconstruction(spot, 1, p3).any()
    block = np.zeros((12, 12), np.uint8)
    block[2:9, 3:10] = 40
    block[10, 10] = 40
    out = ops.open_by_reconstruction(block, 1, p3)
    expect = block.copy()
    expect[10, 10] = 0
    assert np.array_equal(out, expect)
    c = np.full((5, 5), 4, np.uint8)
    assert np.array_equal(ops.open_by_reconstruction(c, 2, p3), c)
    with pytest.raises(ValueError):
        ops.open_by_reconstruction(c, 0, p3)


def test_quasi_distance_examples(p3):
    d, n = ops.quasi_distance(np.full((5, 6), 9, np.uint8), p3)
    assert not d.any() and d.dtype == np.uint16 and n >= 1
    d, n = ops.quasi_distance(u8([9, 9, 9, 0]), p3)
    assert d.tolist() == [3, 2, 1, 0]


def test_quasi_distance_disk(p3):
    yy, xx = np.mgrid[:21, :21]
    disk = (((yy - 10) ** 2 + (xx - 10) ** 2) <= 25).astype(np.uint8) * 200
    d, _ = ops.quasi_distance(disk, p3)
    ref, _ = oracle.naive_qdt(disk)
    assert np.array_equal(d, ref)
    # inside the disk: chessboard distance to the background
    inside = disk > 0
    bg = np.argwhere(~inside)
    cheb = np.array([[np.abs(bg - (y, x)).max(axis=1).min() for x in range(21)] for y in range(21)])
    assert np.array_equal(d[inside], cheb[inside])
    assert not d[~inside].any()


def test_qdt_residual_and_bounds(p3, rng):
    a = random_image(rng, (16, 23), np.float32)
    d, r, n = ops.quasi_distance(a, p3, return_residual=True)
    ref_d, ref_r = oracle.naive_qdt(a)
    assert np.array_equal(d, ref_d) and np.array_equal(r, ref_r)
    assert d.max() <= max(a.shape)
    assert ((d == 0) == (r <= 0)).all()
    assert (d.astype(int) - oracle.naive_erode(d, 1)).max() <= 1


def test_granulometry_examples(p3, rng):
    spot = np.zeros((8, 8), np.uint8)
    spot[3, 4] = 10
    g = ops.granulometry(spot, 2, p3)
    assert g.G.tolist() == [10, 0, 0] and g.PS.tolist() == [10, 0]
    assert g.sizes.tolist() == [0, 1, 2]
    c = ops.granulometry(np.full((6, 6), 3, np.uint16), 3, p3)
    assert not c.PS.any()
    a = random_image(rng, (32, 32), np.uint16)
    g = ops.granulometry(a, 5, p3)
    assert np.all(np.diff(g.G) <= 0) and np.all(g.PS >= 0)
    assert g.PS.sum() == g.G[0] - g.G[-1]
    with pytest.raises(ValueError):
        ops.granulometry(a, 0, p3)


def test_granulometry_float_accumulates_in_double(p3, rng):
    a = random_image(rng, (20, 20), np.float32)
    g = ops.granulometry(a, 2, p3)
    assert g.G.dtype == np.float64
    assert np.array_equal(g.G, oracle.naive_granulometry(a, 2)[0])


def test_asf_examples(p3, rng):
    c = np.full((7, 7), 5, np.float64)
    assert np.array_equal(ops.asf(c, 3, p3), c)
    a = random_image(rng, (64, 64), np.uint8)
    assert np.array_equal(ops.asf(a, 1, p3), oracle.naive_closing(oracle.naive_opening(a, 1), 1))
    r = ops.asf(a, 3, p3, report=True)
    assert r.iterations == 4 * (1 + 2 + 3)
    with Pipeline(1, "none") as p1:
        assert np.array_equal(r.image, ops.asf(a, 3, p1))
    assert np.array_equal(r.image, oracle.naive_asf(a, 3))


def test_markers(rng):
    f = random_image(rng, (3, 3), np.uint8)
    m = ops.marker_hfill(f)
    diff = np.argwhere(m != f)
    assert len(diff) <= 1 and (len(diff) == 0 or diff[0].tolist() == [1, 1])
    row = random_image(rng, (1, 9), np.uint8)
    assert np.array_equal(ops.marker_hfill(row), row)
    assert np.array_equal(ops.marker_raobj(row.T), row.T)
    f = random_image(rng, (4, 4), np.uint8)
    m = ops.marker_raobj(f)
    assert np.all(m[1:3, 1:3] == f.min())
    ring = np.ones((4, 4), bool)
    ring[1:3, 1:3] = False
    assert np.array_equal(m[ring], f[ring])
    assert np.all(ops.marker_hfill(f)[1:3, 1:3] == f.max())


def test_report_flags(p3, rng):
    a = random_image(rng, (12, 12), np.uint8)
    for fn in (ops.hfill, ops.raobj):
        r = fn(a, p3, report=True)
        assert r.converged and r.iterations >= p3.threads
    assert ops.erode_s(a, 3, p3, report=True).iterations == 3
