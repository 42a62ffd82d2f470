import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from geomorph import oracle
from geomorph.image import Image
from geomorph.kernel import (ABORTED, LANE_CHOICES, KernelKind, LaneConfig, QdtState,
                             RowCache, eta_step, full_counter, horizontal_pass_stride,
                             inplace_horizontal, inplace_row_erode, inplace_vertical_erode,
                             qdt_erode_step, run_stage, stream_dilate3x3, stream_erode3x3,
                             stream_geodesic_dilate, stream_geodesic_dilate_convergent,
                             stream_geodesic_erode, stream_geodesic_erode_convergent)

from conftest import DTYPES, random_image


def img(a, dtype=np.uint8):
    return Image.from_array(np.asarray(a, dtype))


def naive_hx(a, is_max=False):
    fold = np.maximum if is_max else np.minimum
    p = np.pad(a, ((0, 0), (1, 1)), mode="edge")
    return fold(fold(p[:, :-2], p[:, 1:-1]), p[:, 2:])


def naive_vy(a, is_max=False):
    return naive_hx(a.T, is_max).T


# --- building blocks ------------------------------------------------------------

def test_lane_config():
    assert LaneConfig(1).lanes == 1
    assert LaneConfig.resolve(None, None).lanes == max(LANE_CHOICES)
    with pytest.raises(ValueError):
        LaneConfig(3)


@pytest.mark.parametrize("lanes", [4, 1, 32])
def test_horizontal_pass_example(lanes):
    f = img([[5, 3, 7, 1]])
    out = horizontal_pass_stride(f, 0, lanes, "min")
    assert out[:4].tolist() == [3, 3, 1, 1][:lanes]


def test_horizontal_pass_constant():
    f = img(np.full((2, 9), 6))
    assert set(horizontal_pass_stride(f, f.stride + 1, 8).tolist()) == {6}


def test_horizontal_pass_lanes_agree(rng):
    a = random_image(rng, (1024, 40), np.uint8)
    f = Image.from_array(a)
    ref = naive_hx(a)
    for y in range(0, 1024, 37):
        for x in range(0, 40 - 8, 3):
            idx = y * f.stride + x
            one = [horizontal_pass_stride(f, idx + k, 1)[0] for k in range(8)]
            eight = horizontal_pass_stride(f, idx, 8)
            assert eight.tolist() == one == ref[y, x:x + 8].tolist()


def test_horizontal_pass_bounds():
    with pytest.raises(IndexError):
        horizontal_pass_stride(img([[1, 2]]), 5, 1)


@pytest.mark.parametrize("lanes", [1, 2, 4, 32])
def test_inplace_row(lanes, rng):
    f = img([[5, 3, 7, 1]])
    assert inplace_row_erode(f, 0, lanes).data.tolist() == [[3, 3, 1, 1]]
    g = img([[1, 2, 3, 4]])
    assert inplace_row_erode(g, 0, lanes).data.tolist() == [[1, 1, 2, 3]]
    a = random_image(rng, (3, 53), np.uint16)
    h = Image.from_array(a)
    inplace_row_erode(h, 1, lanes)
    assert np.array_equal(h.data[1], naive_hx(a)[1])
    assert np.array_equal(h.data[[0, 2]], a[[0, 2]])


@pytest.mark.parametrize("lanes", [1, 8])
def test_inplace_vertical(lanes, rng):
    f = img([[4], [2], [6]])
    assert inplace_vertical_erode(f, lanes).data.ravel().tolist() == [2, 2, 2]
    c = img(np.full((5, 5), 3))
    assert np.all(inplace_vertical_erode(c, lanes).data == 3)
    a = random_image(rng, (64, 64), np.float32)
    assert np.array_equal(inplace_vertical_erode(Image.from_array(a), lanes).data, naive_vy(a))


@pytest.mark.parametrize("dtype", DTYPES)
def test_decomposition_orders(dtype, rng):
    a = random_image(rng, (31, 45), dtype)
    ref = oracle.naive_erode(a, 1)
    xy = inplace_vertical_erode(inplace_horizontal(Image.from_array(a)))
    yx = inplace_horizontal(inplace_vertical_erode(Image.from_array(a)))
    assert np.array_equal(xy.data, ref) and np.array_equal(yx.data, ref)
    assert np.array_equal(stream_erode3x3(Image.from_array(a)).data, ref)
    dil = inplace_vertical_erode(inplace_horizontal(Image.from_array(a), fold="max"), fold="max")
    assert np.array_equal(dil.data, oracle.naive_dilate(a, 1))


# --- streaming stages -----------------------------------------------------------

def test_stream_erode_examples():
    assert np.all(stream_erode3x3(img(np.full((3, 3), 5))).data == 5)
    f = np.full((3, 3), 9)
    f[1, 1] = 0
    assert np.all(stream_erode3x3(img(f)).data == 0)


@pytest.mark.parametrize("dtype", DTYPES)
@pytest.mark.parametrize("shape", [(1, 1), (1, 7), (6, 1), (2, 2), (64, 64), (33, 70)])
def test_stream_matches_oracle(dtype, shape, rng):
    a = random_image(rng, shape, dtype)
    for lanes in LANE_CHOICES:
        assert np.array_equal(stream_erode3x3(Image.from_array(a), lanes).data,
                              oracle.naive_erode(a, 1))
        assert np.array_equal(stream_dilate3x3(Image.from_array(a), lanes).data,
                              oracle.naive_dilate(a, 1))


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_duality(dtype, rng):
    a = random_image(rng, (40, 41), dtype)
    d = stream_dilate3x3(Image.from_array(a)).data
    e = stream_erode3x3(Image.from_array(-a)).data
    assert np.array_equal(d, -e)


@settings(max_examples=40, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 20), st.integers(1, 50))),
       st.sampled_from(LANE_CHOICES))
def test_stream_properties(a, lanes):
    e = stream_erode3x3(Image.from_array(a), lanes).data
    d = stream_dilate3x3(Image.from_array(a), lanes).data
    assert np.all(e <= a) and np.all(d >= a)
    assert np.array_equal(e, oracle.naive_erode(a, 1))
    assert np.array_equal(d, oracle.naive_dilate(a, 1))


def test_geodesic_examples():
    f = img([[1, 9, 1]])
    assert stream_geodesic_erode(f, img([[0, 5, 0]])).data.tolist() == [[1, 5, 1]]
    a = np.random.default_rng(3).integers(0, 255, (20, 20)).astype(np.uint8)
    zero = img(np.zeros_like(a))
    assert np.array_equal(stream_geodesic_erode(img(a), zero).data, oracle.naive_erode(a, 1))
    assert np.array_equal(stream_geodesic_erode(img(a), img(a)).data, a)


@pytest.mark.parametrize("dtype", DTYPES)
def test_geodesic_matches_oracle(dtype, rng):
    f = random_image(rng, (30, 50), dtype)
    m = random_image(rng, (30, 50), dtype)
    for lanes in (1, None):
        e = stream_geodesic_erode(Image.from_array(f), Image.from_array(m), lanes).data
        d = stream_geodesic_dilate(Image.from_array(f), Image.from_array(m), lanes).data
        assert np.array_equal(e, oracle.naive_geodesic_step(f, m, "erode"))
        assert np.array_equal(d, oracle.naive_geodesic_step(f, m, "dilate"))
        assert np.all(e >= m) and np.all(d <= m)
    hi = np.maximum(f, m)
    assert np.all(stream_geodesic_erode(Image.from_array(hi), Image.from_array(m)).data <= hi)


def test_geodesic_needs_matching_mask():
    with pytest.raises(ValueError):
        stream_geodesic_erode(img([[1, 2]]), img([[1, 2, 3]]))
    with pytest.raises(ValueError):
        stream_geodesic_erode(img([[1, 2]]), img([[1, 2]], np.uint16))
    with pytest.raises(ValueError):
        run_stage(KernelKind.GEODESIC_DILATE, img([[1]]))


def test_convergent_flags():
    # marker with a hole, mask below it
    f = img([[5, 0, 5]])
    m = img([[3, 0, 3]])
    assert not stream_geodesic_erode_convergent(f, m)
    assert f.data.tolist() == [[3, 0, 3]]
    assert stream_geodesic_erode_convergent(f, m)
    assert stream_geodesic_erode_convergent(f, m)
    fix = img([[5, 5, 5]])
    assert stream_geodesic_erode_convergent(fix, img([[5, 0, 5]]))
    assert fix.data.tolist() == [[5, 5, 5]]


@pytest.mark.parametrize("dtype", DTYPES)
def test_convergent_soundness(dtype, rng):
    mask = random_image(rng, (25, 33), dtype)
    marker = np.minimum(mask, random_image(rng, (25, 33), dtype))
    f = Image.from_array(marker)
    m = Image.from_array(mask)
    steps = 0
    while not stream_geodesic_dilate_convergent(f, m, lanes=1 if steps % 2 else None):
        steps += 1
    ref, n = oracle.naive_reconstruct(marker, mask, "dilate", return_steps=True)
    assert np.array_equal(f.data, ref) and steps + 1 == n
    before = f.data.copy()
    assert stream_geodesic_dilate_convergent(f, m)
    assert np.array_equal(before, f.data)


def test_qdt_step_plateau():
    f = img([[9, 9, 9, 0]])
    q = QdtState.for_image(f)
    flags = [qdt_erode_step(f, q, j) for j in (1, 2, 3, 4)]
    assert q.d.data.tolist() == [[3, 2, 1, 0]]
    assert q.r.data.tolist() == [[9, 9, 9, 0]]
    assert flags == [False, False, False, True]


def test_qdt_step_constant_and_ties():
    c = img(np.full((4, 4), 7))
    q = QdtState.for_image(c)
    assert qdt_erode_step(c, q, 1)
    assert not q.d.data.any() and not q.r.data.any()
    # residual 2 at j=1 and again 2 at j=2: the first one wins
    f = img([[4, 2, 0]])
    q = QdtState.for_image(f)
    qdt_erode_step(f, q, 1)
    qdt_erode_step(f, q, 2)
    assert q.d.data.tolist() == [[1, 1, 0]]
    assert q.r.data.tolist() == [[2, 2, 0]]


def test_qdt_step_validates():
    f = img([[1, 2]])
    with pytest.raises(ValueError):
        qdt_erode_step(f, QdtState.for_image(f), 0)
    with pytest.raises(ValueError):
        run_stage(KernelKind.QDT_ERODE_STEP, f)


def test_eta_examples():
    f = img([[0, 5, 0]], np.uint16)
    assert not eta_step(f)
    assert f.data.tolist() == [[0, 1, 0]]
    assert eta_step(f)
    g = img([[0, 2]], np.uint16)
    eta_step(g)
    assert g.data.tolist() == [[0, 1]]
    lip = img(np.add.outer(np.arange(6), np.arange(6)) // 2, np.uint16)
    before = lip.data.copy()
    assert eta_step(lip) and np.array_equal(lip.data, before)


def test_eta_matches_oracle(rng):
    d = rng.integers(0, 30, (40, 40)).astype(np.uint16)
    f = Image.from_array(d)
    eta_step(f)
    assert np.array_equal(f.data, oracle.naive_eta(d))


def test_row_cache_is_two_rows():
    c = RowCache()
    assert c.elements == 0
    f = img(np.zeros((10, 77)))
    run_stage(KernelKind.ERODE3X3, f, cache=c)
    assert c.elements == 2 * 77 and c.nbytes == 2 * 77
    g = Image.from_array(np.zeros((3, 12), np.float64))
    run_stage(KernelKind.ERODE3X3, g, cache=c)
    assert c.elements == 24 and c.nbytes == 24 * 8


def test_counter_and_gate_log(rng):
    a = random_image(rng, (20, 16), np.uint8)
    f = Image.from_array(a)
    own = np.zeros(1, np.int64)
    log = np.full(20, -1, np.int64)
    run_stage(KernelKind.ERODE3X3, f, pred=full_counter(20), own=own, log=log)
    assert own[0] == 20
    assert np.all(log == 20)


def test_abort_while_waiting():
    f = img(np.zeros((4, 4)))
    abort = np.ones(1, np.int64)
    assert run_stage(KernelKind.ERODE3X3, f, pred=np.zeros(1, np.int64), abort=abort) == ABORTED
