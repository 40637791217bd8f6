"""Both kernel lanes implement the same contract; EDT is exact."""

import numpy as np
import pytest

from oracles import brute_edt_sq

from meaformer.numcore import kernels as K
from meaformer.numcore import kernels_numpy as lane_np

try:
    from meaformer.numcore import kernels_numba as lane_nb
    LANES = [lane_np, lane_nb]
except ImportError:  # pragma: no cover
    lane_nb = None
    LANES = [lane_np]

needs_numba = pytest.mark.skipif(lane_nb is None, reason="numba unavailable")


@needs_numba
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("ks,stride,pad", [(3, 1, 1), (4, 2, 1), (1, 1, 0), (3, 2, 1)])
def test_im2col_col2im_lanes_agree(dtype, ks, stride, pad):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 3, 9, 8)).astype(dtype)
    a = lane_np.im2col(x, ks, stride, pad)
    b = lane_nb.im2col(x, ks, stride, pad)
    assert np.array_equal(a, b)
    cols = rng.standard_normal(a.shape).astype(dtype)
    ca = lane_np.col2im(cols, 2, 3, 9, 8, ks, stride, pad)
    cb = lane_nb.col2im(cols, 2, 3, 9, 8, ks, stride, pad)
    np.testing.assert_allclose(ca, cb, atol=1e-5)


@needs_numba
def test_upsample_and_plane_kernels_agree():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 3, 7, 5))
    np.testing.assert_allclose(lane_np.upsample2x(x), lane_nb.upsample2x(x), atol=1e-12)
    g = rng.standard_normal((2, 3, 14, 10))
    np.testing.assert_allclose(lane_np.upsample2x_adj(g), lane_nb.upsample2x_adj(g), atol=1e-12)
    plane = rng.standard_normal((9, 11))
    xs = rng.uniform(-2, 13, 40)
    ys = rng.uniform(-2, 11, 40)
    np.testing.assert_allclose(lane_np.plane_gather(plane, xs, ys),
                               lane_nb.plane_gather(plane, xs, ys), atol=1e-12)
    gg = rng.standard_normal(40)
    ga, gb = np.zeros_like(plane), np.zeros_like(plane)
    lane_np.plane_scatter_add(ga, xs, ys, gg)
    lane_nb.plane_scatter_add(gb, xs, ys, gg)
    np.testing.assert_allclose(ga, gb, atol=1e-12)
    for a, b in zip(lane_np.plane_coord_grad(plane, xs, ys, gg),
                    lane_nb.plane_coord_grad(plane, xs, ys, gg)):
        np.testing.assert_allclose(a, b, atol=1e-12)
    stack = rng.standard_normal((6, 9, 11))
    xs6, ys6 = xs[:6], ys[:6]
    np.testing.assert_allclose(lane_np.planes_gather(stack, xs6, ys6),
                               lane_nb.planes_gather(stack, xs6, ys6), atol=1e-12)


@pytest.mark.parametrize("lane", LANES, ids=lambda m: m.LANE)
def test_im2col_col2im_adjoint(lane):
    rng = np.random.default_rng(2)
    x = rng.standard_normal((1, 2, 8, 8))
    cols = lane.im2col(x, 3, 2, 1)
    g = rng.standard_normal(cols.shape)
    back = lane.col2im(g, 1, 2, 8, 8, 3, 2, 1)
    assert abs((cols * g).sum() - (x * back).sum()) < 1e-9


@pytest.mark.parametrize("lane", LANES, ids=lambda m: m.LANE)
def test_upsample_adjoint_identity(lane):
    rng = np.random.default_rng(3)
    x = rng.standard_normal((1, 2, 6, 7))
    g = rng.standard_normal((1, 2, 12, 14))
    assert abs((lane.upsample2x(x) * g).sum() - (x * lane.upsample2x_adj(g)).sum()) < 1e-9


@pytest.mark.parametrize("lane", LANES, ids=lambda m: m.LANE)
def test_edt_matches_brute_force(lane):
    rng = np.random.default_rng(4)
    for _ in range(20):
        feat = rng.random((17, 23)) < 0.07
        if not feat.any():
            feat[3, 4] = True
        got = lane.edt_sq(feat)
        np.testing.assert_allclose(got, brute_edt_sq(feat), atol=1e-9)


@pytest.mark.parametrize("lane", LANES, ids=lambda m: m.LANE)
def test_edt_rejects_empty(lane):
    with pytest.raises(ValueError):
        lane.edt_sq(np.zeros((5, 5), dtype=bool))


def test_dispatcher_exports_active_lane():
    assert K.LANE in ("numpy", "numba")
    for name in ("im2col", "col2im", "upsample2x", "plane_gather", "edt_sq",
                 "planes_gather"):
        assert callable(getattr(K, name))
