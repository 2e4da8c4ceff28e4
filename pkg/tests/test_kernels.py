import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

import oracles
from spotlier import _pure, kernels


def test_backend_names():
    assert kernels.BACKEND in kernels.available_backends()
    assert "python" in kernels.available_backends()
    with pytest.raises(ValueError):
        kernels.load_backend("fortran")


def test_soft_threshold(backend):
    x = np.array([-1.0, -0.05, 0.0, 0.05, 0.5])
    np.testing.assert_array_equal(backend.soft_threshold(x, 0.1), oracles.soft(x, 0.1))


@pytest.mark.parametrize("shape,patch,stride", [((41, 41), 27, 14), ((60, 50), 9, 4), ((12, 30), 5, 5)])
def test_extract_matches_loop(backend, shape, patch, stride):
    rng = np.random.default_rng(1)
    img = rng.random(shape)
    rows = (shape[0] - patch) // stride + 1
    cols = (shape[1] - patch) // stride + 1
    got = backend.extract_patches(img, patch, stride, rows, cols)
    np.testing.assert_array_equal(got, oracles.patches_loop(img, patch, stride, rows, cols))


def test_accumulate_matches_loop(backend):
    rng = np.random.default_rng(2)
    patch, stride, rows, cols, h, w = 7, 3, 5, 6, 22, 26
    vals = rng.random((patch * patch, rows * cols))
    sums, counts = backend.accumulate_patches(vals, patch, stride, rows, cols, h, w)
    img, ref_counts = oracles.reconstruct_loop(vals, patch, stride, rows, cols, h, w)
    np.testing.assert_array_equal(counts, ref_counts)
    covered = counts > 0
    np.testing.assert_allclose(sums[covered] / counts[covered], img[covered], atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(arrays(bool, st.tuples(st.integers(1, 18), st.integers(1, 18))))
def test_label8_matches_flood_fill(mask):
    ref, n_ref = oracles.label8_bfs(mask)
    for name in kernels.available_backends():
        labels, n = kernels.load_backend(name).label8(mask)
        assert n == n_ref
        np.testing.assert_array_equal(labels, ref)


def test_label8_matches_scipy(backend):
    rng = np.random.default_rng(3)
    mask = rng.random((80, 90)) > 0.6
    labels, n = backend.label8(mask)
    ref, n_ref = ndimage.label(mask, structure=np.ones((3, 3)))
    assert n == n_ref
    # same partition: one-to-one map between label ids
    pairs = set(zip(labels[mask].tolist(), ref[mask].tolist()))
    assert len(pairs) == n


def test_component_stats(backend):
    mask = np.zeros((6, 6), bool)
    mask[0:2, 0:2] = True
    mask[4, 3:6] = True
    values = np.arange(36, dtype=float).reshape(6, 6)
    labels, n = backend.label8(mask)
    rmean, cmean, peak, size = backend.component_stats(labels, n, values)
    np.testing.assert_allclose(rmean, [0.5, 4.0])
    np.testing.assert_allclose(cmean, [0.5, 4.0])
    np.testing.assert_allclose(peak, [7.0, 29.0])
    np.testing.assert_array_equal(size, [4, 3])


def test_correlate_matches_scipy(backend):
    rng = np.random.default_rng(4)
    img = rng.random((40, 33))
    k = rng.normal(size=(5, 5))
    k -= k.mean()
    ref = ndimage.correlate(img, k, mode="reflect")
    np.testing.assert_allclose(backend.centered_correlate(img, k, 0.0), ref, atol=1e-12)
    g = np.abs(k)
    g /= g.sum()
    ref = ndimage.correlate(img, g, mode="reflect")
    np.testing.assert_allclose(backend.centered_correlate(img, g, 1.0), ref, atol=1e-12)


def test_correlate_constant_is_exactly_zero(backend):
    k = np.arange(25.0).reshape(5, 5)
    k -= k.mean()
    out = backend.centered_correlate(np.full((9, 9), 0.37), k, 0.0)
    assert np.all(out == 0.0)


@pytest.mark.parametrize("fp", [np.ones((3, 3), bool), np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], bool)])
def test_morphology_matches_scipy(backend, fp):
    rng = np.random.default_rng(5)
    img = rng.random((30, 41))
    np.testing.assert_array_equal(backend.grey_erode(img, fp),
                                  ndimage.grey_erosion(img, footprint=fp, mode="reflect"))
    np.testing.assert_array_equal(backend.grey_dilate(img, fp),
                                  ndimage.grey_dilation(img, footprint=fp, mode="reflect"))


@pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")
def test_backends_agree_on_pipeline_kernels():
    core = kernels.load_backend("cython")
    rng = np.random.default_rng(6)
    img = rng.random((64, 70))
    a = core.extract_patches(img, 27, 14, 3, 4)
    np.testing.assert_array_equal(a, _pure.extract_patches(img, 27, 14, 3, 4))
    s1, c1 = core.accumulate_patches(a, 27, 14, 3, 4, 64, 70)
    s2, c2 = _pure.accumulate_patches(a, 27, 14, 3, 4, 64, 70)
    np.testing.assert_allclose(s1, s2, atol=1e-13)
    np.testing.assert_array_equal(c1, c2)
    x = rng.normal(size=(50, 7))
    np.testing.assert_array_equal(core.soft_threshold(x, 0.3), _pure.soft_threshold(x, 0.3))
