import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from spotlier import imaging
from spotlier.imaging import (PGMHeaderError, PatchMatrix, TruncatedPayloadError,
                              UnsupportedFormatError, exclude_annotated_patches, extract_patches,
                              load_image, make_grid, reconstruct_from_patches)


def _write(path, payload):
    path.write_bytes(payload)
    return path


def test_load_p2_scales_by_maxval(tmp_path):
    f = _write(tmp_path / "a.pgm", b"P2\n# comment\n2 2\n255\n0 255\n255 0\n")
    np.testing.assert_array_equal(load_image(f), [[0, 1], [1, 0]])


def test_load_p5_16bit(tmp_path):
    payload = np.array([0, 1000, 65535, 500], dtype=">u2").tobytes()
    f = _write(tmp_path / "b.pgm", b"P5 2 2 65535\n" + payload)
    np.testing.assert_allclose(load_image(f), np.array([[0, 1000], [65535, 500]]) / 65535)


def test_p5_byte_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    raw = rng.integers(0, 256, size=(7, 5), dtype=np.uint8)
    src = _write(tmp_path / "src.pgm", b"P5\n5 7\n255\n" + raw.tobytes())
    imaging.save_image(load_image(src), tmp_path / "out.pgm")
    assert (tmp_path / "out.pgm").read_bytes().endswith(raw.tobytes())
    np.testing.assert_array_equal(load_image(tmp_path / "out.pgm"), load_image(src))


def test_unsupported_magic(tmp_path):
    f = _write(tmp_path / "c.pgm", b"P3\n1 1\n255\n0 0 0\n")
    with pytest.raises(UnsupportedFormatError, match="byte 0"):
        load_image(f)


def test_bad_header_names_field(tmp_path):
    f = _write(tmp_path / "d.pgm", b"P5\n4 x\n255\n")
    with pytest.raises(PGMHeaderError, match="height"):
        load_image(f)


def test_truncated_payload(tmp_path):
    f = _write(tmp_path / "e.pgm", b"P5\n4 4\n255\n" + bytes(10))
    with pytest.raises(TruncatedPayloadError, match="truncated"):
        load_image(f)


def test_encode_zero_image():
    data = imaging.encode_pgm(np.zeros((4, 4)))
    assert data == b"P5\n4 4\n255\n" + bytes(16)


@pytest.mark.parametrize("value,byte", [(0.5, 128), (1.0, 255), (0.0, 0), (1.7, 255), (-0.2, 0)])
def test_quantization(value, byte):
    assert imaging.to_bytes(np.array([value]))[0] == byte


def test_atomic_write_leaves_no_temp(tmp_path):
    imaging.atomic_write(tmp_path / "x.bin", b"abc")
    assert os.listdir(tmp_path) == ["x.bin"]


@pytest.mark.parametrize("shape,expected", [
    ((274, 384), (14, 18, 26, 468)),
    ((27, 27), (14, 1, 1, 1)),
    ((41, 41), (14, 2, 2, 4)),
])
def test_grid_geometry(shape, expected):
    g = make_grid(*shape, 27, 0.5)
    assert (g.stride, g.rows, g.cols, g.n_patches) == expected
    assert g.n_pixels == 729


def test_grid_rejects_bad_args():
    with pytest.raises(ValueError):
        make_grid(20, 20, 27, 0.5)
    with pytest.raises(ValueError):
        make_grid(40, 40, 27, 1.0)


def test_constant_image_constant_columns():
    g = make_grid(60, 50, 9, 0.5)
    pm = extract_patches(np.full((60, 50), 0.25), g)
    assert np.all(pm.values == 0.25)


def test_single_bright_pixel_in_one_patch():
    img = np.zeros((41, 41))
    img[0, 0] = 1
    pm = extract_patches(img, make_grid(41, 41, 27, 0.5))
    assert np.count_nonzero(pm.values.max(axis=0)) == 1
    assert pm.values[0, 0] == 1


def test_column_order_and_in_patch_layout():
    img = np.arange(41 * 41, dtype=float).reshape(41, 41)
    g = make_grid(41, 41, 27, 0.5)
    pm = extract_patches(img, g)
    # column 1 is patch (row 1, col 0); its second entry is one row down
    assert pm.values[0, 1] == img[14, 0]
    assert pm.values[1, 0] == img[1, 0]
    assert pm.values[27, 0] == img[0, 1]


def test_overlap_averaging():
    g = make_grid(27, 41, 27, 0.5)  # two patches side by side, overlap cols 14..26
    vals = np.hstack([np.full((729, 1), 1.0), np.full((729, 1), 3.0)])
    img, cov = reconstruct_from_patches(PatchMatrix(vals, g))
    assert np.all(img[:, :14] == 1) and np.all(img[:, 14:27] == 2) and np.all(img[:, 27:] == 3)
    assert cov.sum() == 2 * 729


def test_uncovered_margin():
    g = make_grid(274, 384, 27, 0.5)
    img, cov = reconstruct_from_patches(extract_patches(np.ones((274, 384)), g))
    assert g.covered_h == 265 and g.covered_w == 377
    assert np.all(cov[265:, :] == 0) and np.all(cov[:, 377:] == 0)
    assert np.all(cov[:265, :377] > 0)
    assert np.all(img[265:, :] == 0)
    assert cov.sum() == g.n_patches * g.n_pixels


@settings(max_examples=50, deadline=None)
@given(h=st.integers(10, 70), w=st.integers(10, 70), p=st.integers(3, 10),
       overlap=st.sampled_from([0.0, 0.25, 0.5, 0.75]), seed=st.integers(0, 2**32 - 1))
def test_round_trip_exact_on_covered(h, w, p, overlap, seed):
    img = np.random.default_rng(seed).random((h, w))
    g = make_grid(h, w, p, overlap)
    rec, cov = reconstruct_from_patches(extract_patches(img, g))
    assert np.abs(rec - img)[cov > 0].max() <= 1e-12
    ref_img, ref_cov = oracles.reconstruct_loop(extract_patches(img, g).values, p, g.stride,
                                                g.rows, g.cols, h, w)
    np.testing.assert_array_equal(cov, ref_cov)


def test_exclusion():
    g = make_grid(41, 41, 27, 0.5)
    assert exclude_annotated_patches(g, np.zeros((0, 2))).all()
    np.testing.assert_array_equal(exclude_annotated_patches(g, [(0, 0)]), [False, True, True, True])
    assert not exclude_annotated_patches(g, [(20, 20)]).any()
    with pytest.raises(ValueError, match="annotation 1"):
        exclude_annotated_patches(g, [(1, 1), (41, 3)])
