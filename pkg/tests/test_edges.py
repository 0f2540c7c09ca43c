"""Canny edge-map geometry and invariants."""

import numpy as np
import pytest
from scipy import ndimage

from hdrforge import InvalidArgumentError, LdrImage, canny


def _step(side=32, boundary=16):
    arr = np.zeros((side, side, 3), dtype=np.uint8)
    arr[:, boundary:] = 255
    return LdrImage(arr)


def test_constant_image_has_no_edges():
    img = LdrImage(np.full((16, 16, 3), 77, dtype=np.uint8))
    e = canny(img)
    assert e.shape == (16, 16)
    assert e.dtype == np.uint8
    assert not e.any()


def test_vertical_step_yields_single_one_pixel_wide_edge():
    e = canny(_step())
    # one pixel per row, all in the same column, hugging the 15/16 boundary
    np.testing.assert_array_equal(e.sum(axis=1), np.ones(32, dtype=np.uint64))
    cols = np.unique(np.nonzero(e)[1])
    assert cols.size == 1
    assert cols[0] in (15, 16)
    _, count = ndimage.label(e, structure=np.ones((3, 3), dtype=np.int8))
    assert count == 1


def test_output_is_binary_on_random_input():
    rng = np.random.default_rng(0)
    img = LdrImage(rng.integers(0, 256, (20, 20, 3), dtype=np.uint8))
    e = canny(img)
    assert e.dtype == np.uint8
    assert set(np.unique(e)) <= {0, 1}


def test_depends_only_on_grayscale_content():
    # Integer-equal weights make the gray reduction exactly invariant under
    # channel permutation, so the maps must match bit for bit.
    rng = np.random.default_rng(3)
    data = rng.integers(0, 256, (24, 24, 3), dtype=np.uint8)
    weights = (1.0, 1.0, 1.0)
    base = canny(LdrImage(data), luma_weights=weights)
    assert base.sum() > 0
    for perm in ((1, 2, 0), (2, 0, 1), (2, 1, 0)):
        shuffled = canny(LdrImage(data[..., perm]), luma_weights=weights)
        np.testing.assert_array_equal(shuffled, base)


def test_horizontal_step_mirrors_vertical_geometry():
    arr = np.zeros((32, 32, 3), dtype=np.uint8)
    arr[16:, :] = 255
    e = canny(LdrImage(arr))
    np.testing.assert_array_equal(e.sum(axis=0), np.ones(32, dtype=np.uint64))
    rows = np.unique(np.nonzero(e)[0])
    assert rows.size == 1 and rows[0] in (15, 16)


def test_threshold_and_sigma_validation():
    img = _step()
    with pytest.raises(InvalidArgumentError):
        canny(img, sigma=0.0)
    with pytest.raises(InvalidArgumentError):
        canny(img, sigma=-2.0)
    with pytest.raises(InvalidArgumentError):
        canny(img, low=0.0, high=0.2)
    with pytest.raises(InvalidArgumentError):
        canny(img, low=0.3, high=0.2)
    with pytest.raises(InvalidArgumentError):
        canny(img, low=0.1, high=1.5)
