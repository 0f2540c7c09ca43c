"""Containers, rounding, quantization, luminance, and stack plumbing."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hdrforge import (
    LUMA_WEIGHTS,
    ExposureStack,
    HdrImage,
    InvalidArgumentError,
    LdrImage,
    RelaxedImage,
    luminance,
    quantize,
    relax,
    round_half_away,
)

LN2 = float(np.log(2.0))


def _rgb(h=2, w=2, value=0, dtype=np.uint8):
    return np.full((h, w, 3), value, dtype=dtype)


# ---------------------------------------------------------------------------
# round_half_away


@pytest.mark.parametrize("value, expected", [
    (0.5, 1.0), (1.5, 2.0), (2.5, 3.0), (127.5, 128.0),
    (-0.5, -1.0), (-1.5, -2.0), (-2.5, -3.0),
    (2.4, 2.0), (2.6, 3.0), (-2.4, -2.0), (0.0, 0.0),
])
def test_round_half_away_pinned(value, expected):
    assert round_half_away(value) == expected


@given(st.integers(min_value=-10_000, max_value=10_000))
def test_round_half_away_matches_manual_halves(n):
    # n + 0.5 always rounds away from zero, never to even
    x = n + 0.5
    expected = n + 1 if n >= 0 else n
    assert round_half_away(x) == expected


def test_round_half_away_vectorized():
    out = round_half_away(np.array([0.5, -0.5, 1.49]))
    np.testing.assert_array_equal(out, [1.0, -1.0, 1.0])


# ---------------------------------------------------------------------------
# containers


def test_ldr_accepts_uint8_and_freezes():
    img = LdrImage(_rgb(value=7))
    assert img.data.dtype == np.uint8
    assert img.height == 2 and img.width == 2
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 1


def test_ldr_accepts_in_range_wider_integers():
    img = LdrImage(_rgb(value=200, dtype=np.int32))
    assert img.data.dtype == np.uint8
    assert int(img.data[0, 0, 0]) == 200


@pytest.mark.parametrize("bad", [
    np.zeros((2, 2, 3)),                      # float data
    np.full((2, 2, 3), 256, dtype=np.int32),  # out of range
    np.full((2, 2, 3), -1, dtype=np.int32),
])
def test_ldr_rejects_bad_values(bad):
    with pytest.raises(InvalidArgumentError):
        LdrImage(bad)


@pytest.mark.parametrize("shape", [(2, 2), (2, 2, 4), (0, 2, 3), (2, 0, 3)])
def test_containers_reject_bad_shapes(shape):
    for cls in (LdrImage, RelaxedImage, HdrImage):
        with pytest.raises(InvalidArgumentError):
            cls(np.zeros(shape, dtype=np.uint8 if cls is LdrImage else np.float64))


def test_relaxed_domain():
    RelaxedImage(np.full((1, 1, 3), 255.0))
    RelaxedImage(np.zeros((1, 1, 3)))
    with pytest.raises(InvalidArgumentError):
        RelaxedImage(np.full((1, 1, 3), 255.0001))
    with pytest.raises(InvalidArgumentError):
        RelaxedImage(np.full((1, 1, 3), -0.0001))
    with pytest.raises(InvalidArgumentError):
        RelaxedImage(np.full((1, 1, 3), np.nan))


def test_hdr_domain():
    HdrImage(np.full((1, 1, 3), 1e30))
    with pytest.raises(InvalidArgumentError):
        HdrImage(np.full((1, 1, 3), -1e-9))
    with pytest.raises(InvalidArgumentError):
        HdrImage(np.full((1, 1, 3), np.inf))


def test_quantize_pinned_values():
    img = RelaxedImage(np.array([[[127.5, 127.49, 0.0]]]))
    out = quantize(img)
    np.testing.assert_array_equal(out.data, [[[128, 127, 0]]])


def test_quantize_relax_round_trip_on_integers():
    rng = np.random.default_rng(0)
    img = LdrImage(rng.integers(0, 256, (5, 4, 3), dtype=np.uint8))
    again = quantize(relax(img))
    np.testing.assert_array_equal(again.data, img.data)
    assert relax(img).data.dtype == np.float64


# ---------------------------------------------------------------------------
# luminance


def test_luminance_pinned_single_channels():
    red = HdrImage(np.array([[[1.0, 0.0, 0.0]]]))
    assert luminance(red)[0, 0] == pytest.approx(0.2126, abs=1e-12)
    green = HdrImage(np.array([[[0.0, 1.0, 0.0]]]))
    assert luminance(green)[0, 0] == pytest.approx(0.7152, abs=1e-12)


def test_luminance_is_linear_combination():
    rng = np.random.default_rng(1)
    arr = rng.uniform(0, 10, (4, 6, 3))
    expected = arr @ np.asarray(LUMA_WEIGHTS)
    np.testing.assert_allclose(luminance(HdrImage(arr)), expected, rtol=0, atol=1e-12)
    np.testing.assert_allclose(luminance(arr), expected, rtol=0, atol=1e-12)


def test_luminance_accepts_every_container():
    ldr = LdrImage(_rgb(value=100))
    for img in (ldr, relax(ldr), HdrImage(ldr.data.astype(np.float64))):
        lum = luminance(img)
        assert lum.shape == (2, 2)
        assert lum[0, 0] == pytest.approx(100.0)


# ---------------------------------------------------------------------------
# ExposureStack


def test_stack_stops_convert_to_natural_log():
    frames = tuple(LdrImage(_rgb()) for _ in range(3))
    stack = ExposureStack(frames, [-2.0, 0.0, 2.0], "stops")
    np.testing.assert_allclose(stack.evs, [-2 * LN2, 0.0, 2 * LN2], atol=1e-15)
    assert len(stack) == 3
    assert stack.height == 2 and stack.width == 2


def test_stack_natural_log_is_default():
    stack = ExposureStack((LdrImage(_rgb()), LdrImage(_rgb())), [0.0, 1.0])
    np.testing.assert_array_equal(stack.evs, [0.0, 1.0])


def test_stack_requires_increasing_evs():
    frames = (LdrImage(_rgb()), LdrImage(_rgb()))
    with pytest.raises(InvalidArgumentError):
        ExposureStack(frames, [1.0, 1.0])
    with pytest.raises(InvalidArgumentError):
        ExposureStack(frames, [1.0, 0.0])


def test_stack_rejects_mixed_kinds_and_shapes():
    with pytest.raises(InvalidArgumentError):
        ExposureStack((LdrImage(_rgb()), RelaxedImage(np.zeros((2, 2, 3)))), [0.0, 1.0])
    with pytest.raises(InvalidArgumentError):
        ExposureStack((LdrImage(_rgb(2, 2)), LdrImage(_rgb(2, 3))), [0.0, 1.0])
    with pytest.raises(InvalidArgumentError):
        ExposureStack((), [])
    with pytest.raises(InvalidArgumentError):
        ExposureStack((HdrImage(np.zeros((2, 2, 3))),), [0.0])


def test_stack_rejects_unknown_unit():
    with pytest.raises(InvalidArgumentError):
        ExposureStack((LdrImage(_rgb()),), [0.0], "millistops")


def test_stack_as_array_and_relaxed():
    frames = tuple(LdrImage(_rgb(value=v)) for v in (10, 20))
    stack = ExposureStack(frames, [0.0, LN2])
    arr = stack.as_array()
    assert arr.shape == (2, 2, 2, 3) and arr.dtype == np.float64
    lifted = stack.relaxed()
    assert isinstance(lifted.images[0], RelaxedImage)
    np.testing.assert_array_equal(lifted.as_array(), arr)
    np.testing.assert_array_equal(lifted.evs, stack.evs)
    assert lifted.relaxed() is lifted
