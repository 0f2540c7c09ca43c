"""Response recovery: sampling, the least-squares solve, polynomial fit, PAV."""

import numpy as np
import pytest
from scipy.optimize import isotonic_regression

from conftest import GAMMA, gamma_camera_stack, gamma_response, lattice_samples
from hdrforge import (
    ExposureStack,
    InsufficientDataError,
    InvalidArgumentError,
    LdrImage,
    RelaxedImage,
    ResponseCurve,
    SampleSet,
    fit_polynomial_crf,
    isotonic_nondecreasing,
    project_monotone,
    sample_pixels,
    solve_debevec,
)


# ---------------------------------------------------------------------------
# SampleSet


def test_sampleset_validation():
    good = SampleSet(((0, 0, 0),), np.array([[1.0, 2.0]]), [0.0, 1.0])
    assert good.num_samples == 1 and good.num_exposures == 2
    with pytest.raises(InvalidArgumentError):
        SampleSet(((0, 0, 0),), np.array([1.0, 2.0]), [0.0, 1.0])      # 1-D values
    with pytest.raises(InvalidArgumentError):
        SampleSet(((0, 0, 0), (1, 0, 0)), np.array([[1.0, 2.0]]), [0.0, 1.0])
    with pytest.raises(InvalidArgumentError):
        SampleSet(((0, 0, 0),), np.array([[1.0, 2.0]]), [0.0])
    with pytest.raises(InvalidArgumentError):
        SampleSet(((0, 0, 0),), np.array([[1.0, 256.0]]), [0.0, 1.0])
    with pytest.raises(InvalidArgumentError):
        SampleSet(((0, 0, 0),), np.array([[1.0, 2.0]]), [1.0, 0.0])    # EVs not increasing
    with pytest.raises(InvalidArgumentError):
        SampleSet(((0, 0, 5),), np.array([[1.0, 2.0]]), [0.0, 1.0])    # bad channel


def test_sampleset_channel_rows():
    coords = ((0, 0, 0), (1, 0, 2), (0, 1, 0))
    s = SampleSet(coords, np.zeros((3, 2)), [0.0, 1.0])
    np.testing.assert_array_equal(s.channel_rows(0), [0, 2])
    np.testing.assert_array_equal(s.channel_rows(2), [1])
    assert s.channel_rows(1).size == 0


# ---------------------------------------------------------------------------
# sample_pixels


def _two_frame_stack(ref: np.ndarray) -> ExposureStack:
    other = np.clip(ref.astype(np.int64) + 1, 0, 255).astype(np.uint8)
    return ExposureStack((LdrImage(ref), LdrImage(other)), [0.0, 1.0])


def test_sample_pixels_strided_pick_is_deterministic():
    ref = np.zeros((4, 4, 3), dtype=np.uint8)
    # level 7 at five row-major positions in channel 0 of the reference
    spots = [(0, 1), (0, 3), (1, 2), (2, 0), (3, 3)]
    for y, x in spots:
        ref[y, x, 0] = 7
    stack = _two_frame_stack(ref)
    samples = sample_pixels(stack, per_level=2, reference_index=0)
    got = [c for c in samples.coords if c[2] == 0]
    # five matches, stride picks row-major indices (0*5)//2 = 0 and (1*5)//2 = 2
    picked = [(x, y) for x, y in ((spots[0][1], spots[0][0]), (spots[2][1], spots[2][0]))]
    assert [(x, y) for x, y, _ in got if ref[y, x, 0] == 7] == picked
    again = sample_pixels(stack, per_level=2, reference_index=0)
    assert samples.coords == again.coords
    np.testing.assert_array_equal(samples.values, again.values)


def test_sample_pixels_values_come_from_the_stack():
    rng = np.random.default_rng(3)
    ref = rng.integers(0, 256, (6, 5, 3), dtype=np.uint8)
    stack = _two_frame_stack(ref)
    samples = sample_pixels(stack, per_level=3)
    data = stack.as_array()
    for (x, y, c), row in zip(samples.coords, samples.values):
        np.testing.assert_array_equal(row, data[:, y, x, c])
    np.testing.assert_array_equal(samples.evs, stack.evs)


def test_sample_pixels_takes_all_when_few_matches():
    ref = np.zeros((2, 2, 3), dtype=np.uint8)
    samples = sample_pixels(_two_frame_stack(ref), per_level=64)
    assert samples.num_samples == 12  # 4 pixels x 3 channels, one level each


def test_sample_pixels_default_reference_is_middle():
    frames = tuple(LdrImage(np.full((2, 2, 3), v, dtype=np.uint8)) for v in (10, 70, 200))
    stack = ExposureStack(frames, [0.0, 1.0, 2.0])
    samples = sample_pixels(stack, per_level=1)
    assert {tuple(v) for v in samples.values} == {(10.0, 70.0, 200.0)}


def test_sample_pixels_argument_errors():
    stack = _two_frame_stack(np.zeros((2, 2, 3), dtype=np.uint8))
    with pytest.raises(InvalidArgumentError):
        sample_pixels(stack, per_level=0)
    with pytest.raises(InvalidArgumentError):
        sample_pixels(stack, reference_index=5)
    with pytest.raises(InsufficientDataError):
        sample_pixels(ExposureStack((stack.images[0],), [0.0]))
    relaxed = ExposureStack(tuple(RelaxedImage(im.data.astype(float)) for im in stack.images),
                            stack.evs)
    with pytest.raises(InvalidArgumentError):
        sample_pixels(relaxed)


# ---------------------------------------------------------------------------
# solve_debevec


def test_consistent_lattice_reaches_zero_residual():
    samples, alpha = lattice_samples()
    solution = solve_debevec(samples, smoothness=0.0)
    assert solution.data_residual < 1e-10
    # levels observed with nonzero weight are recovered exactly (anchor 128)
    z = np.arange(31, 211)
    for channel in range(3):
        np.testing.assert_allclose(solution.curve.g[z, channel],
                                   alpha * (z - 128.0), atol=1e-9)
    # recovered per-sample irradiance matches the construction up to the anchor
    base = samples.values[:, 0]
    np.testing.assert_allclose(solution.log_irradiance, alpha * (base - 128.0), atol=1e-9)


def test_lattice_solves_under_uniform_weighting_too():
    samples, _ = lattice_samples()
    assert solve_debevec(samples, smoothness=0.0, weighting="none").data_residual < 1e-10


def test_zero_weight_extremes_ignore_corrupt_saturated_values():
    # a 255 observation widens the z span, so the set needs extra density to
    # stay past the sufficiency bound; its weight is 0 under "none"
    samples, _ = lattice_samples(extra_dups=60)
    values = samples.values.copy()
    values[5, 2] = 255.0  # wildly inconsistent with the lattice
    corrupted = SampleSet(samples.coords, values, samples.evs)
    assert solve_debevec(corrupted, smoothness=0.0, weighting="none").data_residual < 1e-10


def test_smoothness_flattens_the_curve():
    samples, _ = lattice_samples()
    rng = np.random.default_rng(2)
    noisy_values = np.clip(samples.values + rng.integers(-1, 2, samples.values.shape),
                           30, 211)  # keep the observed span unchanged
    noisy = SampleSet(samples.coords, noisy_values, samples.evs)
    rough = solve_debevec(noisy, smoothness=0.0)
    smooth = solve_debevec(noisy, smoothness=1000.0)

    def curvature(curve):
        g = curve.g[31:210, 0]
        return float(np.sum(np.diff(g, 2) ** 2))

    assert curvature(smooth.curve) < curvature(rough.curve)
    assert smooth.data_residual >= rough.data_residual


def test_anchor_is_exactly_zero():
    samples, _ = lattice_samples()
    for anchor in (100, 128, 140):
        solution = solve_debevec(samples, smoothness=0.0, anchor_index=anchor)
        np.testing.assert_array_equal(solution.curve.g[anchor], 0.0)
        assert solution.curve.anchor_index == anchor


def test_diagnostics_shape():
    samples, _ = lattice_samples()
    solution = solve_debevec(samples, smoothness=0.0)
    for channel in range(3):
        diag = solution.diagnostics[channel]
        assert isinstance(diag["rank"], int)
        assert isinstance(diag["condition"], float)
        assert diag["rows"] == samples.num_samples // 3
        assert diag["z_range"] == (30, 211)


def test_insufficient_observations_for_span():
    # 2 rows x (3-1) exposures = 4 observations against a [0, 255] span
    coords = tuple((i, 0, c) for c in range(3) for i in range(2))
    values = np.tile(np.array([[0.0, 128.0, 255.0], [3.0, 130.0, 251.0]]), (3, 1))
    samples = SampleSet(coords, values, [0.0, 1.0, 2.0])
    with pytest.raises(InsufficientDataError):
        solve_debevec(samples)


def test_missing_channel_is_insufficient():
    samples = SampleSet(((0, 0, 0),), np.array([[10.0, 12.0]]), [0.0, 1.0])
    with pytest.raises(InsufficientDataError):
        solve_debevec(samples)


def test_solver_argument_errors():
    samples, _ = lattice_samples()
    with pytest.raises(InvalidArgumentError):
        solve_debevec(samples, smoothness=-1.0)
    with pytest.raises(InvalidArgumentError):
        solve_debevec(samples, weighting="gaussian")
    with pytest.raises(InvalidArgumentError):
        solve_debevec(samples, anchor_index=300)
    fractional = SampleSet(samples.coords, samples.values + 0.5, samples.evs)
    with pytest.raises(InvalidArgumentError):
        solve_debevec(fractional)
    single = SampleSet(((0, 0, 0),), np.array([[1.0]]), [0.0])
    with pytest.raises(InsufficientDataError):
        solve_debevec(single)


# ---------------------------------------------------------------------------
# polynomial response


def test_polynomial_fit_recovers_gamma():
    rng = np.random.default_rng(42)
    stack = gamma_camera_stack(rng)
    samples = sample_pixels(stack, per_level=2)
    poly = fit_polynomial_crf(samples, 3)
    z = np.arange(256) / 255.0
    truth = z ** GAMMA  # normalized exposure with f(1) = 1
    for channel in range(3):
        assert np.abs(poly(z, channel) - truth).max() < 0.01
    # the f(1) = 1 normalization is built into the parameterization
    for channel in range(3):
        assert poly(1.0, channel) == pytest.approx(1.0, abs=1e-12)
        assert poly.coeffs[:, channel].sum() == pytest.approx(1.0, abs=1e-12)


def test_polynomial_excludes_saturated_pairs():
    rng = np.random.default_rng(8)
    stack = gamma_camera_stack(rng, side=48, log_e_range=(-4.5, 2.5))  # plenty clipped
    samples = sample_pixels(stack, per_level=2)
    assert (samples.values == 255).any()
    poly = fit_polynomial_crf(samples, 3)
    z = np.arange(1, 256) / 255.0
    for channel in range(3):
        assert np.abs(poly(z, channel) - z ** GAMMA).max() < 0.02


def test_polynomial_errors():
    samples, _ = lattice_samples()
    with pytest.raises(InvalidArgumentError):
        fit_polynomial_crf(samples, 0)
    with pytest.raises(InvalidArgumentError):
        fit_polynomial_crf(samples, 10)
    # all observations saturated pairwise -> nothing to fit
    coords = tuple((i, 0, c) for c in range(3) for i in range(4))
    values = np.tile(np.array([[0.0, 255.0]]), (12, 1))
    starved = SampleSet(coords, values, [0.0, 1.0])
    with pytest.raises(InsufficientDataError):
        fit_polynomial_crf(starved, 2)


# ---------------------------------------------------------------------------
# monotone projection


def test_isotonic_matches_scipy_pav():
    rng = np.random.default_rng(11)
    for _ in range(20):
        y = rng.normal(0, 3, int(rng.integers(1, 40)))
        got = isotonic_nondecreasing(y)
        want = isotonic_regression(y).x
        np.testing.assert_allclose(got, want, atol=1e-10)
        assert np.all(np.diff(got) >= -1e-12)


def test_isotonic_identity_on_sorted_input():
    y = np.array([1.0, 1.0, 2.5, 7.0])
    np.testing.assert_array_equal(isotonic_nondecreasing(y), y)


def test_project_monotone_reanchors():
    g = gamma_response().g.copy()
    g[40, 0] = g[39, 0] - 0.5  # one dent in the red channel
    g[128] = 0.0
    dented = ResponseCurve(g, 128)
    projected = project_monotone(dented)
    assert np.all(np.diff(projected.g, axis=0) >= -1e-12)
    np.testing.assert_array_equal(projected.g[128], 0.0)
    assert projected.anchor_index == 128


def test_project_monotone_is_identity_on_monotone_curves():
    curve = gamma_response()
    projected = project_monotone(curve)
    np.testing.assert_allclose(projected.g, curve.g, atol=1e-12)
