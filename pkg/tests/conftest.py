"""Shared builders: analytic response curves and synthetic camera stacks.

Plain functions rather than fixtures so tests can parameterize them freely.
"""

import numpy as np

from hdrforge import (
    ExposureStack,
    LdrImage,
    RelaxedImage,
    ResponseCurve,
    SampleSet,
)

GAMMA = 2.2
LN2 = float(np.log(2.0))
LOG_SLOPE = LN2 / 32.0  # one stop per 32 intensity levels


def gamma_response() -> ResponseCurve:
    """Exact log-response of an ideal gamma-2.2 camera, anchored at 128.

    g(z) = 2.2 ln(z/128).  Level 0 is linearly extrapolated: a gamma camera
    never reports it for nonzero exposure, and the table must stay finite.
    """
    col = np.empty(256)
    col[1:] = GAMMA * np.log(np.arange(1, 256) / 128.0)
    col[0] = 2.0 * col[1] - col[2]
    return ResponseCurve(np.repeat(col[:, None], 3, axis=1), 128)


def log_response(slope: float = LOG_SLOPE) -> ResponseCurve:
    """Constant-slope log-response g(z) = slope * (z - 128)."""
    col = slope * (np.arange(256) - 128.0)
    return ResponseCurve(np.repeat(col[:, None], 3, axis=1), 128)


def gamma_camera_stack(rng, side=64, stops=(-2.0, 0.0, 2.0),
                       log_e_range=(-4.5, 1.2)) -> ExposureStack:
    """Quantized frames of a gamma-2.2 camera viewing random radiance.

    The log-radiance range is wide enough that, across the bracket, nearly
    every intensity level appears somewhere in the middle frame.
    """
    radiance = np.exp(rng.uniform(*log_e_range, (side, side, 3)))
    evs = [s * LN2 for s in stops]
    frames = []
    for ev in evs:
        exposure = np.clip(radiance * np.exp(ev), 0.0, 1.0)
        z = 255.0 * np.power(exposure, 1.0 / GAMMA)
        frames.append(LdrImage(np.clip(np.round(z), 0, 255).astype(np.uint8)))
    return ExposureStack(tuple(frames), evs)


def consistent_relaxed_stack(ref: np.ndarray, evs,
                             slope: float = LOG_SLOPE) -> ExposureStack:
    """Relaxed stack exactly consistent under ``log_response(slope)``.

    Frame j holds ref + ev_j / slope, so g(z_j) - ev_j is the same for every
    exposure.  The caller must keep ref far enough from 0/255 that no frame
    leaves the valid range.
    """
    evs = np.asarray(evs, dtype=np.float64)
    frames = tuple(RelaxedImage(ref + ev / slope) for ev in evs)
    return ExposureStack(frames, evs)


def lattice_samples(alpha: float = 0.1, extra_dups: int = 10) -> tuple[SampleSet, float]:
    """Calibration samples that an exact linear response fits with zero error.

    Row i observes levels base_i + {0, 6, 11} at EVs alpha * {0, 6, 11}, so
    g(z) = alpha * (z - 128) and ln E_i = alpha * (base_i - 128) satisfy every
    data equation exactly.  The offset gaps {5, 6, 11} are coprime, which ties
    all observed levels 30..211 into one connected component: the anchor pins
    the whole curve, not just one residue class.  Bases run 30..200 plus
    ``extra_dups`` duplicates; the default 181 rows per channel meets the
    2 * (211 - 30) = 362 observation minimum exactly.
    """
    base = np.resize(np.arange(30, 201), 171 + extra_dups)
    values_row = base[:, None] + np.array([0, 6, 11])[None, :]
    coords, values = [], []
    for channel in range(3):
        for i in range(base.size):
            coords.append((int(i % 60), int(i // 60), channel))
            values.append(values_row[i])
    evs = alpha * np.array([0.0, 6.0, 11.0])
    return SampleSet(tuple(coords), np.array(values, dtype=np.float64), evs), alpha
