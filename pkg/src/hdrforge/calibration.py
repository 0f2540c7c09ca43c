"""Radiometric calibration: recovering the inverse camera response.

The central solver estimates the tabulated inverse log-response g[0..255]
jointly with one log-irradiance per sample by linear least squares, using
the residual form

    w(Z_ij) * (g(Z_ij) - ln E_i - EV_j)

plus a second-difference smoothness term lambda * sum_z [w(z) * g''(z)]^2
and the hard anchor g[anchor_index] = 0 (the anchor column is eliminated
from the system, so the constraint holds exactly).  A polynomial-response
fit against known exposure ratios and an isotonic projection onto monotone
curves round out the module.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    InsufficientDataError,
    InvalidArgumentError,
    NumericalFailureError,
)
from .image import ExposureStack, LdrImage

NUM_LEVELS = 256
DEFAULT_ANCHOR = 128
DEFAULT_SMOOTHNESS = 100.0


@dataclass(frozen=True)
class SampleSet:
    """Pixel observations for calibration.

    Each row is one (location, channel) sample observed across all exposures:
    ``coords[i]`` is ``(x, y, channel)`` and ``values[i, j]`` the intensity at
    exposure ``j``.  ``evs`` are log-exposure offsets in natural-log units.
    """

    coords: tuple
    values: np.ndarray
    evs: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        evs = np.asarray(self.evs, dtype=np.float64).reshape(-1)
        coords = tuple(tuple(int(v) for v in c) for c in self.coords)
        if values.ndim != 2:
            raise InvalidArgumentError(f"values must be 2-D (N, P), got shape {values.shape}")
        n, p = values.shape
        if len(coords) != n:
            raise InvalidArgumentError(f"{len(coords)} coords for {n} sample rows")
        if evs.size != p:
            raise InvalidArgumentError(f"{evs.size} EVs for {p} exposures")
        if not np.all(np.isfinite(values)) or values.min() < 0 or values.max() > 255:
            raise InvalidArgumentError("sample values must be finite and within [0, 255]")
        if not np.all(np.isfinite(evs)) or (p > 1 and not np.all(np.diff(evs) > 0)):
            raise InvalidArgumentError("EVs must be finite and strictly increasing")
        if any(len(c) != 3 or c[2] not in (0, 1, 2) for c in coords):
            raise InvalidArgumentError("coords must be (x, y, channel) with channel in 0..2")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "evs", evs)

    @property
    def num_samples(self) -> int:
        return self.values.shape[0]

    @property
    def num_exposures(self) -> int:
        return self.values.shape[1]

    def channel_rows(self, channel: int) -> np.ndarray:
        return np.array([i for i, c in enumerate(self.coords) if c[2] == channel], dtype=np.int64)


@dataclass(frozen=True)
class ResponseCurve:
    """Tabulated inverse log-response, g[z, channel], anchored to zero."""

    g: np.ndarray
    anchor_index: int = DEFAULT_ANCHOR

    def __post_init__(self):
        g = np.asarray(self.g, dtype=np.float64)
        if g.shape != (NUM_LEVELS, 3):
            raise InvalidArgumentError(f"g must have shape (256, 3), got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise InvalidArgumentError("response values must be finite")
        if not 0 <= self.anchor_index <= 255:
            raise InvalidArgumentError(f"anchor_index {self.anchor_index} outside [0, 255]")
        if np.any(g[self.anchor_index] != 0.0):
            raise InvalidArgumentError("g[anchor_index] must be exactly zero")
        g = np.ascontiguousarray(g)
        g.flags.writeable = False
        object.__setattr__(self, "g", g)


@dataclass(frozen=True)
class PolynomialResponse:
    """Per-channel polynomial mapping normalized intensity to linear exposure."""

    coeffs: np.ndarray  # (order + 1, 3), constant term first
    order: int

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if not 1 <= self.order <= 9:
            raise InvalidArgumentError(f"polynomial order must be in [1, 9], got {self.order}")
        if coeffs.shape != (self.order + 1, 3):
            raise InvalidArgumentError(f"coeffs must have shape ({self.order + 1}, 3), got {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise InvalidArgumentError("coefficients must be finite")
        coeffs = np.ascontiguousarray(coeffs)
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    def __call__(self, normalized: np.ndarray, channel: int) -> np.ndarray:
        z = np.asarray(normalized, dtype=np.float64)
        out = np.zeros_like(z)
        for c in self.coeffs[::-1, channel]:   # Horner, highest term first
            out = out * z + c
        return out


@dataclass(frozen=True)
class DebevecSolution:
    """Solver output: the curve, per-sample log irradiance, and diagnostics."""

    curve: ResponseCurve
    log_irradiance: np.ndarray          # (N,), aligned with SampleSet rows
    data_residual: float                # sum of squared weighted data residuals
    diagnostics: dict                   # per-channel rank / condition / row counts


def sample_pixels(stack: ExposureStack, per_level: int = 2,
                  reference_index: int | None = None) -> SampleSet:
    """Deterministically pick calibration samples from a bracketed stack.

    For every intensity level present in the reference image (per channel),
    up to ``per_level`` locations are chosen: all of them when few enough,
    otherwise a strided subset of the row-major matches starting at the first.
    """
    if per_level < 1:
        raise InvalidArgumentError(f"per_level must be >= 1, got {per_level}")
    if len(stack) < 2:
        raise InsufficientDataError("calibration sampling needs at least two exposures")
    if not isinstance(stack.images[0], LdrImage):
        raise InvalidArgumentError("sampling requires an LDR (integer-valued) stack")
    if reference_index is None:
        reference_index = len(stack) // 2
    if not 0 <= reference_index < len(stack):
        raise InvalidArgumentError(f"reference_index {reference_index} outside stack of {len(stack)}")

    width = stack.width
    data = stack.as_array()  # (P, H, W, 3)
    coords: list[tuple[int, int, int]] = []
    rows: list[np.ndarray] = []
    for channel in range(3):
        ref = stack.images[reference_index].data[:, :, channel].reshape(-1)
        for level in np.unique(ref):
            matches = np.flatnonzero(ref == level)
            if matches.size > per_level:
                pick = matches[(np.arange(per_level) * matches.size) // per_level]
            else:
                pick = matches
            for pos in pick:
                y, x = divmod(int(pos), width)
                coords.append((x, y, channel))
                rows.append(data[:, y, x, channel])
    return SampleSet(tuple(coords), np.array(rows), stack.evs)


def _hat_weights(z_min: int, z_max: int) -> np.ndarray:
    """Debevec hat over the observed range; zero at both extremes."""
    z = np.arange(NUM_LEVELS, dtype=np.float64)
    w = np.where(z <= 0.5 * (z_min + z_max), z - z_min, z_max - z)
    return np.maximum(w, 0.0)


def _solve_channel(values: np.ndarray, evs: np.ndarray, smoothness: float,
                   weighting: str, anchor_index: int):
    n, p = values.shape
    z = values.astype(np.int64)
    z_min = int(z.min())
    z_max = int(z.max())
    if n * (p - 1) < max(1, 2 * (z_max - z_min)):
        raise InsufficientDataError(
            f"{n} samples x {p} exposures cannot constrain a response spanning "
            f"[{z_min}, {z_max}]; need N*(P-1) >= 2*(Zmax-Zmin)")

    if weighting == "hat":
        table = _hat_weights(z_min, z_max)
        w = table[z]
    elif weighting == "none":
        table = np.ones(NUM_LEVELS)
        w = np.where((z == 0) | (z == 255), 0.0, 1.0)  # drop saturated samples
    else:
        raise InvalidArgumentError(f"unknown weighting {weighting!r}")

    n_smooth = max(0, z_max - z_min - 1)
    a = np.zeros((n * p + n_smooth, NUM_LEVELS + n))
    b = np.zeros(n * p + n_smooth)

    row = np.arange(n * p)
    a[row, z.reshape(-1)] = w.reshape(-1)
    a[row, NUM_LEVELS + np.repeat(np.arange(n), p)] = -w.reshape(-1)
    b[row] = (w * evs[None, :]).reshape(-1)

    if n_smooth:
        sl = np.sqrt(smoothness) * table[np.arange(z_min + 1, z_max)]
        srow = n * p + np.arange(n_smooth)
        scol = np.arange(z_min + 1, z_max)
        a[srow, scol - 1] = sl
        a[srow, scol] = -2.0 * sl
        a[srow, scol + 1] = sl

    # Hard anchor: remove the column so g[anchor] = 0 holds exactly.
    a_red = np.delete(a, anchor_index, axis=1)
    try:
        x, _, rank, sv = np.linalg.lstsq(a_red, b, rcond=None)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"least-squares solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise NumericalFailureError("least-squares solve produced non-finite values")

    g = np.insert(x[:NUM_LEVELS - 1], anchor_index, 0.0)
    ln_e = x[NUM_LEVELS - 1:]
    residual = float(np.sum((w * (g[z] - ln_e[:, None] - evs[None, :])) ** 2))
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else float("inf")
    return g, ln_e, residual, {"rank": int(rank), "condition": cond,
                               "rows": n, "z_range": (z_min, z_max)}


def solve_debevec(samples: SampleSet, smoothness: float = DEFAULT_SMOOTHNESS,
                  weighting: str = "hat",
                  anchor_index: int = DEFAULT_ANCHOR) -> DebevecSolution:
    """Recover the inverse log-response from multi-exposure samples.

    Solves one rank-revealing least-squares system per channel; raises
    ``InsufficientDataError`` when a channel has too few observations for its
    intensity span and ``NumericalFailureError`` on a degenerate system.
    """
    if smoothness < 0:
        raise InvalidArgumentError(f"smoothness must be >= 0, got {smoothness}")
    if not 0 <= anchor_index <= 255:
        raise InvalidArgumentError(f"anchor_index {anchor_index} outside [0, 255]")
    if samples.num_exposures < 2:
        raise InsufficientDataError("response recovery needs at least two exposures")
    values = samples.values
    if np.any(values != np.floor(values)):
        raise InvalidArgumentError("solver requires integer sample intensities")

    g = np.zeros((NUM_LEVELS, 3))
    ln_e = np.zeros(samples.num_samples)
    residual = 0.0
    diagnostics = {}
    for channel in range(3):
        rows = samples.channel_rows(channel)
        if rows.size == 0:
            raise InsufficientDataError(f"no samples for channel {channel}")
        gc, le, res, diag = _solve_channel(values[rows], samples.evs,
                                           smoothness, weighting, anchor_index)
        g[:, channel] = gc
        ln_e[rows] = le
        residual += res
        diagnostics[channel] = diag
    curve = ResponseCurve(g, anchor_index)
    return DebevecSolution(curve, ln_e, residual, diagnostics)


def fit_polynomial_crf(samples: SampleSet, order: int) -> PolynomialResponse:
    """Fit a polynomial inverse response against known exposure ratios.

    Minimizes sum over adjacent exposure pairs of
    ``(f(M_ij) - r_j * f(M_i,j+1))^2`` in normalized intensity M = Z/255,
    under the normalization f(1) = 1.  Saturated observations (0 or 255)
    are excluded pairwise.
    """
    if not 1 <= order <= 9:
        raise InvalidArgumentError(f"polynomial order must be in [1, 9], got {order}")
    if samples.num_exposures < 2:
        raise InsufficientDataError("polynomial fit needs at least two exposures")

    ratios = np.exp(samples.evs[:-1] - samples.evs[1:])
    coeffs = np.zeros((order + 1, 3))
    for channel in range(3):
        rows = samples.channel_rows(channel)
        if rows.size == 0:
            raise InsufficientDataError(f"no samples for channel {channel}")
        vals = samples.values[rows]
        m_lo = vals[:, :-1] / 255.0
        m_hi = vals[:, 1:] / 255.0
        keep = (vals[:, :-1] > 0) & (vals[:, :-1] < 255) & (vals[:, 1:] > 0) & (vals[:, 1:] < 255)
        m_lo, m_hi, r = m_lo[keep], m_hi[keep], np.broadcast_to(ratios, keep.shape)[keep]
        if m_lo.size <= order:
            raise InsufficientDataError(
                f"channel {channel}: {m_lo.size} unsaturated pairs cannot fit order {order}")

        # d_k = M^k - r * M'^k; eliminate c_K via the constraint sum(c) = 1.
        powers = np.arange(order + 1)
        d = m_lo[:, None] ** powers[None, :] - r[:, None] * m_hi[:, None] ** powers[None, :]
        a = d[:, :order] - d[:, order:]
        b = -d[:, order]
        try:
            x, _, _, _ = np.linalg.lstsq(a, b, rcond=None)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailureError(f"polynomial fit failed: {exc}") from exc
        if not np.all(np.isfinite(x)):
            raise NumericalFailureError("polynomial fit produced non-finite coefficients")
        coeffs[:order, channel] = x
        coeffs[order, channel] = 1.0 - x.sum()
    return PolynomialResponse(coeffs, order)


def isotonic_nondecreasing(values: np.ndarray) -> np.ndarray:
    """L2 projection onto non-decreasing sequences (pool adjacent violators)."""
    values = np.asarray(values, dtype=np.float64)
    means = []   # block means, maintained non-decreasing
    counts = []
    for v in values:
        means.append(float(v))
        counts.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            total = means[-2] * counts[-2] + means[-1] * counts[-1]
            counts[-2] += counts[-1]
            means[-2] = total / counts[-2]
            means.pop()
            counts.pop()
    return np.repeat(means, counts)


def project_monotone(curve: ResponseCurve) -> ResponseCurve:
    """Nearest non-decreasing curve (per channel, L2), re-anchored to zero."""
    g = np.empty_like(curve.g)
    for channel in range(3):
        proj = isotonic_nondecreasing(curve.g[:, channel])
        g[:, channel] = proj - proj[curve.anchor_index]
    return ResponseCurve(g, curve.anchor_index)
