"""Differentiable HDR merge.

The tabulated inverse log-response is linearized into per-level segments:
slope s[0] = g[0] and s[z] = g[z] - g[z-1], so that the response can be
evaluated and differentiated at real-valued (relaxed) intensities.  Merging
averages ``g(Z_ij) - EV_j`` across exposures under detached per-intensity
weights, and the backward pass pushes a per-pixel upstream gradient (with
respect to log radiance) onto every stack entry:

    dL/dZ_ij = upstream_i * (w(Z_ij) / sum_k w(Z_ik)) * g'(Z_ij)

Weights are treated as constants: no gradient flows through w.
"""

from dataclasses import dataclass

import numpy as np

from .calibration import NUM_LEVELS, ResponseCurve
from .errors import InvalidArgumentError
from .image import ExposureStack, HdrImage, round_half_away


@dataclass(frozen=True)
class LinearizedResponse:
    """Piece-wise linear view of a response curve: values plus segment slopes."""

    g: np.ndarray       # (256, 3)
    slopes: np.ndarray  # (256, 3); slopes[0] = g[0], slopes[z] = g[z] - g[z-1]
    anchor_index: int

    def __post_init__(self):
        for name in ("g", "slopes"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.float64))
            if arr.shape != (NUM_LEVELS, 3):
                raise InvalidArgumentError(f"{name} must have shape (256, 3), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise InvalidArgumentError(f"{name} must be finite")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class WeightFunction:
    """Per-intensity merge weight, tabulated over the 8-bit range."""

    kind: str
    table: np.ndarray  # (256,)

    def __post_init__(self):
        table = np.ascontiguousarray(np.asarray(self.table, dtype=np.float64))
        if table.shape != (NUM_LEVELS,):
            raise InvalidArgumentError(f"weight table must have shape (256,), got {table.shape}")
        if not np.all(np.isfinite(table)) or table.min() < 0:
            raise InvalidArgumentError("weights must be finite and non-negative")
        table.flags.writeable = False
        object.__setattr__(self, "table", table)

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.table == self.table[0]) and self.table[0] > 0)


def hat_weights() -> WeightFunction:
    """Triangle weight over the full 8-bit range; zero at 0 and 255."""
    z = np.arange(NUM_LEVELS, dtype=np.float64)
    return WeightFunction("hat", np.minimum(z, 255.0 - z))


def uniform_weights() -> WeightFunction:
    return WeightFunction("uniform", np.ones(NUM_LEVELS))


def linearize(curve: ResponseCurve) -> LinearizedResponse:
    """Attach segment slopes to a tabulated response."""
    g = curve.g
    slopes = np.empty_like(g)
    slopes[0] = g[0]
    slopes[1:] = g[1:] - g[:-1]
    return LinearizedResponse(g, slopes, curve.anchor_index)


def _check_intensities(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.size and (not np.all(np.isfinite(z)) or z.min() < 0 or z.max() > 255):
        raise InvalidArgumentError("intensities must be finite and within [0, 255]")
    return z


def eval_g(lin: LinearizedResponse, z, channel: int | None = None):
    """Evaluate the linearized response at (possibly fractional) intensities.

    With ``channel=None`` the trailing axis of ``z`` must be 3 and each
    channel uses its own table; otherwise all of ``z`` is evaluated on one
    channel.  Integer inputs return the tabulated values exactly.
    """
    z = _check_intensities(z)
    scalar = np.isscalar(z) or z.ndim == 0
    z = np.atleast_1d(z)
    lo = np.floor(z).astype(np.int64)
    frac = z - lo
    hi = np.minimum(lo + 1, NUM_LEVELS - 1)
    if channel is None:
        if z.shape[-1] != 3:
            raise InvalidArgumentError("per-channel evaluation needs a trailing axis of 3")
        ch = np.broadcast_to(np.arange(3), z.shape)
        out = lin.g[lo, ch] + frac * lin.slopes[hi, ch]
    else:
        out = lin.g[lo, channel] + frac * lin.slopes[hi, channel]
    return float(out[0]) if scalar else out


def deriv_g(lin: LinearizedResponse, z, channel: int | None = None):
    """Slope of the active segment: s[max(1, ceil(z))] for z > 0, s[0] at z = 0."""
    z = _check_intensities(z)
    scalar = np.isscalar(z) or z.ndim == 0
    z = np.atleast_1d(z)
    idx = np.maximum(np.ceil(z).astype(np.int64), 1)
    idx = np.where(z == 0.0, 0, idx)
    if channel is None:
        if z.shape[-1] != 3:
            raise InvalidArgumentError("per-channel evaluation needs a trailing axis of 3")
        ch = np.broadcast_to(np.arange(3), z.shape)
        out = lin.slopes[idx, ch]
    else:
        out = lin.slopes[idx, channel]
    return float(out[0]) if scalar else out


def _merge_parts(z: np.ndarray, evs: np.ndarray, lin: LinearizedResponse,
                 weights: WeightFunction):
    """Shared forward bookkeeping: weights, weight sums, and log radiance."""
    lo = np.floor(z).astype(np.int64)
    frac = z - lo
    hi = np.minimum(lo + 1, NUM_LEVELS - 1)
    ch = np.broadcast_to(np.arange(3), z.shape)
    ghat = lin.g[lo, ch] + frac * lin.slopes[hi, ch]

    w = weights.table[round_half_away(z).astype(np.int64)]
    den = w.sum(axis=0)
    shifted = ghat - evs[:, None, None, None]
    clipped = den == 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        ln_e = np.where(clipped, shifted.mean(axis=0), (w * shifted).sum(axis=0) / np.where(clipped, 1.0, den))
    return w, den, clipped, ln_e


def merge(stack: ExposureStack, lin: LinearizedResponse,
          weights: WeightFunction) -> HdrImage:
    """Weighted-average radiance estimate, exp of the per-pixel mean log.

    Pixels whose weight sum is zero across all exposures (fully clipped under
    a hat weighting) fall back to a uniform average so the output stays
    defined everywhere.
    """
    z = stack.as_array()
    _, _, _, ln_e = _merge_parts(z, stack.evs, lin, weights)
    return HdrImage(np.exp(ln_e))


def merge_backward(stack: ExposureStack, lin: LinearizedResponse,
                   weights: WeightFunction, upstream: np.ndarray) -> np.ndarray:
    """Gradient of a scalar loss with respect to every stack intensity.

    ``upstream`` is dL/d(ln E) per output pixel, shape (H, W, 3).  The return
    value matches the stack layout (P, H, W, 3).  Fully clipped pixels use
    the same uniform coefficients the forward fallback used.
    """
    z = stack.as_array()
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != z.shape[1:]:
        raise InvalidArgumentError(
            f"upstream shape {upstream.shape} does not match image shape {z.shape[1:]}")
    w, den, clipped, _ = _merge_parts(z, stack.evs, lin, weights)
    coeff = np.where(clipped, 1.0 / len(stack), w / np.where(clipped, 1.0, den))

    idx = np.maximum(np.ceil(z).astype(np.int64), 1)
    idx = np.where(z == 0.0, 0, idx)
    ch = np.broadcast_to(np.arange(3), z.shape)
    deriv = lin.slopes[idx, ch]
    return upstream[None] * coeff * deriv


def grad_check(stack: ExposureStack, lin: LinearizedResponse,
               weights: WeightFunction, loss, num_points: int = 500,
               h: float = 0.25, seed: int = 0, tol: float = 1e-6) -> dict:
    """Compare the analytic merge gradient against central finite differences.

    ``loss`` maps an HdrImage to ``(value, gradient_wrt_radiance)``.  Sampled
    coordinates whose intensity lies within ``h`` of a segment breakpoint are
    skipped (the piecewise response is not differentiable there); with
    non-uniform weights, points within ``h`` of a half-integer are skipped as
    well, because the tabulated weight lookup switches levels there.
    """
    if not 0.0 < h < 0.5:
        raise InvalidArgumentError(f"step h must lie in (0, 0.5), got {h}")
    if num_points < 1:
        raise InvalidArgumentError("num_points must be >= 1")

    z = stack.as_array()
    merged = merge(stack, lin, weights)
    value, grad_e = loss(merged)
    upstream = np.asarray(grad_e, dtype=np.float64) * merged.data  # d ln E = dE / E
    analytic = merge_backward(stack, lin, weights, upstream)

    rng = np.random.default_rng(seed)
    checked = 0
    max_rel = 0.0
    failures: list[dict] = []
    attempts = 0
    max_attempts = 200 * num_points
    while checked < num_points and attempts < max_attempts:
        attempts += 1
        j = int(rng.integers(len(stack)))
        y = int(rng.integers(z.shape[1]))
        x = int(rng.integers(z.shape[2]))
        c = int(rng.integers(3))
        v = z[j, y, x, c]
        if v - h < 0.0 or v + h > 255.0:
            continue
        if abs(v - np.round(v)) < h:
            continue
        if not weights.is_uniform and abs(v * 2.0 - np.round(v * 2.0)) / 2.0 < h:
            continue

        def _loss_at(delta: float) -> float:
            zp = z.copy()
            zp[j, y, x, c] = v + delta
            images = tuple(type(stack.images[0])(zp[k]) for k in range(len(stack)))
            val, _ = loss(merge(ExposureStack(images, stack.evs), lin, weights))
            return val

        fd = (_loss_at(+h) - _loss_at(-h)) / (2.0 * h)
        an = analytic[j, y, x, c]
        denom = max(abs(fd), abs(an))
        rel = 0.0 if denom < 1e-12 else abs(fd - an) / denom
        checked += 1
        max_rel = max(max_rel, rel)
        if rel > tol:
            failures.append({"coord": (j, y, x, c), "analytic": float(an),
                             "fd": float(fd), "rel_err": float(rel)})
    return {"max_rel_err": float(max_rel), "num_checked": checked,
            "failures": failures, "loss": float(value)}
