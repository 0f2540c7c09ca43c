"""Lanczos-3 resampling.

Separable windowed-sinc resize with the conventions used throughout the
toolkit: pixel-center coordinate mapping, edge-clamp boundary handling, and
per-output-pixel kernel renormalization (so the weights form a partition of
unity and constants resample to themselves).  On downscale the kernel is
stretched by the inverse scale factor, i.e. the filter acts as an
antialiasing low-pass, matching mainstream resamplers.
"""

import numpy as np

from .errors import InvalidArgumentError
from .image import HdrImage, LdrImage, RelaxedImage, round_half_away

_A = 3  # Lanczos window half-width in filter units


def _lanczos_kernel(x: np.ndarray) -> np.ndarray:
    """L(x) = sinc(x) * sinc(x/a) on |x| < a, else 0."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    inside = np.abs(x) < _A
    xi = x[inside]
    with np.errstate(invalid="ignore", divide="ignore"):
        px = np.pi * xi
        val = _A * np.sin(px) * np.sin(px / _A) / (px * px)
    val = np.where(np.abs(xi) < 1e-12, 1.0, val)
    out[inside] = val
    return out


def _axis_weights(in_len: int, out_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Tap indices and normalized weights for one axis.

    Returns (idx, w), both of shape (out_len, taps); indices are clamped to
    the valid range and weight rows sum to one.
    """
    scale = out_len / in_len
    kscale = min(1.0, scale)         # stretch the kernel when minifying
    radius = _A / kscale
    src = (np.arange(out_len, dtype=np.float64) + 0.5) / scale - 0.5

    taps = int(np.ceil(2.0 * radius)) + 2
    start = np.floor(src - radius).astype(np.int64) + 1
    offsets = np.arange(taps, dtype=np.int64)
    idx = start[:, None] + offsets[None, :]
    w = _lanczos_kernel((idx - src[:, None]) * kscale)
    w = w / w.sum(axis=1, keepdims=True)
    idx = np.clip(idx, 0, in_len - 1)
    return idx, w


def _resize_axis(arr: np.ndarray, out_len: int, axis: int) -> np.ndarray:
    moved = np.moveaxis(arr, axis, 0)
    idx, w = _axis_weights(moved.shape[0], out_len)
    gathered = moved[idx]                      # (out_len, taps, ...)
    wshape = (out_len, idx.shape[1]) + (1,) * (gathered.ndim - 2)
    out = (gathered * w.reshape(wshape)).sum(axis=1)
    return np.moveaxis(out, 0, axis)


def resize_lanczos(image, width: int, height: int):
    """Resize to ``width`` x ``height``; returns the same image kind it was given.

    LDR results are rounded half-away-from-zero and clamped to [0, 255];
    relaxed and HDR results are clamped to their domains (the windowed sinc
    can overshoot on sharp transitions).
    """
    if not isinstance(image, (LdrImage, RelaxedImage, HdrImage)):
        raise InvalidArgumentError(f"cannot resize {type(image).__name__}")
    if width < 1 or height < 1:
        raise InvalidArgumentError(f"target size must be positive, got {width}x{height}")

    arr = image.data.astype(np.float64)
    arr = _resize_axis(arr, width, axis=1)
    arr = _resize_axis(arr, height, axis=0)

    if isinstance(image, LdrImage):
        return LdrImage(np.clip(round_half_away(arr), 0, 255).astype(np.uint8))
    if isinstance(image, RelaxedImage):
        return RelaxedImage(np.clip(arr, 0.0, 255.0))
    return HdrImage(np.maximum(arr, 0.0))
