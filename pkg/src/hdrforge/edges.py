"""Canny edge maps on 8-bit images.

Pipeline: BT.709 grayscale -> Gaussian blur -> central-difference gradients
-> four-direction non-maximum suppression -> double-threshold hysteresis
with 8-connectivity.  Thresholds are given as fractions of the maximum
gradient magnitude.  The edge map is a {0, 1} uint8 array of the input's
height and width.
"""

import numpy as np
from scipy import ndimage

from .errors import InvalidArgumentError
from .image import LUMA_WEIGHTS, LdrImage

# Forward step along the quantized gradient axis, (dy, dx) with y pointing
# down: 0, 45, 90, 135 degrees for atan2(gy, gx).
_DIRECTIONS = ((0, 1), (1, 1), (1, 0), (1, -1))


def _shift(arr: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Shift with zero fill, so off-image neighbors never win the comparison."""
    out = np.zeros_like(arr)
    h, w = arr.shape
    ys = slice(max(0, dy), min(h, h + dy))
    xs = slice(max(0, dx), min(w, w + dx))
    yd = slice(max(0, -dy), min(h, h - dy))
    xd = slice(max(0, -dx), min(w, w - dx))
    out[yd, xd] = arr[ys, xs]
    return out


def canny(image: LdrImage, sigma: float = 2.0, low: float = 0.1,
          high: float = 0.2, luma_weights=LUMA_WEIGHTS) -> np.ndarray:
    """Binary edge map of an LDR image.

    ``low`` and ``high`` are fractions of the maximum gradient magnitude;
    weak pixels survive only when 8-connected to a strong one.  The result
    depends on the image only through its grayscale reduction
    (``luma_weights``, BT.709 by default).
    """
    if sigma <= 0:
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")
    if not 0.0 < low < high <= 1.0:
        raise InvalidArgumentError(f"need 0 < low < high <= 1, got low={low} high={high}")

    gray = image.data.astype(np.float64) @ np.asarray(luma_weights, dtype=np.float64)
    smooth = ndimage.gaussian_filter(gray, sigma=sigma, mode="nearest")

    padded = np.pad(smooth, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak == 0.0:
        return np.zeros(mag.shape, dtype=np.uint8)

    # Quantize the gradient direction to one of four axes (mod 180 degrees).
    angle = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    sector = np.floor((angle + 22.5) / 45.0).astype(np.int64) % 4

    # Keep a pixel when it beats the forward neighbor strictly and the
    # backward one at least; symmetric ridges then thin to a single pixel.
    keep = np.zeros(mag.shape, dtype=bool)
    for s, (dy, dx) in enumerate(_DIRECTIONS):
        fwd = _shift(mag, -dy, -dx)   # value at (y + dy, x + dx)
        bwd = _shift(mag, dy, dx)
        keep |= (sector == s) & (mag > fwd) & (mag >= bwd)
    thin = np.where(keep, mag, 0.0)

    strong = thin >= high * peak
    weak = thin >= low * peak
    labels, count = ndimage.label(weak, structure=np.ones((3, 3), dtype=np.int8))
    if count == 0:
        return np.zeros(mag.shape, dtype=np.uint8)
    good = np.zeros(count + 1, dtype=bool)
    good[np.unique(labels[strong])] = True
    good[0] = False
    return good[labels].astype(np.uint8)
