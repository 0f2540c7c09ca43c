"""HDR to display-range operators.

``reinhard`` is the extended global photographic operator (log-average key
scaling with a white-point roll-off) followed by sRGB encoding; ``mu_law_compress``
is the logarithmic compressor used by the HDR-domain losses; ``scale_percentile``
normalizes radiance so the two can be composed into a display-referred view.
"""

import numpy as np

from .errors import InvalidArgumentError, NumericalFailureError
from .image import HdrImage, LdrImage, RelaxedImage, luminance, round_half_away

LOG_AVERAGE_DELTA = 1e-6
DEFAULT_KEY = 0.18


def srgb_encode(linear: np.ndarray) -> np.ndarray:
    """sRGB transfer function on [0, 1] linear values."""
    linear = np.clip(linear, 0.0, 1.0)
    return np.where(linear <= 0.0031308,
                    12.92 * linear,
                    1.055 * np.power(linear, 1.0 / 2.4) - 0.055)


def reinhard(hdr: HdrImage, key: float = DEFAULT_KEY,
             white: float | None = None) -> LdrImage:
    """Photographic tone reproduction, extended global form.

    Luminance is scaled by ``key`` over the log-average, rolled off with
    ``L_d = L_s (1 + L_s / L_white^2) / (1 + L_s)``, and the per-channel
    color ratios are preserved.  ``white=None`` uses the maximum scaled
    luminance, which guarantees ``L_d <= 1``.
    """
    if key <= 0:
        raise InvalidArgumentError(f"key must be positive, got {key}")
    if white is not None and white <= 0:
        raise InvalidArgumentError(f"white must be positive, got {white}")
    lum = luminance(hdr)
    log_average = float(np.exp(np.mean(np.log(LOG_AVERAGE_DELTA + lum))))
    scaled = key * lum / log_average
    l_white = float(scaled.max()) if white is None else float(white)
    if l_white == 0.0:
        display = np.zeros_like(scaled)  # black image: nothing to roll off
    else:
        display = scaled * (1.0 + scaled / (l_white * l_white)) / (1.0 + scaled)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(lum > 0.0, display / np.where(lum > 0.0, lum, 1.0), 0.0)
    linear = hdr.data * ratio[..., None]
    encoded = srgb_encode(linear)
    return LdrImage(np.clip(round_half_away(encoded * 255.0), 0, 255).astype(np.uint8))


def mu_law_compress(hdr: HdrImage, mu: float = 5000.0) -> RelaxedImage:
    """T(H) = ln(1 + mu H) / ln(1 + mu) on radiance already scaled to [0, 1]."""
    if mu <= 0:
        raise InvalidArgumentError(f"mu must be positive, got {mu}")
    if hdr.data.max() > 1.0:
        raise InvalidArgumentError("mu-law compression expects radiance in [0, 1]; "
                                   "apply scale_percentile first")
    return RelaxedImage(np.log1p(mu * hdr.data) / np.log1p(mu))


def mu_law_expand(img: RelaxedImage, mu: float = 5000.0) -> HdrImage:
    """Closed-form inverse of ``mu_law_compress`` on [0, 1] values."""
    if mu <= 0:
        raise InvalidArgumentError(f"mu must be positive, got {mu}")
    if img.data.max() > 1.0:
        raise InvalidArgumentError("expansion expects compressed values in [0, 1]")
    return HdrImage(np.expm1(img.data * np.log1p(mu)) / mu)


def scale_percentile(hdr: HdrImage, lo: float = 0.1, hi: float = 99.9) -> HdrImage:
    """Affine-map radiance so the luminance lo/hi percentiles land on 0 and 1.

    Percentiles use linear interpolation on the sorted luminance values; the
    result is clamped to [0, 1].
    """
    if not (0.0 < lo < hi < 100.0):
        raise InvalidArgumentError(f"need 0 < lo < hi < 100, got lo={lo} hi={hi}")
    lum = luminance(hdr)
    p_lo, p_hi = np.percentile(lum, [lo, hi])
    if p_hi <= p_lo:
        raise NumericalFailureError(
            f"luminance percentiles collapse ({p_lo} == {p_hi}): image has no "
            "dynamic range to normalize")
    return HdrImage(np.clip((hdr.data - p_lo) / (p_hi - p_lo), 0.0, 1.0))
