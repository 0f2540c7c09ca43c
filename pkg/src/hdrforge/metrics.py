"""Quality metrics for 8-bit image pairs: PSNR, SSIM, MS-SSIM.

SSIM follows the canonical single-scale formulation (11x11 Gaussian window,
sigma 1.5, K1=0.01, K2=0.03 at dynamic range 255) computed on BT.709 luma
over valid windows only.  MS-SSIM uses the standard five-level weights with
2x2 mean-pool downsampling, contrast-structure terms at the coarse levels
and the full SSIM at the last.
"""

import numpy as np
from scipy import ndimage

from .errors import InvalidArgumentError
from .image import LdrImage, luminance

PSNR_CAP_DB = 99.0
_WINDOW = 11
_SIGMA = 1.5
_C1 = (0.01 * 255.0) ** 2
_C2 = (0.03 * 255.0) ** 2
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


def _pair(a: LdrImage, b: LdrImage) -> tuple[np.ndarray, np.ndarray]:
    if not isinstance(a, LdrImage) or not isinstance(b, LdrImage):
        raise InvalidArgumentError("metrics compare LdrImage pairs")
    if a.data.shape != b.data.shape:
        raise InvalidArgumentError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    return a.data.astype(np.float64), b.data.astype(np.float64)


def psnr(a: LdrImage, b: LdrImage) -> float:
    """Peak signal-to-noise ratio in dB over all channels, capped at 99.0."""
    x, y = _pair(a, b)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(float(10.0 * np.log10(255.0 ** 2 / mse)), PSNR_CAP_DB)


def _gaussian_window() -> np.ndarray:
    half = (_WINDOW - 1) / 2.0
    coords = np.arange(_WINDOW, dtype=np.float64) - half
    g = np.exp(-(coords ** 2) / (2.0 * _SIGMA ** 2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def _local_stats(x: np.ndarray, y: np.ndarray):
    """Gaussian-weighted window moments, valid region only."""
    kernel = _gaussian_window()
    crop = (slice(_WINDOW // 2, -(_WINDOW // 2)),) * 2

    def smooth(img):
        return ndimage.correlate(img, kernel, mode="constant")[crop]

    mu_x = smooth(x)
    mu_y = smooth(y)
    var_x = smooth(x * x) - mu_x * mu_x
    var_y = smooth(y * y) - mu_y * mu_y
    cov = smooth(x * y) - mu_x * mu_y
    return mu_x, mu_y, var_x, var_y, cov


def _ssim_cs(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Mean SSIM and mean contrast-structure term on luma arrays."""
    mu_x, mu_y, var_x, var_y, cov = _local_stats(x, y)
    cs_map = (2.0 * cov + _C2) / (var_x + var_y + _C2)
    ssim_map = (2.0 * mu_x * mu_y + _C1) / (mu_x ** 2 + mu_y ** 2 + _C1) * cs_map
    return float(ssim_map.mean()), float(cs_map.mean())


def ssim(a: LdrImage, b: LdrImage) -> float:
    """Single-scale structural similarity on BT.709 luma."""
    x, y = _pair(a, b)
    if min(x.shape[:2]) < _WINDOW:
        raise InvalidArgumentError(
            f"ssim needs both dimensions >= {_WINDOW}, got {x.shape[:2]}")
    full, _ = _ssim_cs(luminance(x), luminance(y))
    return full


def _pool2(x: np.ndarray) -> np.ndarray:
    """2x2 mean pooling; trailing odd row/column is dropped."""
    h, w = x.shape
    x = x[:h - h % 2, :w - w % 2]
    return x.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def ms_ssim(a: LdrImage, b: LdrImage, levels: int = 5) -> float:
    """Multi-scale structural similarity.

    Standard weights for five levels; fewer levels use the leading weights
    renormalized to sum one, so ``levels=1`` reduces to plain SSIM.
    Negative terms are clamped to zero before exponentiation.
    """
    if not 1 <= levels <= 5:
        raise InvalidArgumentError(f"levels must be in [1, 5], got {levels}")
    x, y = _pair(a, b)
    need = _WINDOW * 2 ** (levels - 1)
    if min(x.shape[:2]) < need:
        raise InvalidArgumentError(
            f"ms_ssim at {levels} levels needs dimensions >= {need}, got {x.shape[:2]}")
    weights = np.asarray(MS_SSIM_WEIGHTS[:levels], dtype=np.float64)
    weights = weights / weights.sum()

    lx, ly = luminance(x), luminance(y)
    score = 1.0
    for level in range(levels):
        full, cs = _ssim_cs(lx, ly)
        term = full if level == levels - 1 else cs
        score *= max(term, 0.0) ** weights[level]
        if level < levels - 1:
            lx, ly = _pool2(lx), _pool2(ly)
    return float(score)
