"""Training objectives: pixel, histogram, edge, tone-mapped HDR, and
contextual-bilateral terms, with analytic gradients where optimization
needs them.

Gradient-returning losses hand back the derivative with respect to the
*prediction*; comparison-only losses return a bare scalar.
"""

from dataclasses import dataclass

import numpy as np

from .edges import canny
from .errors import InvalidArgumentError
from .image import ExposureStack, LdrImage

DEFAULT_MU = 5000.0
DEFAULT_SPATIAL_WEIGHT = 0.1
_SOFT_CHUNK = 4096
_COBI_CHUNK = 64  # bounds the (chunk, M, d) broadcast cube in the matcher


def _as_array(img) -> np.ndarray:
    return np.asarray(img.data if hasattr(img, "data") else img, dtype=np.float64)


def _pair(pred, target) -> tuple[np.ndarray, np.ndarray]:
    p, t = _as_array(pred), _as_array(target)
    if p.shape != t.shape:
        raise InvalidArgumentError(f"shape mismatch: {p.shape} vs {t.shape}")
    return p, t


def l1_loss(pred, target, with_grad: bool = False):
    """Mean absolute difference over all entries; gradient is sign/count."""
    p, t = _pair(pred, target)
    diff = p - t
    loss = float(np.mean(np.abs(diff)))
    if not with_grad:
        return loss
    return loss, np.sign(diff) / diff.size


def _images_of(obj) -> list:
    if isinstance(obj, ExposureStack):
        return list(obj.images)
    if isinstance(obj, (list, tuple)):
        return list(obj)
    return [obj]


def _counts(arr: np.ndarray, levels: int) -> np.ndarray:
    """Per-channel floor-binned histograms, shape (3, levels)."""
    bins = np.clip((np.floor(arr) * levels) // 256, 0, levels - 1).astype(np.int64)
    return np.stack([np.bincount(bins[..., c].reshape(-1), minlength=levels)
                     for c in range(3)])


def histogram_loss(pred, target, levels: int = 256) -> float:
    """Exact intensity-distribution distance (Eq. of counts, no gradient).

    Mean over levels and channels of |cnt_l(pred) - cnt_l(target)|; when
    given stacks, per-exposure losses are averaged.
    """
    if levels < 1:
        raise InvalidArgumentError(f"levels must be >= 1, got {levels}")
    preds, targets = _images_of(pred), _images_of(target)
    if len(preds) != len(targets):
        raise InvalidArgumentError(f"{len(preds)} predictions vs {len(targets)} targets")
    total = 0.0
    for pi, ti in zip(preds, targets):
        p, t = _pair(pi, ti)
        total += np.abs(_counts(p, levels) - _counts(t, levels)).sum() / (levels * 3)
    return float(total / len(preds))


def soft_histogram_loss(pred, target, bandwidth: float):
    """Differentiable histogram surrogate with Gaussian soft assignments.

    Each prediction entry contributes exp(-(v-l)^2 / (2 sigma^2)) to every
    level l; target counts stay hard.  As bandwidth -> 0 on integer-valued
    predictions this converges to ``histogram_loss``.  Returns
    ``(loss, gradient w.r.t. pred entries)``.
    """
    if bandwidth <= 0:
        raise InvalidArgumentError(f"bandwidth must be positive, got {bandwidth}")
    p, t = _pair(pred, target)
    levels = np.arange(256, dtype=np.float64)
    hard = _counts(t, 256).astype(np.float64)

    inv_two_sigma_sq = 1.0 / (2.0 * bandwidth * bandwidth)
    grad = np.zeros_like(p)
    loss = 0.0
    for c in range(3):
        vals = p[..., c].reshape(-1)
        soft = np.zeros(256)
        for start in range(0, vals.size, _SOFT_CHUNK):
            chunk = vals[start:start + _SOFT_CHUNK]
            soft += np.exp(-((chunk[:, None] - levels[None, :]) ** 2) * inv_two_sigma_sq).sum(axis=0)
        sign = np.sign(soft - hard[c])
        loss += np.abs(soft - hard[c]).sum() / (256 * 3)
        gc = np.empty_like(vals)
        for start in range(0, vals.size, _SOFT_CHUNK):
            chunk = vals[start:start + _SOFT_CHUNK]
            k = np.exp(-((chunk[:, None] - levels[None, :]) ** 2) * inv_two_sigma_sq)
            gc[start:start + _SOFT_CHUNK] = (
                k * (levels[None, :] - chunk[:, None]) * inv_two_sigma_sq * 2.0 * sign[None, :]
            ).sum(axis=1) / (256 * 3)
        grad[..., c] = gc.reshape(p[..., c].shape)
    return float(loss), grad


def edge_loss(pred_edges: np.ndarray, target: LdrImage, sigma: float = 2.0,
              low: float = 0.1, high: float = 0.2) -> float:
    """Mean absolute difference between an edge map and canny(target)."""
    pred_edges = np.asarray(pred_edges)
    if not np.all(np.isin(pred_edges, (0, 1))):
        raise InvalidArgumentError("edge map values must be 0 or 1")
    ref = canny(target, sigma=sigma, low=low, high=high)
    if pred_edges.shape != ref.shape:
        raise InvalidArgumentError(f"shape mismatch: {pred_edges.shape} vs {ref.shape}")
    return float(np.mean(np.abs(pred_edges.astype(np.float64) - ref)))


def mu_law_hdr_loss(pred_hdr, target_hdr, mu: float = DEFAULT_MU):
    """Mean absolute difference of mu-law compressed radiance (natural log).

    Returns ``(loss, gradient)`` where the gradient w.r.t. a prediction
    entry is sign * mu / (1 + mu * value) / N; its magnitude is therefore
    bounded by mu / N.
    """
    if mu <= 0:
        raise InvalidArgumentError(f"mu must be positive, got {mu}")
    p, t = _pair(pred_hdr, target_hdr)
    if p.min() < 0 or t.min() < 0:
        raise InvalidArgumentError("radiance must be non-negative")
    diff = np.log1p(mu * p) - np.log1p(mu * t)
    loss = float(np.mean(np.abs(diff)))
    grad = np.sign(diff) * mu / (1.0 + mu * p) / p.size
    return loss, grad


@dataclass(frozen=True)
class FeatureSet:
    """Feature vectors with normalized spatial coordinates."""

    features: np.ndarray  # (M, d)
    coords: np.ndarray    # (M, 2) in [0, 1]^2

    def __post_init__(self):
        f = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        c = np.ascontiguousarray(np.asarray(self.coords, dtype=np.float64))
        if f.ndim != 2 or f.shape[0] < 1 or f.shape[1] < 1:
            raise InvalidArgumentError(f"features must be a nonempty (M, d) array, got {f.shape}")
        if c.shape != (f.shape[0], 2):
            raise InvalidArgumentError(f"coords shape {c.shape} does not match {f.shape[0]} features")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(c))):
            raise InvalidArgumentError("features and coords must be finite")
        if c.min() < 0 or c.max() > 1:
            raise InvalidArgumentError("coords must be normalized to [0, 1]")
        f.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "coords", c)

    def __len__(self) -> int:
        return self.features.shape[0]


def patch_features(img, patch: int, stride: int) -> FeatureSet:
    """Flattened RGB patches on a stride grid, tagged with their centers.

    A stand-in feature extractor: vectors are raw patch pixels, coordinates
    are patch centers normalized by image size.
    """
    arr = _as_array(img)
    h, w = arr.shape[:2]
    if patch < 1 or stride < 1:
        raise InvalidArgumentError(f"patch and stride must be >= 1, got {patch}, {stride}")
    if patch > min(w, h):
        raise InvalidArgumentError(f"patch {patch} exceeds image extent {w}x{h}")
    feats, coords = [], []
    for y0 in range(0, h - patch + 1, stride):
        for x0 in range(0, w - patch + 1, stride):
            feats.append(arr[y0:y0 + patch, x0:x0 + patch].reshape(-1))
            coords.append(((x0 + patch / 2.0) / w, (y0 + patch / 2.0) / h))
    return FeatureSet(np.array(feats), np.array(coords))


def cobi_loss(p: FeatureSet, q: FeatureSet,
              w_s: float = DEFAULT_SPATIAL_WEIGHT) -> float:
    """Contextual-bilateral distance: best match over q for each feature of p.

    Per query j: min_k of (1 - cosine similarity) + w_s * squared Euclidean
    distance between normalized coordinates, averaged over queries.  Ties
    resolve to the smallest k.  Zero-norm vectors are treated as orthogonal
    to everything (cosine similarity 0).
    """
    if w_s < 0:
        raise InvalidArgumentError(f"w_s must be >= 0, got {w_s}")
    if p.features.shape[1] != q.features.shape[1]:
        raise InvalidArgumentError(
            f"feature dimensions differ: {p.features.shape[1]} vs {q.features.shape[1]}")
    pn = np.linalg.norm(p.features, axis=1)
    qn = np.linalg.norm(q.features, axis=1)
    pu = np.divide(p.features, pn[:, None], out=np.zeros_like(p.features),
                   where=pn[:, None] > 0)
    qu = np.divide(q.features, qn[:, None], out=np.zeros_like(q.features),
                   where=qn[:, None] > 0)
    best = np.empty(len(p))
    for start in range(0, len(p), _COBI_CHUNK):
        blk = slice(start, start + _COBI_CHUNK)
        # 1 - cos written as half the squared distance of unit vectors: never
        # goes negative under rounding, and an exact feature match costs
        # exactly zero (dot/norm forms drift a couple of ulps off 1).
        d = 0.5 * ((pu[blk, None, :] - qu[None, :, :]) ** 2).sum(axis=2)
        d[pn[blk] == 0, :] = 1.0
        d[:, qn == 0] = 1.0
        d += w_s * ((p.coords[blk, None, :] - q.coords[None, :, :]) ** 2).sum(axis=2)
        best[blk] = d.min(axis=1)
    return float(best.mean())


def composite_refine_loss(pred_stack, target_stack, pred_hdr, target_hdr,
                          features_pred: FeatureSet, features_target: FeatureSet,
                          lambdas: tuple[float, float, float] = (1.0, 1.0, 0.1),
                          mu: float = DEFAULT_MU,
                          w_s: float = DEFAULT_SPATIAL_WEIGHT) -> float:
    """Weighted sum of stack L1, mu-law HDR, and CoBi terms."""
    if len(lambdas) != 3:
        raise InvalidArgumentError("lambdas must hold exactly three weights")
    preds, targets = _images_of(pred_stack), _images_of(target_stack)
    if len(preds) != len(targets):
        raise InvalidArgumentError(f"{len(preds)} predictions vs {len(targets)} targets")
    stack_l1 = float(np.mean([l1_loss(a, b) for a, b in zip(preds, targets)]))
    hdr_term, _ = mu_law_hdr_loss(pred_hdr, target_hdr, mu)
    cobi = cobi_loss(features_pred, features_target, w_s)
    return lambdas[0] * stack_l1 + lambdas[1] * hdr_term + lambdas[2] * cobi
