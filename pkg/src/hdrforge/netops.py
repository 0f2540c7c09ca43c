"""Standalone network operators: exposure-conditioned instance norm and Swish.

Feature maps are plain ``(C, H, W)`` float arrays (channel-first, unlike the
image containers).  These operators are pure functions so they can be tested
without any surrounding network.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import InvalidArgumentError, NumericalFailureError

DEFAULT_EPS = 1e-5


@dataclass(frozen=True)
class ExposureParams:
    """Per-channel affine parameters keyed by an exposure value."""

    gamma: np.ndarray
    beta: np.ndarray
    ev_key: float = 0.0

    def __post_init__(self):
        gamma = np.ascontiguousarray(np.asarray(self.gamma, dtype=np.float64).reshape(-1))
        beta = np.ascontiguousarray(np.asarray(self.beta, dtype=np.float64).reshape(-1))
        if gamma.size != beta.size or gamma.size < 1:
            raise InvalidArgumentError(
                f"gamma and beta must be equal nonempty lengths, got {gamma.size} and {beta.size}")
        if not (np.all(np.isfinite(gamma)) and np.all(np.isfinite(beta)) and np.isfinite(self.ev_key)):
            raise InvalidArgumentError("parameters must be finite")
        gamma.flags.writeable = False
        beta.flags.writeable = False
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "beta", beta)


def _as_feature_map(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise InvalidArgumentError(f"feature map must have shape (C, H, W), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("feature map must be finite")
    return arr


def conditional_instance_norm(x, params: ExposureParams, eps: float = DEFAULT_EPS,
                              standard_form: bool = False) -> np.ndarray:
    """Per-channel spatial normalization modulated by exposure parameters.

    Default follows the conditioning formula as published,
    ``Y = (gamma * (X - mu) + beta) / (sigma + eps)`` with the shift inside
    the division; ``standard_form=True`` switches to the conventional
    ``gamma * (X - mu) / (sigma + eps) + beta``.  The standard deviation is
    the population one (divisor H*W).
    """
    arr = _as_feature_map(x)
    if eps < 0:
        raise InvalidArgumentError(f"eps must be >= 0, got {eps}")
    c = arr.shape[0]
    if params.gamma.size != c:
        raise InvalidArgumentError(f"params have {params.gamma.size} channels, map has {c}")
    mu = arr.mean(axis=(1, 2), keepdims=True)
    sigma = arr.std(axis=(1, 2), keepdims=True)
    if eps == 0.0 and np.any(sigma == 0.0):
        raise NumericalFailureError("constant channel with eps = 0: zero standard deviation")
    gamma = params.gamma[:, None, None]
    beta = params.beta[:, None, None]
    if standard_form:
        return gamma * (arr - mu) / (sigma + eps) + beta
    return (gamma * (arr - mu) + beta) / (sigma + eps)


def swish(x):
    """x * sigmoid(x), elementwise; returns a float for scalar input."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("swish requires finite input")
    out = arr * expit(arr)
    return float(out) if out.ndim == 0 else out
