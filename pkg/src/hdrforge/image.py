"""Core image containers and pixel-level helpers.

All images are RGB, stored channel-interleaved in row-major order as
``(height, width, 3)`` numpy arrays.  Three value domains appear throughout
the toolkit:

* ``LdrImage``    — quantized 8-bit sensor values,
* ``RelaxedImage`` — real-valued sensor values in [0, 255] (the domain the
  merge gradients live in),
* ``HdrImage``    — non-negative linear radiance.

Arrays are frozen (``writeable = False``) on construction; derive new images
instead of mutating in place.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

LN2 = float(np.log(2.0))

#: BT.709 luma coefficients, used everywhere a grayscale reduction is needed.
LUMA_WEIGHTS = (0.2126, 0.7152, 0.0722)


def round_half_away(values: np.ndarray | float) -> np.ndarray:
    """Round to nearest integer with halves away from zero.

    numpy's ``round`` uses banker's rounding; file encoders and quantizers in
    this package must agree on half-away-from-zero instead.
    """
    values = np.asarray(values, dtype=np.float64)
    return np.copysign(np.floor(np.abs(values) + 0.5), values)


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.flags.writeable = False
    return out


def _require_rgb(arr: np.ndarray, what: str) -> None:
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidArgumentError(f"{what} must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidArgumentError(f"{what} must be at least 1x1, got {arr.shape}")


@dataclass(frozen=True)
class LdrImage:
    """Quantized 8-bit RGB image."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        _require_rgb(arr, "LdrImage")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer):
                raise InvalidArgumentError("LdrImage requires integer data; quantize first")
            if arr.min() < 0 or arr.max() > 255:
                raise InvalidArgumentError("LdrImage values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class RelaxedImage:
    """Real-valued sensor image on [0, 255]; the continuous relaxation of LDR."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        _require_rgb(arr, "RelaxedImage")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError("RelaxedImage values must be finite")
        if arr.min() < 0.0 or arr.max() > 255.0:
            raise InvalidArgumentError("RelaxedImage values must lie in [0.0, 255.0]")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class HdrImage:
    """Linear radiance image; non-negative, finite, unbounded above."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        _require_rgb(arr, "HdrImage")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError("HdrImage values must be finite")
        if arr.min() < 0.0:
            raise InvalidArgumentError("HdrImage values must be non-negative")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ExposureStack:
    """A bracketed exposure series of equally-shaped images.

    ``evs`` are log-exposure offsets.  They are stored in natural-log units:
    when ``exposure_unit`` is ``"stops"`` the given values are multiplied by
    ln 2 on ingest (one stop doubles the exposure).  The original unit string
    is kept for provenance only.
    """

    images: tuple
    evs: np.ndarray
    exposure_unit: str = "natural-log"

    def __post_init__(self):
        images = tuple(self.images)
        if len(images) < 1:
            raise InvalidArgumentError("ExposureStack needs at least one image")
        kinds = {type(im) for im in images}
        if len(kinds) != 1 or not isinstance(images[0], (LdrImage, RelaxedImage)):
            raise InvalidArgumentError("ExposureStack images must all be LdrImage or all RelaxedImage")
        shape = images[0].data.shape
        if any(im.data.shape != shape for im in images):
            raise InvalidArgumentError("ExposureStack images must share one shape")

        evs = np.asarray(self.evs, dtype=np.float64).reshape(-1)
        if evs.size != len(images):
            raise InvalidArgumentError(f"got {len(images)} images but {evs.size} EV values")
        if not np.all(np.isfinite(evs)):
            raise InvalidArgumentError("EV values must be finite")
        if self.exposure_unit == "stops":
            evs = evs * LN2
        elif self.exposure_unit != "natural-log":
            raise InvalidArgumentError(f"unknown exposure unit {self.exposure_unit!r}")
        if evs.size > 1 and not np.all(np.diff(evs) > 0):
            raise InvalidArgumentError("EV values must be strictly increasing")

        object.__setattr__(self, "images", images)
        object.__setattr__(self, "evs", _freeze(evs))

    def __len__(self) -> int:
        return len(self.images)

    @property
    def height(self) -> int:
        return self.images[0].data.shape[0]

    @property
    def width(self) -> int:
        return self.images[0].data.shape[1]

    def as_array(self) -> np.ndarray:
        """Stacked pixel data with shape (num_exposures, H, W, 3), float64."""
        return np.stack([im.data.astype(np.float64) for im in self.images], axis=0)

    def relaxed(self) -> "ExposureStack":
        """The same stack with every image lifted to RelaxedImage."""
        if isinstance(self.images[0], RelaxedImage):
            return self
        lifted = tuple(RelaxedImage(im.data.astype(np.float64)) for im in self.images)
        return ExposureStack(lifted, self.evs, "natural-log")


def quantize(image: RelaxedImage) -> LdrImage:
    """Round half-away-from-zero and clamp to the 8-bit range."""
    rounded = round_half_away(image.data)
    return LdrImage(np.clip(rounded, 0, 255).astype(np.uint8))


def relax(image: LdrImage) -> RelaxedImage:
    """Lift an 8-bit image into the continuous [0, 255] domain."""
    return RelaxedImage(image.data.astype(np.float64))


def luminance(image: HdrImage | RelaxedImage | LdrImage | np.ndarray) -> np.ndarray:
    """BT.709 luminance, shape (H, W); linear combination of the RGB channels."""
    arr = image if isinstance(image, np.ndarray) else image.data
    arr = np.asarray(arr, dtype=np.float64)
    w = np.asarray(LUMA_WEIGHTS, dtype=np.float64)
    return arr @ w
