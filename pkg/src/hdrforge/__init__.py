"""Differentiable HDR synthesis from multi-exposure stacks.

The package recovers camera response curves from bracketed exposure series,
merges stacks into radiance maps with an analytic backward pass, and ships
the surrounding toolbox: losses, tone mapping, quality metrics, Radiance/PPM
I/O, and a gradient-descent demonstrator.

Submodules are imported lazily — ``hdrforge.merge`` et al. resolve on first
access — so lightweight entry points can configure the process (thread caps,
backends) before any numeric library loads.
"""

import importlib

__version__ = "0.1.0"

_EXPORTS = {
    # errors
    "HdrForgeError": "errors",
    "InvalidArgumentError": "errors",
    "InsufficientDataError": "errors",
    "NumericalFailureError": "errors",
    "ParseError": "errors",
    "UnsupportedFormatError": "errors",
    # image containers
    "LdrImage": "image",
    "RelaxedImage": "image",
    "HdrImage": "image",
    "ExposureStack": "image",
    "quantize": "image",
    "relax": "image",
    "luminance": "image",
    "round_half_away": "image",
    "LUMA_WEIGHTS": "image",
    # resampling
    "resize_lanczos": "resample",
    # calibration
    "SampleSet": "calibration",
    "ResponseCurve": "calibration",
    "PolynomialResponse": "calibration",
    "DebevecSolution": "calibration",
    "sample_pixels": "calibration",
    "solve_debevec": "calibration",
    "fit_polynomial_crf": "calibration",
    "isotonic_nondecreasing": "calibration",
    "project_monotone": "calibration",
    "NUM_LEVELS": "calibration",
    "DEFAULT_ANCHOR": "calibration",
    "DEFAULT_SMOOTHNESS": "calibration",
    # synthesis
    "LinearizedResponse": "synthesis",
    "WeightFunction": "synthesis",
    "hat_weights": "synthesis",
    "uniform_weights": "synthesis",
    "linearize": "synthesis",
    "eval_g": "synthesis",
    "deriv_g": "synthesis",
    "merge": "synthesis",
    "merge_backward": "synthesis",
    "grad_check": "synthesis",
    # edges
    "canny": "edges",
    # losses
    "l1_loss": "losses",
    "histogram_loss": "losses",
    "soft_histogram_loss": "losses",
    "edge_loss": "losses",
    "mu_law_hdr_loss": "losses",
    "FeatureSet": "losses",
    "patch_features": "losses",
    "cobi_loss": "losses",
    "composite_refine_loss": "losses",
    "DEFAULT_MU": "losses",
    # network building blocks
    "ExposureParams": "netops",
    "conditional_instance_norm": "netops",
    "swish": "netops",
    # tone mapping
    "srgb_encode": "tonemap",
    "reinhard": "tonemap",
    "mu_law_compress": "tonemap",
    "mu_law_expand": "tonemap",
    "scale_percentile": "tonemap",
    # metrics
    "psnr": "metrics",
    "ssim": "metrics",
    "ms_ssim": "metrics",
    "MS_SSIM_WEIGHTS": "metrics",
    # file formats
    "read_rgbe": "stackio",
    "write_rgbe": "stackio",
    "read_ldr": "stackio",
    "write_ldr": "stackio",
    "ManifestEntry": "stackio",
    "StackManifest": "stackio",
    "parse_manifest": "stackio",
    "read_manifest": "stackio",
    "write_manifest": "stackio",
    "read_crf": "stackio",
    "write_crf": "stackio",
    # fitting
    "FitConfig": "fit",
    "FitTrace": "fit",
    "fit_stack": "fit",
    "fit_report": "fit",
    # figures
    "plot_loss_curve": "report",
    "plot_response_curve": "report",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name: str):
    module = _EXPORTS.get(name)
    if module is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    value = getattr(importlib.import_module(f".{module}", __name__), name)
    globals()[name] = value  # cache so subsequent lookups skip this hook
    return value


def __dir__():
    return __all__
