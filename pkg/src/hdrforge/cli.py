"""Command-line front end: calibrate, merge, tonemap, metrics, gradcheck, fit.

Machine-readable results go to stdout as a single JSON object per run; human
diagnostics go to stderr.  Exit codes: 0 success, 2 invalid arguments or
unreadable/unsupported input, 3 insufficient data, 4 numerical failure.

Handlers import the numeric modules lazily so ``HDRFORGE_THREADS`` (applied
in ``script_entry`` before anything touches BLAS) can cap thread pools.
"""

import argparse
import json
import os
import sys

from .errors import (
    InsufficientDataError,
    InvalidArgumentError,
    NumericalFailureError,
    ParseError,
    UnsupportedFormatError,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INSUFFICIENT = 3
EXIT_NUMERICAL = 4

_THREAD_ENV_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


def _emit(result: dict) -> None:
    import numpy as np

    def scrub(obj):
        if isinstance(obj, dict):
            return {str(k): scrub(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [scrub(v) for v in obj]
        if isinstance(obj, np.generic):
            return obj.item()
        if isinstance(obj, np.ndarray):
            return scrub(obj.tolist())
        return obj

    sys.stdout.write(json.dumps(scrub(result), sort_keys=True) + "\n")


def _note(msg: str) -> None:
    sys.stderr.write(msg + "\n")


# ---------------------------------------------------------------------------
# Handlers


def _cmd_calibrate(args) -> int:
    from . import report
    from .calibration import fit_polynomial_crf, project_monotone, sample_pixels, solve_debevec
    from .stackio import read_manifest, write_crf

    stack = read_manifest(args.stack)
    samples = sample_pixels(stack, per_level=args.samples_per_level)
    solution = solve_debevec(samples, smoothness=args.smoothness,
                             weighting=args.weighting)
    curve = solution.curve
    if args.monotone:
        curve = project_monotone(curve)
    write_crf(curve, args.out)

    result = {
        "out": os.fspath(args.out),
        "data_residual": solution.data_residual,
        "anchor": curve.anchor_index,
        "smoothness": args.smoothness,
        "weighting": args.weighting,
        "monotone": bool(args.monotone),
        "samples": samples.num_samples,
        "diagnostics": {"rgb"[c]: solution.diagnostics[c] for c in range(3)},
    }
    for c in range(3):
        d = solution.diagnostics[c]
        _note(f"channel {'rgb'[c]}: rank={d['rank']} condition={d['condition']:.3e} "
              f"rows={d['rows']} z_range={d['z_range']}")
    _note(f"data residual: {solution.data_residual:.6e}")

    if args.polynomial is not None:
        poly = fit_polynomial_crf(samples, args.polynomial)
        result["polynomial"] = {"order": poly.order, "coeffs": poly.coeffs.T}
    if args.plot is not None:
        report.plot_response_curve(curve, args.plot)
        result["plot"] = os.fspath(args.plot)
    _emit(result)
    return EXIT_OK


def _weight_function(name: str):
    from .synthesis import hat_weights, uniform_weights

    return hat_weights() if name == "hat" else uniform_weights()


def _cmd_merge(args) -> int:
    from .stackio import read_crf, read_manifest, write_rgbe
    from .synthesis import linearize, merge

    stack = read_manifest(args.stack)
    lin = linearize(read_crf(args.crf))
    hdr = merge(stack, lin, _weight_function(args.weighting))
    write_rgbe(hdr, args.out)
    _note(f"merged {len(stack)} exposures -> {args.out}")
    _emit({
        "out": os.fspath(args.out),
        "exposures": len(stack),
        "radiance_min": float(hdr.data.min()),
        "radiance_max": float(hdr.data.max()),
        "radiance_mean": float(hdr.data.mean()),
    })
    return EXIT_OK


def _mu_law_ldr(hdr):
    """Display-referred 8-bit rendering: percentile scaling, mu-law, quantize."""
    from .image import RelaxedImage, quantize
    from .tonemap import mu_law_compress, scale_percentile

    compressed = mu_law_compress(scale_percentile(hdr))
    return quantize(RelaxedImage(compressed.data * 255.0))


def _cmd_tonemap(args) -> int:
    from .stackio import read_rgbe, write_ldr
    from .tonemap import reinhard

    hdr = read_rgbe(args.input)
    if args.operator == "reinhard":
        ldr = reinhard(hdr, key=args.key)
    else:
        ldr = _mu_law_ldr(hdr)
    write_ldr(ldr, args.out)
    _note(f"tonemapped {args.input} with {args.operator} -> {args.out}")
    _emit({"out": os.fspath(args.out), "operator": args.operator, "key": args.key})
    return EXIT_OK


def _cmd_metrics(args) -> int:
    from .metrics import ms_ssim, psnr, ssim

    if args.hdr:
        from .stackio import read_rgbe

        ref = _mu_law_ldr(read_rgbe(args.ref))
        test = _mu_law_ldr(read_rgbe(args.test))
    else:
        from .stackio import read_ldr

        ref = read_ldr(args.ref)
        test = read_ldr(args.test)

    wanted = {name for name in ("psnr", "ssim", "msssim") if getattr(args, name)}
    if not wanted:
        wanted = {"psnr", "ssim", "msssim"}
    result = {}
    if "psnr" in wanted:
        result["psnr"] = psnr(ref, test)
    if "ssim" in wanted:
        result["ssim"] = ssim(ref, test)
    if "msssim" in wanted:
        result["msssim"] = ms_ssim(ref, test)
    for name in sorted(result):
        _note(f"{name}: {result[name]:.6f}")
    _emit(result)
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    import numpy as np

    from .image import ExposureStack, HdrImage, RelaxedImage
    from .losses import mu_law_hdr_loss
    from .stackio import read_crf, read_manifest
    from .synthesis import grad_check, linearize, uniform_weights

    if not 0.0 < args.h < 0.5:
        raise InvalidArgumentError(f"step h must lie in (0, 0.5), got {args.h}")

    stack = read_manifest(args.stack)
    lin = linearize(read_crf(args.crf))
    weights = uniform_weights()  # keeps every sampled coordinate trainable

    # The stored stack is integer-valued, which is exactly where the
    # piecewise response has no derivative; nudge each value up into the
    # middle half of the admissible fractional band (the top level drops
    # to 254 so the probes stay inside the domain).
    rng = np.random.default_rng(args.seed)
    z = np.minimum(stack.as_array(), 254.0)
    offsets = args.h + (1.0 - 2.0 * args.h) * (0.25 + 0.5 * rng.random(z.shape))
    probe = ExposureStack(tuple(RelaxedImage((z + offsets)[j]) for j in range(len(stack))),
                          stack.evs)

    # Check against a constant target above any reachable radiance: the
    # absolute-value loss then has one sign everywhere, so no finite-
    # difference window can straddle a kink.
    ceiling = 2.0 * float(np.exp(lin.g.max() - stack.evs.min()))
    target = HdrImage(np.full((stack.height, stack.width, 3), ceiling))

    def loss(hdr):
        return mu_law_hdr_loss(hdr.data, target.data)

    result = grad_check(probe, lin, weights, loss, num_points=args.samples,
                        h=args.h, seed=args.seed)
    result.update({"h": args.h, "seed": args.seed, "loss_name": args.loss})
    _note(f"max relative error {result['max_rel_err']:.3e} "
          f"over {result['num_checked']} coordinates")
    _emit(result)
    return EXIT_OK


def _cmd_fit(args) -> int:
    from .fit import FitConfig, fit_report, fit_stack
    from .stackio import read_crf, read_manifest, read_rgbe
    from .synthesis import uniform_weights

    target = read_rgbe(args.target)
    init = read_manifest(args.init).relaxed()
    curve = read_crf(args.crf)
    cfg = FitConfig(steps=args.steps, lr=args.lr)
    trace = fit_stack(target, init, curve, uniform_weights(), cfg)
    files = fit_report(trace, args.out)
    _note(f"loss {trace.losses[0]:.6e} -> {trace.losses[-1]:.6e} "
          f"over {cfg.steps} steps")
    _emit({
        "out": os.fspath(args.out),
        "files": [os.path.basename(f) for f in files],
        "initial_loss": trace.losses[0],
        "final_loss": trace.losses[-1],
        "steps": cfg.steps,
        "recorded": len(trace.steps),
    })
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdrforge",
        description="Differentiable HDR synthesis from multi-exposure stacks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="recover the camera response from a stack")
    p.add_argument("--stack", required=True, help="stack manifest (JSON)")
    p.add_argument("--lambda", dest="smoothness", type=float, default=100.0,
                   help="curvature penalty weight (default 100)")
    p.add_argument("--weighting", choices=("hat", "none"), default="hat")
    p.add_argument("--samples-per-level", type=int, default=2)
    p.add_argument("--out", required=True, help="output response table (CSV)")
    p.add_argument("--polynomial", type=int, default=None, metavar="K",
                   help="also fit a degree-K polynomial response (reported in JSON)")
    p.add_argument("--monotone", action="store_true",
                   help="project the recovered curve to be non-decreasing")
    p.add_argument("--plot", default=None, metavar="PNG",
                   help="render the recovered curve to this file")
    p.set_defaults(handler=_cmd_calibrate)

    p = sub.add_parser("merge", help="merge a stack into an HDR radiance map")
    p.add_argument("--stack", required=True)
    p.add_argument("--crf", required=True, help="response table from calibrate")
    p.add_argument("--weighting", choices=("hat", "uniform"), default="hat")
    p.add_argument("--out", required=True, help="output Radiance .hdr file")
    p.set_defaults(handler=_cmd_merge)

    p = sub.add_parser("tonemap", help="render an HDR file to an 8-bit image")
    p.add_argument("--in", dest="input", required=True, help="input Radiance .hdr file")
    p.add_argument("--operator", choices=("reinhard", "mulaw"), default="reinhard")
    p.add_argument("--key", type=float, default=0.18,
                   help="reinhard middle-gray key (default 0.18)")
    p.add_argument("--out", required=True, help="output image (.png or .ppm)")
    p.set_defaults(handler=_cmd_tonemap)

    p = sub.add_parser("metrics", help="compare two images")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--psnr", action="store_true")
    p.add_argument("--ssim", action="store_true")
    p.add_argument("--msssim", action="store_true")
    p.add_argument("--hdr", action="store_true",
                   help="inputs are Radiance files; compared display-referred "
                        "(percentile scaling + mu-law compression)")
    p.set_defaults(handler=_cmd_metrics)

    p = sub.add_parser("gradcheck",
                       help="compare analytic merge gradients against finite differences")
    p.add_argument("--stack", required=True)
    p.add_argument("--crf", required=True)
    p.add_argument("--loss", choices=("mulaw",), default="mulaw")
    p.add_argument("--h", type=float, default=0.25, help="finite-difference step")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=500)
    p.set_defaults(handler=_cmd_gradcheck)

    p = sub.add_parser("fit", help="gradient-descend stack pixels toward a target HDR")
    p.add_argument("--target", required=True, help="target Radiance .hdr file")
    p.add_argument("--init", required=True, help="initial stack manifest")
    p.add_argument("--crf", required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--lr", type=float, required=True)
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(handler=_cmd_fit)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.handler(args)
    except InsufficientDataError as exc:
        _note(f"error: insufficient data: {exc}")
        return EXIT_INSUFFICIENT
    except NumericalFailureError as exc:
        _note(f"error: numerical failure: {exc}")
        return EXIT_NUMERICAL
    except (InvalidArgumentError, ParseError, UnsupportedFormatError) as exc:
        _note(f"error: {exc}")
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        _note(f"error: {exc}")
        return EXIT_USAGE


def script_entry() -> None:
    threads = os.environ.get("HDRFORGE_THREADS")
    if threads is not None:
        if not threads.isdigit() or int(threads) < 1:
            _note(f"error: HDRFORGE_THREADS must be a positive integer, got {threads!r}")
            sys.exit(EXIT_USAGE)
        for var in _THREAD_ENV_VARS:
            os.environ.setdefault(var, threads)
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    script_entry()
