"""Gradient descent on relaxed stack intensities through the merge.

This is the differentiability demonstrator: the stack's pixel values are the
optimization variables, the forward pass merges them into an HDR estimate,
and the analytic backward pass propagates the HDR-domain loss to every pixel.
Plain clamped gradient descent; when ``halve_on_increase`` is set the step
size backtracks (halves) until the step no longer increases the loss and
grows again after each accepted step, so the recorded trace is non-increasing
without hand-tuning the step size.
"""

import os
from dataclasses import dataclass

import numpy as np

from . import report
from .errors import InvalidArgumentError, NumericalFailureError
from .image import ExposureStack, HdrImage, RelaxedImage, quantize
from .losses import DEFAULT_MU, mu_law_hdr_loss
from .stackio import write_ldr, write_rgbe
from .synthesis import LinearizedResponse, WeightFunction, linearize, merge, merge_backward

_LR_FLOOR = 1e-18
# Classic bold-driver growth: gentle enough that the step size can track a
# shrinking error scale on L1-type losses instead of perpetually overshooting.
_LR_GROWTH = 1.1
_LOG_LOSSES = frozenset({"log_l2"})


@dataclass(frozen=True)
class FitConfig:
    steps: int
    lr: float
    loss: str = "mu_law_hdr"
    mu: float = DEFAULT_MU
    clamp: tuple = (0.0, 255.0)
    seed: int = 0
    record_every: int = 10
    halve_on_increase: bool = True

    def __post_init__(self):
        if not isinstance(self.steps, int) or self.steps < 1:
            raise InvalidArgumentError(f"steps must be a positive integer, got {self.steps}")
        if not np.isfinite(self.lr) or self.lr < 0:
            raise InvalidArgumentError(f"lr must be finite and >= 0, got {self.lr}")
        if self.loss not in ("mu_law_hdr", "log_l2"):
            raise InvalidArgumentError(f"unknown loss {self.loss!r} (use 'mu_law_hdr' or 'log_l2')")
        if not self.mu > 0:
            raise InvalidArgumentError(f"mu must be positive, got {self.mu}")
        lo, hi = self.clamp
        if not (0.0 <= lo < hi <= 255.0):
            raise InvalidArgumentError(f"clamp must satisfy 0 <= lo < hi <= 255, got {self.clamp}")
        object.__setattr__(self, "clamp", (float(lo), float(hi)))
        if not isinstance(self.record_every, int) or self.record_every < 1:
            raise InvalidArgumentError(f"record_every must be a positive integer, got {self.record_every}")


@dataclass(frozen=True)
class FitTrace:
    steps: tuple          # recorded iteration indices, starting at 0
    losses: tuple
    grad_norms: tuple     # L2 norm of dL/dZ at each recorded iterate
    final_stack: ExposureStack
    final_hdr: HdrImage

    def __post_init__(self):
        if not self.steps:
            raise InvalidArgumentError("trace must record at least one step")
        if not all(np.isfinite(v) for v in self.losses):
            raise InvalidArgumentError("recorded losses must be finite")
        object.__setattr__(self, "steps", tuple(int(s) for s in self.steps))
        object.__setattr__(self, "losses", tuple(float(v) for v in self.losses))
        object.__setattr__(self, "grad_norms", tuple(float(v) for v in self.grad_norms))


def _log_l2_loss(pred: np.ndarray, target_log: np.ndarray):
    """Mean squared error between raw log radiances; grad is w.r.t. pred."""
    diff = np.log(pred) - target_log
    n = diff.size
    loss = float(np.mean(diff * diff))
    grad = 2.0 * diff / (pred * n)
    return loss, grad


def _stack_from_values(values: np.ndarray, evs: np.ndarray) -> ExposureStack:
    return ExposureStack(tuple(RelaxedImage(values[j]) for j in range(values.shape[0])), evs)


def fit_stack(target: HdrImage, init: ExposureStack, crf, w: WeightFunction,
              cfg: FitConfig) -> FitTrace:
    """Minimize an HDR-domain loss over the stack's (relaxed) pixel values.

    Deterministic for fixed inputs.  Raises ``NumericalFailureError`` (with
    the offending iteration recorded in ``.step``) if the loss goes
    non-finite.
    """
    stack = init.relaxed()
    if target.data.shape != (stack.height, stack.width, 3):
        raise InvalidArgumentError(
            f"target shape {target.data.shape} does not match stack frames "
            f"({stack.height}, {stack.width}, 3)")
    lin = crf if isinstance(crf, LinearizedResponse) else linearize(crf)
    if cfg.loss in _LOG_LOSSES and not np.all(target.data > 0):
        raise InvalidArgumentError("log-domain loss requires a strictly positive target")
    target_log = np.log(target.data) if cfg.loss in _LOG_LOSSES else None

    def loss_and_grad(values, step):
        cur = _stack_from_values(values, stack.evs)
        merged = merge(cur, lin, w)
        if cfg.loss == "mu_law_hdr":
            loss, grad_e = mu_law_hdr_loss(merged.data, target.data, mu=cfg.mu)
        else:
            loss, grad_e = _log_l2_loss(merged.data, target_log)
        if not np.isfinite(loss):
            err = NumericalFailureError(f"non-finite loss at step {step}")
            err.step = step
            raise err
        upstream = grad_e * merged.data           # d loss / d lnE
        grad_z = merge_backward(cur, lin, w, upstream)
        return loss, grad_z, merged

    lo, hi = cfg.clamp
    z = np.clip(stack.as_array(), lo, hi)
    loss_cur, grad, merged = loss_and_grad(z, 0)
    rec_steps, rec_losses, rec_norms = [0], [loss_cur], [float(np.linalg.norm(grad))]
    lr = cfg.lr

    for step in range(1, cfg.steps + 1):
        candidate = np.clip(z - lr * grad, lo, hi)
        loss_new, grad_new, merged_new = loss_and_grad(candidate, step)
        if cfg.halve_on_increase:
            while loss_new > loss_cur and lr > _LR_FLOOR:
                lr *= 0.5
                candidate = np.clip(z - lr * grad, lo, hi)
                loss_new, grad_new, merged_new = loss_and_grad(candidate, step)
            if loss_new > loss_cur:
                # step size exhausted; hold position so the trace stays monotone
                candidate, loss_new, grad_new, merged_new = z, loss_cur, grad, merged
            else:
                lr *= _LR_GROWTH
        z, loss_cur, grad, merged = candidate, loss_new, grad_new, merged_new
        if step % cfg.record_every == 0 or step == cfg.steps:
            rec_steps.append(step)
            rec_losses.append(loss_cur)
            rec_norms.append(float(np.linalg.norm(grad)))

    return FitTrace(tuple(rec_steps), tuple(rec_losses), tuple(rec_norms),
                    _stack_from_values(z, stack.evs), merged)


def fit_report(trace: FitTrace, path: str | os.PathLike) -> list:
    """Write trace.csv, the final stack as PPMs, merged.hdr, and loss_curve.png.

    Returns the written paths.  Deterministic: re-running on the same trace
    reproduces trace.csv byte for byte.
    """
    os.makedirs(path, exist_ok=True)
    written = []

    csv_path = os.path.join(os.fspath(path), "trace.csv")
    lines = ["step,loss,grad_norm"]
    for s, l, n in zip(trace.steps, trace.losses, trace.grad_norms):
        lines.append(f"{s},{format(l, '.17g')},{format(n, '.17g')}")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    written.append(csv_path)

    for j, img in enumerate(trace.final_stack.images):
        ppm_path = os.path.join(os.fspath(path), f"stack_{j:02d}.ppm")
        write_ldr(quantize(img), ppm_path)
        written.append(ppm_path)

    hdr_path = os.path.join(os.fspath(path), "merged.hdr")
    write_rgbe(trace.final_hdr, hdr_path)
    written.append(hdr_path)

    png_path = os.path.join(os.fspath(path), "loss_curve.png")
    report.plot_loss_curve(trace.steps, trace.losses, png_path)
    written.append(png_path)
    return written
