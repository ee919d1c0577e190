"""Batch gradient descent with backtracking line search.

Used for the truncated top-k entropy loss, which is nonconvex and
therefore outside the dual solver's reach. Training warm-starts from a
softmax model (the caller provides it via GdConfig.init) and minimizes
the regularized objective

    F(W) = (1/n) sum_i L(y_i, W^T x_i) + (lambda/2) ||W||_F^2

with Armijo backtracking: the step is halved until the sufficient
decrease holds and doubled after two consecutive full-step acceptances.
The accepted objective sequence is monotone by construction.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .losses import LossSpec, ScoreContext, eval_loss, grad_loss
from .model import Model

__all__ = ["GdConfig", "GdReport", "gd_train"]


@dataclass(frozen=True)
class GdConfig:
    init: Model
    max_iters: int = 500
    grad_tolerance: float = 1e-6       # on the gradient infinity norm
    sufficient_decrease: float = 1e-4  # Armijo constant
    backtrack_factor: float = 0.5
    max_backtracks: int = 60
    log: object = None

    def __post_init__(self):
        if not 0.0 < self.sufficient_decrease < 1.0:
            raise ValueError("sufficient_decrease must lie in (0, 1)")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")


@dataclass
class GdReport:
    iterations: int = 0
    objective: float = math.nan
    grad_norm: float = math.nan
    status: str = ""
    objectives: list = field(default_factory=list)
    wall_time: float = 0.0
    log_lines: list = field(default_factory=list)


def _objective_and_gradient(weights, data, loss, lam, want_grad=True):
    scores = weights.T @ data.features
    total = 0.0
    grads = np.zeros_like(scores) if want_grad else None
    for i in range(data.n):
        ctx = ScoreContext(scores[:, i], int(data.labels[i]))
        total += eval_loss(loss, ctx)
        if want_grad:
            grads[:, i] = grad_loss(loss, ctx)
    obj = total / data.n + 0.5 * lam * float((weights * weights).sum())
    if not want_grad:
        return obj, None
    grad = data.features @ grads.T / data.n + lam * weights
    return obj, grad


def gd_train(data, loss, lam, cfg):
    """Minimize the regularized loss from cfg.init by line-searched
    gradient descent. Returns (Model, GdReport) with report.status one
    of "converged", "max_iters", or "stalled"."""
    if not isinstance(loss, LossSpec):
        raise TypeError("loss must be a LossSpec")
    if cfg.init.d != data.d or cfg.init.m != data.m:
        raise ValueError("init model dimensions do not match the data")
    if lam <= 0:
        raise ValueError("lambda must be positive")

    start = time.perf_counter()
    w = cfg.init.weights.copy()
    report = GdReport()
    obj, grad = _objective_and_gradient(w, data, loss, lam)
    report.objectives.append(obj)
    step = 1.0
    full_steps = 0
    tiny_decreases = 0
    status = "max_iters"

    for it in range(1, cfg.max_iters + 1):
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= cfg.grad_tolerance:
            status = "converged"
            report.iterations = it - 1
            break
        gsq = float((grad * grad).sum())
        accepted = False
        for bt in range(cfg.max_backtracks + 1):
            trial = w - step * grad
            trial_obj, _ = _objective_and_gradient(
                trial, data, loss, lam, want_grad=False)
            if trial_obj <= obj - cfg.sufficient_decrease * step * gsq:
                accepted = True
                break
            step *= cfg.backtrack_factor
        if not accepted:
            status = "stalled"
            report.iterations = it - 1
            break
        if bt == 0:
            full_steps += 1
            if full_steps >= 2:
                step *= 2.0
                full_steps = 0
        else:
            full_steps = 0
        decrease = obj - trial_obj
        w = trial
        obj, grad = _objective_and_gradient(w, data, loss, lam)
        report.objectives.append(obj)
        report.iterations = it
        sec = time.perf_counter() - start
        line = f"epoch={it} P={obj:.17g} D=nan gap=nan sec={sec:.3f}"
        report.log_lines.append(line)
        if cfg.log is not None:
            cfg.log(line)
        if decrease < 1e-10 * max(1.0, abs(obj)):
            tiny_decreases += 1
            if tiny_decreases >= 5:
                status = "stalled"
                break
        else:
            tiny_decreases = 0
    else:
        status = "max_iters"

    report.objective = obj
    report.grad_norm = float(np.max(np.abs(grad)))
    if report.grad_norm <= cfg.grad_tolerance:
        status = "converged"
    report.status = status
    report.wall_time = time.perf_counter() - start
    return Model(weights=w, loss=loss, lam=lam), report
