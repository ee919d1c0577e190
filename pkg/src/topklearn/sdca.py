"""Stochastic dual coordinate ascent for the convex loss families.

The regularized empirical risk problem

    P(W) = (1/n) sum_i L(y_i, W^T x_i) + (lambda/2) ||W||_F^2

is maximized through its Fenchel dual

    D(A) = -(1/n) sum_i L*(y_i, -lambda n a_i) - (lambda/2) ||X A^T||_F^2,

one example block a_i at a time. Every block update is an exact prox
step: for the top-k hinge family it is a biased projection onto a top-k
simplex, for the softmax / top-k entropy family an entropic prox solved
with the Lambert kernel. The primal iterate W = X A^T is maintained
incrementally by rank-one corrections and refreshed periodically to
bound floating-point drift.

One-vs-all reductions train one scalar-dual binary problem per class
with the same machinery and stopping rule.

The solver stops when the relative duality gap (P - D) / P falls below
the configured tolerance, checked every few epochs.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .datasets import Dataset
from .entropy import entropy_prox
from .losses import (
    CONVEX_FAMILIES,
    OVA_FAMILIES,
    LossSpec,
    ScoreContext,
    eval_loss,
)
from .model import Model
from .projections import TopkSimplexSpec, project_topk

try:
    from . import _fast

    _HAVE_FAST = _fast.HAVE_NUMBA
except ImportError:  # pragma: no cover
    _HAVE_FAST = False

__all__ = [
    "TrainConfig",
    "TrainReport",
    "DualState",
    "sdca_train",
    "sdca_update_example",
    "primal_dual_objectives",
    "ova_train",
]

_DUAL_DECREASE_TOL = 1e-10
_W_DRIFT_TOL = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    loss: LossSpec
    lam: float
    max_epochs: int = 1000
    gap_tolerance: float = 1e-3
    gap_check_every: int = 1
    seed: int = 0
    w_refresh_every: int = 10
    log: object = None  # callable taking one formatted progress line
    engine: str = "auto"  # auto | fast | reference

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.gap_tolerance <= 0:
            raise ValueError("gap tolerance must be positive")
        if self.max_epochs < 1 or self.gap_check_every < 1:
            raise ValueError("epoch counts must be positive")
        if self.engine not in ("auto", "fast", "reference"):
            raise ValueError("engine must be auto, fast, or reference")


@dataclass
class TrainReport:
    epochs: int = 0
    primal: float = math.nan
    dual: float = math.nan
    gap: float = math.nan
    converged: bool = False
    wall_time: float = 0.0
    gap_history: list = field(default_factory=list)  # (epoch, P, D, gap, sec)
    log_lines: list = field(default_factory=list)
    dual_violations: int = 0
    w_refreshes: int = 0
    skipped_updates: int = 0
    sub_reports: list = field(default_factory=list)  # one per class for OVA

    def record(self, epoch, p, d, sec, log=None):
        gap = (p - d) / p if p > 0 else 0.0
        if p < d - 1e-9 * (1.0 + abs(p)):
            raise AssertionError(f"weak duality violated: P={p!r} < D={d!r}")
        line = f"epoch={epoch} P={p:.17g} D={d:.17g} gap={gap:.6g} sec={sec:.3f}"
        self.log_lines.append(line)
        if log is not None:
            log(line)
        self.gap_history.append((epoch, p, d, gap, sec))
        self.epochs = epoch
        self.primal, self.dual, self.gap = p, d, gap
        return gap


class DualState:
    """Dual matrix A (m x n) with the maintained primal W = X A^T.

    Owned by one solver run; updates are single-writer. Every column
    a_i keeps <1, a_i> = 0, which the per-loss updates enforce by
    construction.
    """

    def __init__(self, data, lam, seed=0):
        self.data = data
        self.lam = lam
        self.lam_n = lam * data.n
        self.A = np.zeros((data.m, data.n))
        self.W = np.zeros((data.d, data.m))
        self.sq_norms = (data.features * data.features).sum(axis=0)
        self.rng = np.random.Generator(np.random.Philox(seed))
        self.epoch = 0
        self.dual_violations = 0
        self.w_refreshes = 0
        self.skipped_updates = 0

    def refresh_w(self):
        """Recompute W = X A^T from scratch; counts drift corrections."""
        fresh = self.data.features @ self.A.T
        drift = np.linalg.norm(self.W - fresh)
        if drift > _W_DRIFT_TOL * (1.0 + np.linalg.norm(fresh)):
            self.w_refreshes += 1
        self.W = fresh

    def w_drift(self):
        fresh = self.data.features @ self.A.T
        return float(np.linalg.norm(self.W - fresh)
                     / (1.0 + np.linalg.norm(fresh)))


def _conjugate_value(loss, a_col, y, lam_n):
    """L*(y, -lambda n a_i) for the stored dual column a_i."""
    v = -lam_n * a_col
    x = np.delete(v, y - 1)
    if loss.family in ("softmax_topk_entropy",):
        s = x.sum()
        xl = np.where(x > 0.0, x * np.log(np.maximum(x, 1e-300)), 0.0).sum()
        es = (1.0 - s) * math.log1p(-s) if s < 1.0 else 0.0
        return float(xl + es)
    gamma = loss.gamma if loss.smooth else 0.0
    return float(0.5 * gamma * (x @ x) - x.sum())


def _gap_primal_loss(loss, scores, y):
    """Primal loss paired with the block update's conjugate.

    The dual blocks live on the (m-1)-dimensional top-k simplex, whose
    support function is the top-k hinge evaluated WITHOUT the truth's
    zero entry in the candidate pool. For k = 1 this equals eval_loss;
    for k > 1 the two differ whenever the truth's entry would reach the
    top k, and only this variant closes the duality gap. Entropy and
    one-vs-all families are already consistent.
    """
    if loss.family == "softmax_topk_entropy" or loss.ova:
        return eval_loss(loss, ScoreContext(scores, y))
    a = scores - scores[y - 1]
    z = np.delete(a + 1.0, y - 1)
    if loss.smooth:
        variant = "alpha" if "alpha" in loss.family else "beta"
        p = project_topk(z, TopkSimplexSpec(variant, loss.k, loss.gamma, 0.0))
        return (float(z @ p) - 0.5 * float(p @ p)) / loss.gamma
    top = np.sort(z)[z.size - loss.k:]
    if "alpha" in loss.family:
        return max(0.0, float(top.sum()) / loss.k)
    return float(np.maximum(top, 0.0).sum()) / loss.k


def _dual_feasibility_error(loss, a_col, y, lam_n, k):
    """How far -lambda n a_i (truth removed) sits outside the conjugate
    domain. Zero for feasible columns."""
    x = np.delete(-lam_n * a_col, y - 1)
    s = x.sum()
    err = max(0.0, -x.min(), s - 1.0)
    if loss.family == "softmax_topk_entropy" or "alpha" in loss.family:
        err = max(err, x.max() - s / k)
    else:
        err = max(err, x.max() - 1.0 / k)
    return err


def sdca_update_example(state, i, loss):
    """Exactly maximize the dual over block a_i; returns the dual
    objective increase. Mutates state.A, state.W in place."""
    data = state.data
    y = int(data.labels[i])
    x_i = data.features[:, i]
    sq = float(state.sq_norms[i])
    a_old = state.A[:, i].copy()
    lam_n = state.lam_n
    gamma = loss.gamma if loss.smooth else 0.0

    if sq == 0.0 and (loss.family == "softmax_topk_entropy" or gamma == 0.0):
        # example contributes nothing to W; entropy needs alpha > 0 and
        # the nonsmooth hinge subproblem is degenerate, so leave a_i
        state.skipped_updates += 1
        return 0.0

    w_x = state.W.T @ x_i
    q = w_x - sq * a_old
    rest = np.delete(np.arange(data.m), y - 1)

    if loss.family == "softmax_topk_entropy":
        alpha = sq / lam_n
        b = q[rest] - q[y - 1]
        sol = entropy_prox(b, alpha, loss.k)
        a_new = np.empty(data.m)
        a_new[rest] = -sol.x / lam_n
        # truth coordinate from the materialized sum so <1, a_i> = 0 holds
        # to rounding, not just to solver tolerance
        a_new[y - 1] = sol.x.sum() / lam_n
    else:
        denom = sq + gamma * lam_n
        b = (q[rest] + (1.0 - q[y - 1])) / denom
        rho = sq / denom
        variant = "alpha" if "alpha" in loss.family else "beta"
        x = project_topk(b, TopkSimplexSpec(variant, loss.k, 1.0 / lam_n, rho))
        a_new = np.empty(data.m)
        a_new[rest] = -x
        a_new[y - 1] = x.sum()

    delta = a_new - a_old
    # dual increase: conjugate change minus the ||W||^2 change
    conj_old = _conjugate_value(loss, a_old, y, lam_n)
    conj_new = _conjugate_value(loss, a_new, y, lam_n)
    d_w_sq = 2.0 * float(w_x @ delta) + sq * float(delta @ delta)
    incr = (conj_old - conj_new) / data.n - 0.5 * state.lam * d_w_sq
    if incr < -_DUAL_DECREASE_TOL:
        state.dual_violations += 1

    state.A[:, i] = a_new
    state.W += np.outer(x_i, delta)
    return incr


def primal_dual_objectives(state, data, loss, validate=True):
    """Evaluate P(W) and D(A). With validate=True a dual column outside
    the conjugate domain raises (test hook; the updates keep columns
    feasible by construction)."""
    scores = state.W.T @ data.features
    total = 0.0
    for i in range(data.n):
        total += _gap_primal_loss(loss, scores[:, i], int(data.labels[i]))
    reg = 0.5 * state.lam * float((state.W * state.W).sum())
    p = total / data.n + reg

    conj = 0.0
    for i in range(data.n):
        y = int(data.labels[i])
        if validate:
            err = _dual_feasibility_error(loss, state.A[:, i], y,
                                          state.lam_n, loss.k)
            if err > 1e-6:
                raise AssertionError(
                    f"dual column {i} infeasible by {err:.3e}")
        conj += _conjugate_value(loss, state.A[:, i], y, state.lam_n)
    d = -conj / data.n - reg
    return p, d


def sdca_train(data, cfg):
    """Train a linear multiclass model with SDCA.

    Dispatches one-vs-all families to ova_train. Returns (Model,
    TrainReport); the report carries the full gap history and the
    solver's internal counters.
    """
    loss = cfg.loss
    if loss.family not in CONVEX_FAMILIES:
        raise ValueError("sdca_train handles convex losses only; "
                         "use gd_train for the truncated entropy loss")
    if loss.family in OVA_FAMILIES:
        return ova_train(data, cfg)
    if loss.k > data.m - 1:
        raise ValueError(f"training requires k <= m-1 = {data.m - 1}")

    use_fast = cfg.engine == "fast" or (cfg.engine == "auto" and _HAVE_FAST)
    if cfg.engine == "fast" and not _HAVE_FAST:
        raise RuntimeError("fast engine requested but numba is unavailable")
    if use_fast:
        family_code = {"multi_hinge_topk_alpha": 0,
                       "multi_hinge_topk_alpha_smooth": 0,
                       "multi_hinge_topk_beta": 1,
                       "multi_hinge_topk_beta_smooth": 1,
                       "softmax_topk_entropy": 2}[loss.family]
        gamma = loss.gamma if loss.smooth else 0.0
        xt = np.ascontiguousarray(data.features.T)

    state = DualState(data, cfg.lam, cfg.seed)
    report = TrainReport()
    start = time.perf_counter()
    for epoch in range(1, cfg.max_epochs + 1):
        order = state.rng.permutation(data.n)
        if use_fast:
            viol, skip = _fast._sweep(xt, state.sq_norms, data.labels,
                                      state.A, state.W, order, loss.k,
                                      gamma, state.lam_n, state.lam,
                                      family_code)
            state.dual_violations += int(viol)
            state.skipped_updates += int(skip)
        else:
            for i in order:
                sdca_update_example(state, int(i), loss)
        state.epoch = epoch
        if epoch % cfg.w_refresh_every == 0:
            state.refresh_w()
        if epoch % cfg.gap_check_every == 0 or epoch == cfg.max_epochs:
            if use_fast:
                p, d = _fast._objectives(xt, state.sq_norms, data.labels,
                                         state.A, state.W, loss.k, gamma,
                                         state.lam_n, state.lam, family_code)
            else:
                p, d = primal_dual_objectives(state, data, loss,
                                              validate=False)
            gap = report.record(epoch, p, d, time.perf_counter() - start, cfg.log)
            if gap <= cfg.gap_tolerance:
                report.converged = True
                break
    report.wall_time = time.perf_counter() - start
    report.dual_violations = state.dual_violations
    report.w_refreshes = state.w_refreshes
    report.skipped_updates = state.skipped_updates
    model = Model(weights=state.W.copy(), loss=loss, lam=cfg.lam)
    return model, report


# ---------------------------------------------------------------------------
# one-vs-all reduction: m binary problems with scalar duals


def _binary_primal_value(family, gamma, margin):
    if family == "ova_hinge":
        return max(0.0, 1.0 - margin)
    if family == "ova_logistic":
        return float(np.logaddexp(0.0, -margin))
    if margin >= 1.0:
        return 0.0
    if margin <= 1.0 - gamma:
        return 1.0 - margin - 0.5 * gamma
    return (margin - 1.0) ** 2 / (2.0 * gamma)


def _binary_conjugate_gain(family, gamma, s):
    # -phi*(-s y), expressed in the flipped dual s in [0, 1]
    if family == "ova_logistic":
        h = 0.0
        if 0.0 < s < 1.0:
            h = -(s * math.log(s) + (1.0 - s) * math.log(1.0 - s))
        return h
    if family == "ova_hinge":
        return s
    return s - 0.5 * gamma * s * s


def _binary_update(family, gamma, s_old, q, r):
    """Exact maximizer of the scalar dual piece; q is the signed margin
    of the current primal iterate, r = ||x||^2 / (lambda n)."""
    if family == "ova_logistic":
        lo, hi = 1e-15, 1.0 - 1e-15
        s = min(max(s_old, lo), hi)
        for _ in range(100):
            h = math.log((1.0 - s) / s) - q - (s - s_old) * r
            if abs(h) <= 1e-12 * max(1.0, abs(q) + r):
                return s
            if h > 0.0:
                lo = s
            else:
                hi = s
            hp = -1.0 / (s * (1.0 - s)) - r
            step = s - h / hp
            s = step if lo < step < hi else 0.5 * (lo + hi)
        return s
    denom = r + gamma
    if denom == 0.0:
        return 1.0 if q < 1.0 else 0.0
    return min(1.0, max(0.0, (1.0 - q + s_old * r) / denom))


def ova_train(data, cfg):
    """One-vs-all reduction: train one binary classifier per class and
    stack the columns. Each subproblem runs its own SDCA to the gap
    tolerance; reports are aggregated and kept per class."""
    loss = cfg.loss
    if loss.family not in OVA_FAMILIES:
        raise ValueError("ova_train requires a one-vs-all family")
    counts = np.bincount(data.labels, minlength=data.m + 1)[1:]
    missing = np.nonzero(counts == 0)[0]
    if missing.size:
        raise ValueError(f"class {missing[0] + 1} absent from the data")

    gamma = loss.gamma if loss.family == "ova_hinge_smooth" else 0.0
    lam_n = cfg.lam * data.n
    sq_norms = (data.features * data.features).sum(axis=0)
    r_coef = sq_norms / lam_n
    weights = np.zeros((data.d, data.m))
    report = TrainReport()
    start = time.perf_counter()
    seeds = np.random.SeedSequence(cfg.seed).spawn(data.m)

    for cls in range(data.m):
        ypm = np.where(data.labels == cls + 1, 1.0, -1.0)
        rng = np.random.Generator(np.random.Philox(seeds[cls]))
        w = np.zeros(data.d)
        s = np.zeros(data.n)
        sub = TrainReport()
        for epoch in range(1, cfg.max_epochs + 1):
            for i in rng.permutation(data.n):
                q = ypm[i] * float(w @ data.features[:, i])
                s_new = _binary_update(loss.family, gamma, s[i], q, float(r_coef[i]))
                if s_new != s[i]:
                    w += ((s_new - s[i]) * ypm[i] / lam_n) * data.features[:, i]
                    s[i] = s_new
            margins = ypm * (w @ data.features)
            p = sum(_binary_primal_value(loss.family, gamma, mg) for mg in margins)
            p = p / data.n + 0.5 * cfg.lam * float(w @ w)
            d = sum(_binary_conjugate_gain(loss.family, gamma, si) for si in s)
            d = d / data.n - 0.5 * cfg.lam * float(w @ w)
            gap = sub.record(epoch, p, d, time.perf_counter() - start)
            if gap <= cfg.gap_tolerance:
                sub.converged = True
                break
        weights[:, cls] = w
        report.sub_reports.append(sub)

    p = sum(r.primal for r in report.sub_reports)
    d = sum(r.dual for r in report.sub_reports)
    report.record(max(r.epochs for r in report.sub_reports), p, d,
                  time.perf_counter() - start, cfg.log)
    report.converged = all(r.converged for r in report.sub_reports)
    report.wall_time = time.perf_counter() - start
    model = Model(weights=weights, loss=loss, lam=cfg.lam)
    return model, report
