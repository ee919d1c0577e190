"""Loss functions for top-k multiclass classification.

Covers the one-vs-all binary losses (hinge, smoothed hinge, logistic),
the multiclass hinge and softmax, the two top-k hinge variants with
their smoothed versions, the top-k entropy loss, and its nonconvex
truncated form. Everything is expressed on a single score vector; the
solvers sum these over a dataset.

Conventions: labels are 1-based; a = f - f_y is the score-difference
vector (a_y = 0) and c = 1 - e_y marks the non-truth classes. Gradients
are taken with respect to the raw score vector f, so for every
multiclass family they sum to zero.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .entropy import topk_entropy_loss
from .projections import TopkSimplexSpec, project_topk

__all__ = [
    "FAMILIES",
    "OVA_FAMILIES",
    "SMOOTH_FAMILIES",
    "CONVEX_FAMILIES",
    "LossSpec",
    "ScoreContext",
    "topk_error",
    "bayes_topk_error",
    "eval_loss",
    "grad_loss",
]

OVA_FAMILIES = ("ova_hinge", "ova_hinge_smooth", "ova_logistic")
HINGE_TOPK_FAMILIES = (
    "multi_hinge_topk_alpha",
    "multi_hinge_topk_beta",
    "multi_hinge_topk_alpha_smooth",
    "multi_hinge_topk_beta_smooth",
)
SMOOTH_FAMILIES = (
    "ova_hinge_smooth",
    "multi_hinge_topk_alpha_smooth",
    "multi_hinge_topk_beta_smooth",
)
FAMILIES = OVA_FAMILIES + HINGE_TOPK_FAMILIES + (
    "softmax_topk_entropy",
    "truncated_topk_entropy",
)
CONVEX_FAMILIES = tuple(f for f in FAMILIES if f != "truncated_topk_entropy")


@dataclass(frozen=True)
class LossSpec:
    """Selects a loss family together with its k and smoothing gamma.

    gamma only matters for the *_smooth families and is ignored (but
    still validated as positive) elsewhere.
    """

    family: str
    k: int = 1
    gamma: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown loss family {self.family!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.gamma <= 0 and self.family in SMOOTH_FAMILIES:
            raise ValueError("gamma must be > 0 for smooth families")

    @property
    def smooth(self):
        return self.family in SMOOTH_FAMILIES

    @property
    def ova(self):
        return self.family in OVA_FAMILIES

    @property
    def convex(self):
        return self.family != "truncated_topk_entropy"


@dataclass(frozen=True)
class ScoreContext:
    """Score vector with its ground truth and the derived a, c vectors."""

    scores: np.ndarray
    y: int
    a: np.ndarray = field(init=False)
    c: np.ndarray = field(init=False)

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        if scores.ndim != 1 or scores.size < 2:
            raise ValueError("scores must be a vector of length >= 2")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        if not 1 <= self.y <= scores.size:
            raise ValueError(f"label {self.y} out of range 1..{scores.size}")
        object.__setattr__(self, "scores", scores)
        a = scores - scores[self.y - 1]
        c = np.ones(scores.size)
        c[self.y - 1] = 0.0
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)

    @property
    def m(self):
        return self.scores.size


def topk_error(scores, y, k):
    """0/1 top-k error: 1 iff the k-th largest score strictly exceeds
    the truth's score (ties never count against the truth)."""
    scores = np.asarray(scores, dtype=float)
    m = scores.size
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}]")
    kth = np.partition(scores, m - k)[m - k]
    return int(kth > scores[y - 1])


def bayes_topk_error(probs, k):
    """Best achievable top-k error for class probabilities probs:
    one minus the sum of the k largest entries."""
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0):
        raise ValueError("probabilities must be nonnegative")
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("probabilities must sum to 1")
    m = probs.size
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}]")
    return float(1.0 - np.sort(probs)[m - k:].sum())


def _log1p_sum_exp(vals):
    """log(1 + sum(exp(vals))), overflow-safe."""
    if vals.size == 0:
        return 0.0
    mx = max(0.0, float(np.max(vals)))
    return mx + math.log(math.exp(-mx) + np.exp(vals - mx).sum())


def _binary_margin(ctx):
    other = 1 if ctx.y == 2 else 2
    return float(ctx.scores[ctx.y - 1] - ctx.scores[other - 1])


def _binary_loss(family, margin, gamma):
    if family == "ova_hinge":
        return max(0.0, 1.0 - margin)
    if family == "ova_logistic":
        return float(np.logaddexp(0.0, -margin))
    # smoothed hinge: quadratic on the margin window of width gamma
    if margin >= 1.0:
        return 0.0
    if margin <= 1.0 - gamma:
        return 1.0 - margin - 0.5 * gamma
    return (margin - 1.0) ** 2 / (2.0 * gamma)


def _binary_loss_deriv(family, margin, gamma):
    if family == "ova_hinge":
        return -1.0 if margin < 1.0 else 0.0
    if family == "ova_logistic":
        return -1.0 / (1.0 + math.exp(margin))
    if margin >= 1.0:
        return 0.0
    if margin <= 1.0 - gamma:
        return -1.0
    return (margin - 1.0) / gamma


def _topk_set(z, k):
    # indices of the k largest entries, ties resolved toward lower index
    return np.lexsort((np.arange(z.size), -z))[:k]


def _truncation_set(scores, y, k):
    # the m-k smallest non-truth scores; ties toward the lower class index
    rest = np.delete(np.arange(scores.size), y - 1)
    vals = scores[rest]
    order = np.lexsort((rest, vals))
    return np.sort(rest[order[: scores.size - k]])


def _grad_from_a(grad_a, y):
    g = grad_a.copy()
    g[y - 1] -= grad_a.sum()
    return g


def eval_loss(spec, ctx):
    """Value of the selected loss at one (scores, truth) pair."""
    m = ctx.m
    if spec.ova:
        if m != 2:
            raise ValueError("one-vs-all losses use 2-class score vectors")
        return _binary_loss(spec.family, _binary_margin(ctx), spec.gamma)
    if spec.family == "truncated_topk_entropy":
        if spec.k > m - 1:
            raise ValueError("truncated entropy requires k <= m-1")
        keep = _truncation_set(ctx.scores, ctx.y, spec.k)
        return _log1p_sum_exp(ctx.a[keep])
    if spec.family == "softmax_topk_entropy":
        if spec.k == 1:
            rest = np.delete(np.arange(m), ctx.y - 1)
            return _log1p_sum_exp(ctx.a[rest])
        return topk_entropy_loss(ctx.a, ctx.y, spec.k).loss_value
    if spec.k > m:
        raise ValueError("k must be <= number of classes")
    z = ctx.a + ctx.c
    top = z[_topk_set(z, spec.k)]
    if spec.family == "multi_hinge_topk_alpha":
        return max(0.0, float(top.sum()) / spec.k)
    if spec.family == "multi_hinge_topk_beta":
        return float(np.maximum(top, 0.0).sum()) / spec.k
    variant = "alpha" if "alpha" in spec.family else "beta"
    p = project_topk(z, TopkSimplexSpec(variant, spec.k, spec.gamma, 0.0))
    return (float(z @ p) - 0.5 * float(p @ p)) / spec.gamma


def grad_loss(spec, ctx):
    """Gradient (or a deterministic subgradient at hinge kinks) of the
    loss with respect to the score vector."""
    m = ctx.m
    if spec.ova:
        if m != 2:
            raise ValueError("one-vs-all losses use 2-class score vectors")
        d = _binary_loss_deriv(spec.family, _binary_margin(ctx), spec.gamma)
        g = np.zeros(2)
        g[ctx.y - 1] = d
        g[2 - ctx.y] = -d
        return g
    if spec.family == "truncated_topk_entropy":
        keep = _truncation_set(ctx.scores, ctx.y, spec.k)
        idx = np.concatenate(([ctx.y - 1], keep))
        vals = ctx.a[idx]
        mx = float(np.max(vals))
        w = np.exp(vals - mx)
        w /= w.sum()
        g = np.zeros(m)
        g[idx] = w
        g[ctx.y - 1] -= 1.0
        return g
    if spec.family == "softmax_topk_entropy":
        if spec.k == 1:
            mx = float(np.max(ctx.a))
            w = np.exp(ctx.a - mx)
            w /= w.sum()
            g = w
            g[ctx.y - 1] -= 1.0
            return g
        sol = topk_entropy_loss(ctx.a, ctx.y, spec.k)
        g = np.zeros(m)
        rest = np.delete(np.arange(m), ctx.y - 1)
        g[rest] = sol.x
        g[ctx.y - 1] = -sol.s
        return g
    z = ctx.a + ctx.c
    if spec.smooth:
        variant = "alpha" if "alpha" in spec.family else "beta"
        p = project_topk(z, TopkSimplexSpec(variant, spec.k, spec.gamma, 0.0))
        return _grad_from_a(p / spec.gamma, ctx.y)
    top = _topk_set(z, spec.k)
    grad_a = np.zeros(m)
    if spec.family == "multi_hinge_topk_alpha":
        if z[top].sum() > 0.0:
            grad_a[top] = 1.0 / spec.k
    else:
        pos = top[z[top] > 0.0]
        grad_a[pos] = 1.0 / spec.k
    return _grad_from_a(grad_a, ctx.y)
