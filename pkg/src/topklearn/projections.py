"""Euclidean projections onto top-k simplices.

Two feasible sets, both subsets of the nonnegative orthant with a total
mass budget r and a per-coordinate cap:

  alpha:  sum(x) <= r,  0 <= x_i <= sum(x) / k   (cap follows the mass)
  beta:   sum(x) <= r,  0 <= x_i <= r / k        (cap fixed by the radius)

project_topk minimizes  ||x - b||^2 + rho * sum(x)^2  over one of these
sets. With rho = 0 this is the plain Euclidean projection; rho > 0 biases
the solution toward small total mass, which is exactly the form of the
dual coordinate update for the smooth top-k hinge losses.

Both solvers sort b once and then scan the finitely many candidate
partitions of coordinates into (at cap / free / at zero), solving a tiny
linear system per candidate and accepting the one whose multipliers are
KKT-consistent. Ties in b are broken toward the lower index.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["TopkSimplexSpec", "project_topk", "project_simplex_cap"]

_TOL = 1e-11


@dataclass(frozen=True)
class TopkSimplexSpec:
    """Which top-k simplex to project onto.

    variant: "alpha" (cap coupled to the coordinate sum) or "beta"
             (cap fixed at radius / k).
    k:       cap denominator, 1 <= k <= dimension of the input.
    radius:  total mass budget r > 0 (r = 0 collapses the set to {0}).
    rho:     weight of the sum(x)^2 bias term; 0 means plain projection.
    """

    variant: str
    k: int
    radius: float = 1.0
    rho: float = 0.0

    def __post_init__(self):
        if self.variant not in ("alpha", "beta"):
            raise ValueError("variant must be 'alpha' or 'beta'")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.radius < 0:
            raise ValueError("radius must be >= 0")
        if self.rho < 0:
            raise ValueError("rho must be >= 0")


def _descending_order(b):
    # Stable descending sort: equal values keep ascending index order, so
    # the lower index enters the cap set first.
    return np.lexsort((np.arange(b.size), -b))


def _materialize(m, order, u, mm, s, d, b_sorted, cap):
    x_sorted = np.zeros(m)
    x_sorted[:u] = cap
    if mm:
        x_sorted[u:u + mm] = np.clip(b_sorted[u:u + mm] - d, 0.0, cap)
    x = np.empty(m)
    x[order] = x_sorted
    return x


def _project_alpha(b, k, r, rho):
    """Scan of (cap set size u, free set size mm) candidates for alpha.

    For a fixed partition, stationarity plus the mass identity give a
    2x2 linear system in (s, D) where s is the total mass and D the
    common shift applied to free coordinates (x_j = b_j - D on the free
    set, x_j = s/k on the cap set).
    """
    m = b.size
    order = _descending_order(b)
    bs = b[order]
    prefix = np.concatenate(([0.0], np.cumsum(bs)))
    scale = max(1.0, float(np.max(np.abs(b))), r)
    tol = _TOL * scale

    for u in range(0, min(k, m) + 1):
        cu = 1.0 - u / k
        bu = prefix[u]
        for mm in range(m - u, -1, -1):
            bm = prefix[u + mm] - prefix[u]
            if u == k and mm == 0:
                # All mass sits on the cap set: s is pinned directly.
                s = bu / (k * rho + 1.0)
                cand = _check_alpha_capped(bs, u, s, k, r, rho, tol)
            else:
                det = cu * cu + mm * (rho + u / (k * k))
                if det <= 0.0:
                    continue
                s = (cu * bm + mm * bu / k) / det
                d = (-cu * bu / k + (rho + u / (k * k)) * bm) / det
                cand = _check_alpha(bs, u, mm, s, d, k, r, rho, tol,
                                    theta_zero=True)
                if cand is None and mm > 0:
                    # Mass budget active: s = r, shift from the free set.
                    s = r
                    d = (bm - r * cu) / mm
                    theta = d * cu - rho * r - u * r / (k * k) + bu / k
                    if theta >= -tol:
                        cand = _check_alpha(bs, u, mm, s, d, k, r, rho,
                                            tol, theta_zero=False)
            if cand is not None:
                s, d = cand
                s = min(max(s, 0.0), r)
                return _materialize(m, order, u, mm, s, d, bs, s / k)
    raise RuntimeError("no KKT-consistent partition found (alpha projection)")


def _check_alpha(bs, u, mm, s, d, k, r, rho, tol, theta_zero):
    if s < -tol or (theta_zero and s > r + tol):
        return None
    cap = max(s, 0.0) / k
    if u and bs[u - 1] - d < cap - tol:
        return None
    if mm:
        if bs[u] - d > cap + tol:
            return None
        if bs[u + mm - 1] - d < -tol:
            return None
    if u + mm < bs.size and bs[u + mm] - d > tol:
        return None
    return s, d


def _check_alpha_capped(bs, u, s, k, r, rho, tol):
    # Candidate with every positive coordinate at the cap; the shift D is
    # only constrained to an interval, so feasibility is an interval check.
    theta = 0.0
    if s > r + tol:
        s = r
        theta = bs[:u].sum() / k - r * (rho + 1.0 / k)
        if theta < -tol:
            return None
    if s < -tol:
        return None
    lo = bs[u] if u < bs.size else -np.inf
    hi = bs[u - 1] - s / k if u else np.inf
    if lo > hi + tol:
        return None
    return s, hi if np.isfinite(hi) else max(lo, 0.0)


def _knapsack_sum(b, d, cap):
    return float(np.clip(b - d, 0.0, cap).sum())


def _solve_knapsack(b, cap, target):
    """Shift d with sum(clip(b - d, 0, cap)) = target, 0 < target <= m*cap.

    The mass function is piecewise linear and non-increasing in d with
    breakpoints at b_j and b_j - cap; locate the bracketing piece and
    solve on it exactly.
    """
    pts = np.unique(np.concatenate((b, b - cap)))
    vals = np.array([_knapsack_sum(b, d, cap) for d in pts])
    if target >= vals[0]:
        return float(pts[0])
    i = int(np.argmax(vals <= target))  # first index with mass <= target
    if vals[i] == target:
        return float(pts[i])
    d0, d1 = pts[i - 1], pts[i]
    v0, v1 = vals[i - 1], vals[i]
    return float(d0 + (v0 - target) * (d1 - d0) / (v0 - v1))


def _project_beta(b, k, r, rho):
    """Biased continuous quadratic knapsack: x = clip(b - D, 0, r/k) with
    D = rho * s + theta and complementarity between theta >= 0 and the
    mass budget s <= r."""
    m = b.size
    cap = r / k
    scale = max(1.0, float(np.max(np.abs(b))), r)
    tol = _TOL * scale

    if rho == 0.0:
        d = 0.0
    else:
        # theta = 0 branch: g(D) = D - rho * S(D) is strictly increasing,
        # so walk the breakpoints and solve on the bracketing piece.
        pts = np.unique(np.concatenate((b, b - cap)))
        g = pts - rho * np.array([_knapsack_sum(b, p, cap) for p in pts])
        if g[-1] <= 0.0:
            d = 0.0  # no mass beyond the largest breakpoint, g(D) = D there
        elif g[0] >= 0.0:
            d = rho * m * cap  # everything saturated below pts[0]
        else:
            i = int(np.argmax(g >= 0.0))
            d0, d1 = pts[i - 1], pts[i]
            s0 = _knapsack_sum(b, d0, cap)
            s1 = _knapsack_sum(b, d1, cap)
            slope = (s1 - s0) / (d1 - d0)
            denom = 1.0 - rho * slope
            d = (rho * (s0 - slope * d0)) / denom
    if _knapsack_sum(b, d, cap) <= r + tol:
        return np.clip(b - d, 0.0, cap)

    # mass budget active: s = r, D = rho * r + theta with theta >= 0
    d = _solve_knapsack(b, cap, r)
    return np.clip(b - d, 0.0, cap)


def project_topk(b, spec):
    """Minimize ||x - b||^2 + rho * <1, x>^2 over the chosen top-k simplex.

    Returns the unique minimizer. Raises ValueError when the input
    dimension is smaller than spec.k or contains non-finite entries.
    """
    b = np.asarray(b, dtype=float)
    if b.ndim != 1:
        raise ValueError("b must be a vector")
    if b.size < spec.k:
        raise ValueError(f"dimension {b.size} < k = {spec.k}")
    if not np.all(np.isfinite(b)):
        raise ValueError("b must be finite")
    if spec.radius == 0.0:
        return np.zeros_like(b)
    if spec.variant == "alpha":
        return _project_alpha(b, spec.k, spec.radius, spec.rho)
    return _project_beta(b, spec.k, spec.radius, spec.rho)


def project_simplex_cap(b, r):
    """Euclidean projection onto {x >= 0, sum(x) <= r}.

    The k = 1 member of both simplex families; kept separate because it
    is a useful building block and an independent cross-check.
    """
    b = np.asarray(b, dtype=float)
    if r < 0:
        raise ValueError("r must be >= 0")
    if r == 0:
        return np.zeros_like(b)
    x = np.maximum(b, 0.0)
    if x.sum() <= r:
        return x
    # project onto the simplex {x >= 0, sum(x) = r}: sort and threshold
    srt = np.sort(b)[::-1]
    css = np.cumsum(srt) - r
    idx = np.arange(1, b.size + 1)
    valid = srt - css / idx > 0
    n_pos = int(np.nonzero(valid)[0][-1]) + 1
    tau = css[n_pos - 1] / n_pos
    return np.maximum(b - tau, 0.0)
