"""Entropic solvers over the sum-coupled top-k simplex.

Two closely related problems that have no closed form for k > 1:

* topk_entropy_loss evaluates the top-k entropy loss, i.e. maximizes
      <a, x> - <x, log x> - (1-s) log(1-s)
  over the top-k simplex (s = <1, x>).

* entropy_prox solves the dual coordinate step for the same loss family,
  i.e. minimizes
      (alpha/2) (<x,x> + s^2) - <b, x> + <x, log x> + (1-s) log(1-s)
  over the top-k simplex.

Both are solved by growing the set of capped coordinates (x_j = s/k)
greedily from the largest inputs: for a fixed cap set the optimality
conditions collapse to one or two smooth scalar equations. The loss
problem yields closed forms; the prox needs the Lambert kernel V and a
Newton solve. At most k growth steps are ever required.

Coordinates never hit zero and the total mass never reaches 1 (the
entropy terms have infinite slope there), so only the cap constraints
can be active.
"""

import math
from dataclasses import dataclass

import numpy as np

from .lambert import lambert_v, lambert_v_inv

__all__ = ["EntropySolution", "topk_entropy_loss", "entropy_prox"]

_FEAS_TOL = 1e-9
_NEWTON_TOL = 1e-10
_MAX_NEWTON = 100


@dataclass(frozen=True)
class EntropySolution:
    """Solution of one entropic subproblem.

    x:          optimizer, same length and order as the input vector
                (truth coordinate already removed by the caller).
    s:          total mass <1, x>, always in [0, 1).
    t:          multiplier of the mass-coupling constraint. When every
                coordinate is capped t is not pinned by stationarity; the
                boundary value making the smallest cap multiplier zero is
                reported.
    loss_value: loss problem: the attained loss; prox problem: the
                attained objective value.
    iterations: number of cap-set growth steps (at most k).
    """

    x: np.ndarray
    s: float
    t: float
    loss_value: float
    iterations: int


def _softplus(v):
    return max(v, 0.0) + math.log1p(math.exp(-abs(v)))


def _descending(a):
    return np.lexsort((np.arange(a.size), -a))


def topk_entropy_loss(u, y, k):
    """Top-k entropy loss of a score-difference vector.

    u is the full m-vector of differences f_j - f_true (so u[y-1] = 0);
    y is the 1-based truth index; 1 <= k <= m-1. For k = 1 the result
    equals the softmax loss. The returned x is indexed like u with the
    truth coordinate removed.
    """
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("scores must be finite")
    m = u.size
    if not 1 <= k <= m - 1:
        raise ValueError(f"k must be in [1, m-1], got k={k}, m={m}")
    a = np.delete(u, y - 1)
    m1 = a.size

    order = _descending(a)
    asrt = a[order]
    prefix = np.concatenate(([0.0], np.cumsum(asrt)))
    scale = max(1.0, float(np.max(np.abs(a))))

    nu = 0
    growth = 0
    while True:
        rho = nu / k
        asum = prefix[nu] / k
        if nu == m1:
            # every coordinate capped (only reachable when k = m-1)
            log_q = -math.log(k) - asum
            log1p_q = _softplus(log_q)
            s = min(1.0 / (1.0 + math.exp(log_q)), 1.0 - 1e-16)
            t = math.inf
            break
        mx = asrt[nu]
        log_z = mx + math.log(np.exp(asrt[nu:] - mx).sum())
        log_q = ((1.0 - rho) * math.log1p(-rho) if rho < 1.0 else 0.0) \
            - rho * math.log(k) - (1.0 - rho) * log_z - asum
        log1p_q = _softplus(log_q)
        s = min(1.0 / (1.0 + math.exp(log_q)), 1.0 - 1e-16)
        t = log_z + log1p_q - math.log1p(-rho)
        # cap-set consistency: free coordinates must fall below the cap,
        # capped ones above it
        bound = -log1p_q - math.log(k) + t  # log(s/k) + t
        if asrt[nu] <= bound + _FEAS_TOL * scale or nu >= k:
            break
        nu += 1
        growth += 1

    log_s = -log1p_q
    log_1ms = log_q - log1p_q
    if nu == 0:
        value = t
    else:
        t_term = (1.0 - nu / k) * s * t if nu < k else 0.0
        value = (prefix[nu] / k) * s - (nu / k) * s * (log_s - math.log(k)) \
            + t_term - (1.0 - s) * log_1ms

    x_sorted = np.empty(m1)
    x_sorted[:nu] = s / k
    if nu < m1:
        x_sorted[nu:] = np.minimum(np.exp(asrt[nu:] - t), s / k)
    x = np.empty(m1)
    x[order] = x_sorted
    return EntropySolution(x=x, s=s, t=t, loss_value=value, iterations=growth)


def _prox_objective(x, s, b, alpha):
    xl = np.where(x > 0.0, x * np.log(np.maximum(x, 1e-300)), 0.0).sum()
    ent_s = (1.0 - s) * math.log1p(-s) if s < 1.0 else 0.0
    return 0.5 * alpha * (float(x @ x) + s * s) - float(b @ x) + xl + ent_s


def _scalar_t_equation(asrt_m, alpha, t):
    # g(t) = V(alpha - t) + sum_M V(a_j - t) - alpha, strictly decreasing
    v = lambert_v(alpha - t)
    g = v - alpha
    gp = -v / (1.0 + v)
    for aj in asrt_m:
        vj = lambert_v(aj - t)
        g += vj
        gp -= vj / (1.0 + vj)
    return g, gp


def _solve_scalar_t(asrt_m, alpha):
    """Root of V(alpha - t) + sum_M V(a_j - t) = alpha by safeguarded
    Newton with an expanding bisection bracket (V is monotone, so the
    bracket is safe)."""
    hi = float(max(np.max(asrt_m), alpha)) + 1.0
    lo = hi - 2.0
    step = 2.0
    while _scalar_t_equation(asrt_m, alpha, hi)[0] > 0.0:
        hi += step
        step *= 2.0
    step = 2.0
    while _scalar_t_equation(asrt_m, alpha, lo)[0] < 0.0:
        lo -= step
        step *= 2.0
    t = 0.5 * (lo + hi)
    for _ in range(_MAX_NEWTON):
        g, gp = _scalar_t_equation(asrt_m, alpha, t)
        if abs(g) <= _NEWTON_TOL * max(1.0, alpha):
            return t
        if g > 0.0:
            lo = t
        else:
            hi = t
        t_new = t - g / gp if gp != 0.0 else 0.5 * (lo + hi)
        if not lo < t_new < hi:
            t_new = 0.5 * (lo + hi)
        t = t_new
    raise RuntimeError(f"scalar prox equation did not converge, residual {g:.3e}")


def _solve_capped_s(alpha, k, asum_total):
    """All coordinates capped: solve V^-1(alpha(1-s)) - V^-1(alpha s / k)
    + A - alpha = 0 for s in (0, 1); the left side is strictly
    decreasing."""
    def phi(s):
        return (lambert_v_inv(alpha * (1.0 - s))
                - lambert_v_inv(alpha * s / k) + asum_total - alpha)

    lo, hi = 1e-15, 1.0 - 1e-15
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def entropy_prox(b, alpha, k):
    """Minimize the entropic prox objective over the top-k simplex.

    b has one entry per non-truth class, alpha > 0 is the curvature of
    the quadratic part, and 1 <= k <= len(b). Raises on nonpositive
    alpha and on Newton failure (the residual is reported).
    """
    b = np.asarray(b, dtype=float)
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    if not np.all(np.isfinite(b)):
        raise ValueError("b must be finite")
    m1 = b.size
    if not 1 <= k <= m1:
        raise ValueError(f"k must be in [1, {m1}], got {k}")

    order = _descending(b)
    asrt = b[order]
    prefix = np.concatenate(([0.0], np.cumsum(asrt)))
    scale = max(1.0, float(np.max(np.abs(b))), alpha)

    # cap-free solution first; carry the mass deficit delta = 1 - s
    # explicitly (it can sit far below the resolution of 1 - s)
    t = _solve_scalar_t(asrt, alpha)
    delta = lambert_v(alpha - t) / alpha
    s = 1.0 - delta
    nu = 0
    growth = 0
    while True:
        cap_edge = t + lambert_v_inv(alpha * s / k) if s > 0.0 else math.inf
        if nu >= min(k, m1) or (nu < m1 and asrt[nu] <= cap_edge + _FEAS_TOL * scale):
            break
        nu += 1
        growth += 1
        if nu == m1:
            # every coordinate capped (k = len(b)); single unknown s
            s = _solve_capped_s(alpha, k, prefix[nu] / k)
            t = asrt[nu - 1] - lambert_v_inv(alpha * s / k)
            break
        delta, t = _newton_capped(asrt, prefix, alpha, k, nu, delta, t)
        s = 1.0 - delta

    # reported s stays strictly below 1 even if the deficit underflowed
    s = min(s, 1.0 - 1e-16)
    x_sorted = np.empty(m1)
    cap = s / k
    x_sorted[:nu] = cap
    if nu < m1:
        args = asrt[nu:] - t
        vals = np.array([lambert_v(v) for v in args]) / alpha
        x_sorted[nu:] = np.minimum(vals, cap)
    x = np.empty(m1)
    x[order] = x_sorted
    value = _prox_objective(x, float(x_sorted.sum()), b, alpha)
    t_out = t if nu < m1 else asrt[nu - 1] - lambert_v_inv(alpha * s / k)
    return EntropySolution(x=x, s=s, t=t_out, loss_value=value,
                           iterations=growth)


def _newton_capped(asrt, prefix, alpha, k, nu, delta0, t0):
    """Damped Newton on (sigma, t) with s = sigmoid(sigma) for the system

        F1 = alpha (1-rho) s - sum_M V(a_j - t)
        F2 = (1-rho) t + V^-1(alpha(1-s)) - rho V^-1(alpha s / k) + A - alpha

    warm-started from the previous partition's solution. The mass
    deficit delta = 1 - s is carried explicitly: near the boundary it
    can be as small as e^-700, far below the resolution of 1 - s.
    Returns (delta, t).
    """
    rho = nu / k
    asum = prefix[nu] / k
    tail = asrt[nu:]
    delta = min(max(delta0, 1e-300), 1.0 - 1e-12)
    sigma = math.log1p(-delta) - math.log(delta)  # log(s / (1-s))

    def _deficit(sig):
        # sigmoid(-sig), overflow-safe; sig capped so delta stays normal
        sig = min(max(sig, -700.0), 700.0)
        if sig >= 0.0:
            e = math.exp(-sig)
            return e / (1.0 + e)
        return 1.0 / (1.0 + math.exp(sig))

    def residual(sigma, t):
        delta = _deficit(sigma)
        s = 1.0 - delta
        vs = np.array([lambert_v(aj - t) for aj in tail])
        f1 = alpha * (1.0 - rho) * s - vs.sum()
        f2 = ((1.0 - rho) * t + alpha * delta + math.log(alpha * delta)
              - rho * lambert_v_inv(alpha * s / k) + asum - alpha)
        return f1, f2, delta, vs

    t = t0
    f1, f2, delta, vs = residual(sigma, t)
    norm = math.hypot(f1, f2)
    step_cap = 100.0 * max(1.0, abs(t0))
    for _ in range(_MAX_NEWTON):
        if norm <= _NEWTON_TOL * max(1.0, alpha):
            return delta, t
        s = 1.0 - delta
        ds = s * delta  # d s / d sigma
        j11 = alpha * (1.0 - rho) * ds
        j12 = float((vs / (1.0 + vs)).sum())
        j21 = (-alpha - 1.0 / delta - rho * alpha / k - rho / s) * ds
        j22 = 1.0 - rho
        det = j11 * j22 - j12 * j21
        if det == 0.0:
            raise RuntimeError("singular Jacobian in capped Newton")
        dsig = -(f1 * j22 - f2 * j12) / det
        dt = -(j11 * f2 - j21 * f1) / det
        biggest = max(abs(dsig), abs(dt))
        if biggest > step_cap:
            dsig *= step_cap / biggest
            dt *= step_cap / biggest
        # backtrack until the residual shrinks
        damp = 1.0
        for _ in range(60):
            f1n, f2n, dn, vsn = residual(sigma + damp * dsig, t + damp * dt)
            new_norm = math.hypot(f1n, f2n)
            if new_norm < norm:
                break
            damp *= 0.5
        sigma += damp * dsig
        t += damp * dt
        f1, f2, delta, vs = f1n, f2n, dn, vsn
        norm = new_norm
    raise RuntimeError(f"capped Newton did not converge, residual {norm:.3e}")
