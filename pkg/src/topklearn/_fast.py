"""Numba-compiled inner loops for the dual solver.

Ports of the reference algorithms in projections.py, entropy.py,
lambert.py, and sdca.py, specialized for the per-example update sweep:
one call runs a whole epoch. Semantics match the reference path (same
partitions, same tie rules, same safeguards); tests assert equivalence.

Everything here is an implementation detail: sdca.py falls back to the
pure-numpy path when numba is unavailable.
"""

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap

_NJIT = dict(cache=True, fastmath=False)

_C0 = 0.56969284883003407
_C1 = 0.36160170981622225
_C2 = 0.06722351754064806
_C3 = -0.00058059245343242689


@njit(**_NJIT)
def _lambert_v(t):
    if t < -36.8:
        return math.exp(t)
    if t < -2.0:
        z = math.exp(t)
        x = z * (1.0 - z * (1.0 - 1.5 * z * (1.0 - (16.0 / 9.0) * z)))
    elif t <= 2.0:
        x = _C0 + t * (_C1 + t * (_C2 + t * _C3))
    else:
        lt = math.log(t)
        x = t - lt + lt / t
    tol = 1e-14 * max(1.0, abs(t))
    for _ in range(4):
        f = x + math.log(x) - t
        if abs(f) <= tol:
            break
        fp = (x + 1.0) / x
        u = f / fp
        c2 = -1.0 / (2.0 * x * x * fp)
        c3 = 2.0 / (6.0 * x * x * x * fp)
        c4 = -6.0 / (24.0 * x ** 4 * fp)
        x = x - u * (1.0 + u * (c2 + u * (2.0 * c2 * c2 - c3
                                          + u * (5.0 * c2 ** 3 - 5.0 * c2 * c3 + c4))))
    return x


@njit(**_NJIT)
def _sort_desc_stable(b, order):
    # insertion sort: descending by value, ties keep ascending index
    m = b.size
    for i in range(m):
        order[i] = i
    for i in range(1, m):
        key = order[i]
        kv = b[key]
        j = i - 1
        while j >= 0 and b[order[j]] < kv:
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = key


@njit(**_NJIT)
def _project_alpha(b, k, r, rho, order, bs, prefix, x):
    """Biased projection onto the sum-capped top-k simplex; mirrors
    projections._project_alpha. Returns nothing; writes x."""
    m = b.size
    if r == 0.0:
        for i in range(m):
            x[i] = 0.0
        return
    _sort_desc_stable(b, order)
    mx = 0.0
    for i in range(m):
        bs[i] = b[order[i]]
        if abs(bs[i]) > mx:
            mx = abs(bs[i])
    prefix[0] = 0.0
    for i in range(m):
        prefix[i + 1] = prefix[i] + bs[i]
    tol = 1e-11 * max(1.0, mx, r)

    kk = float(k)
    u_max = k if k < m else m
    for u in range(u_max + 1):
        cu = 1.0 - u / kk
        bu = prefix[u]
        for mm in range(m - u, -1, -1):
            bm = prefix[u + mm] - prefix[u]
            s = -1.0
            d = 0.0
            ok = False
            if u == k and mm == 0:
                s = bu / (kk * rho + 1.0)
                theta_ok = True
                if s > r + tol:
                    s = r
                    theta = bu / kk - r * (rho + 1.0 / kk)
                    theta_ok = theta >= -tol
                if theta_ok and s >= -tol:
                    lo = bs[u] if u < m else -1e300
                    hi = bs[u - 1] - s / kk if u > 0 else 1e300
                    if lo <= hi + tol:
                        d = hi if u > 0 else (lo if lo > 0.0 else 0.0)
                        ok = True
            else:
                det = cu * cu + mm * (rho + u / (kk * kk))
                if det > 0.0:
                    s = (cu * bm + mm * bu / kk) / det
                    d = (-cu * bu / kk + (rho + u / (kk * kk)) * bm) / det
                    ok = _alpha_consistent(bs, m, u, mm, s, d, kk, r, tol, True)
                    if not ok and mm > 0:
                        s = r
                        d = (bm - r * cu) / mm
                        theta = d * cu - rho * r - u * r / (kk * kk) + bu / kk
                        if theta >= -tol:
                            ok = _alpha_consistent(bs, m, u, mm, s, d, kk, r,
                                                   tol, False)
            if ok:
                if s < 0.0:
                    s = 0.0
                if s > r:
                    s = r
                cap = s / kk
                for i in range(m):
                    x[i] = 0.0
                for i in range(u):
                    x[order[i]] = cap
                for i in range(u, u + mm):
                    v = bs[i] - d
                    if v < 0.0:
                        v = 0.0
                    elif v > cap:
                        v = cap
                    x[order[i]] = v
                return
    # unreachable for finite input; kept as a loud guard
    for i in range(m):
        x[i] = np.nan


@njit(**_NJIT)
def _alpha_consistent(bs, m, u, mm, s, d, kk, r, tol, theta_zero):
    if s < -tol:
        return False
    if theta_zero and s > r + tol:
        return False
    cap = (s if s > 0.0 else 0.0) / kk
    if u > 0 and bs[u - 1] - d < cap - tol:
        return False
    if mm > 0:
        if bs[u] - d > cap + tol:
            return False
        if bs[u + mm - 1] - d < -tol:
            return False
    if u + mm < m and bs[u + mm] - d > tol:
        return False
    return True


@njit(**_NJIT)
def _knapsack_mass(b, d, cap):
    s = 0.0
    for i in range(b.size):
        v = b[i] - d
        if v > cap:
            v = cap
        if v > 0.0:
            s += v
    return s


@njit(**_NJIT)
def _project_beta(b, k, r, rho, pts, x):
    """Biased continuous quadratic knapsack; mirrors
    projections._project_beta (exact piecewise-linear root finding)."""
    m = b.size
    if r == 0.0:
        for i in range(m):
            x[i] = 0.0
        return
    cap = r / k
    mx = 0.0
    for i in range(m):
        pts[i] = b[i]
        pts[m + i] = b[i] - cap
        if abs(b[i]) > mx:
            mx = abs(b[i])
    tol = 1e-11 * max(1.0, mx, r)
    pts_v = np.sort(pts)

    d = 0.0
    if rho > 0.0:
        g_last = pts_v[2 * m - 1]  # mass is 0 there, g = D
        g_first = pts_v[0] - rho * m * cap
        if g_last <= 0.0:
            d = 0.0
        elif g_first >= 0.0:
            d = rho * m * cap
        else:
            i_hi = 0
            for i in range(2 * m):
                if pts_v[i] - rho * _knapsack_mass(b, pts_v[i], cap) >= 0.0:
                    i_hi = i
                    break
            d0 = pts_v[i_hi - 1]
            d1 = pts_v[i_hi]
            s0 = _knapsack_mass(b, d0, cap)
            s1 = _knapsack_mass(b, d1, cap)
            slope = (s1 - s0) / (d1 - d0)
            d = (rho * (s0 - slope * d0)) / (1.0 - rho * slope)
    if _knapsack_mass(b, d, cap) > r + tol:
        # mass budget active: exact threshold with S(d) = r
        target = r
        if target >= _knapsack_mass(b, pts_v[0], cap):
            d = pts_v[0]
        else:
            i_at = 2 * m - 1
            for i in range(2 * m):
                if _knapsack_mass(b, pts_v[i], cap) <= target:
                    i_at = i
                    break
            vi = _knapsack_mass(b, pts_v[i_at], cap)
            if vi == target:
                d = pts_v[i_at]
            else:
                d0 = pts_v[i_at - 1]
                d1 = pts_v[i_at]
                v0 = _knapsack_mass(b, d0, cap)
                d = d0 + (v0 - target) * (d1 - d0) / (v0 - vi)
    for i in range(m):
        v = b[i] - d
        if v < 0.0:
            v = 0.0
        elif v > cap:
            v = cap
        x[i] = v


@njit(**_NJIT)
def _prox_scalar_t(bs, nu, alpha):
    """Root of V(alpha - t) + sum_{j>=nu} V(bs[j] - t) = alpha."""
    m = bs.size
    hi = alpha if alpha > bs[nu] else bs[nu]
    hi += 1.0
    lo = hi - 2.0
    step = 2.0
    for _ in range(200):
        g = _lambert_v(alpha - hi) - alpha
        for j in range(nu, m):
            g += _lambert_v(bs[j] - hi)
        if g <= 0.0:
            break
        hi += step
        step *= 2.0
    step = 2.0
    for _ in range(200):
        g = _lambert_v(alpha - lo) - alpha
        for j in range(nu, m):
            g += _lambert_v(bs[j] - lo)
        if g >= 0.0:
            break
        lo -= step
        step *= 2.0
    t = 0.5 * (lo + hi)
    for _ in range(100):
        v0 = _lambert_v(alpha - t)
        g = v0 - alpha
        gp = -v0 / (1.0 + v0)
        for j in range(nu, m):
            vj = _lambert_v(bs[j] - t)
            g += vj
            gp -= vj / (1.0 + vj)
        if abs(g) <= 1e-10 * max(1.0, alpha):
            return t
        if g > 0.0:
            lo = t
        else:
            hi = t
        tn = t - g / gp if gp != 0.0 else 0.5 * (lo + hi)
        if not (lo < tn < hi):
            tn = 0.5 * (lo + hi)
        t = tn
    return t


@njit(**_NJIT)
def _deficit(sig):
    # sigmoid(-sig), overflow-safe; sig capped so delta stays normal
    if sig > 700.0:
        sig = 700.0
    elif sig < -700.0:
        sig = -700.0
    if sig >= 0.0:
        e = math.exp(-sig)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(sig))


@njit(**_NJIT)
def _prox_capped_newton(bs, nu, alpha, k, delta0, t0):
    """Damped Newton on (sigma, t) for the partly-capped system, carrying
    the mass deficit delta = 1 - s explicitly; returns (delta, t, ok)."""
    m = bs.size
    kk = float(k)
    rho = nu / kk
    asum = 0.0
    for j in range(nu):
        asum += bs[j]
    asum /= kk
    delta = delta0
    if delta < 1e-300:
        delta = 1e-300
    elif delta > 1.0 - 1e-12:
        delta = 1.0 - 1e-12
    sigma = math.log1p(-delta) - math.log(delta)
    t = t0
    step_cap = 100.0 * max(1.0, abs(t0))

    s = 1.0 - delta
    f1 = alpha * (1.0 - rho) * s
    j12 = 0.0
    for j in range(nu, m):
        vj = _lambert_v(bs[j] - t)
        f1 -= vj
        j12 += vj / (1.0 + vj)
    ask = alpha * s / kk
    f2 = ((1.0 - rho) * t + alpha * delta + math.log(alpha * delta)
          - rho * (ask + math.log(ask)) + asum - alpha)
    norm = math.hypot(f1, f2)
    for _ in range(100):
        if norm <= 1e-10 * max(1.0, alpha):
            return delta, t, True
        s = 1.0 - delta
        ds = s * delta
        j11 = alpha * (1.0 - rho) * ds
        j21 = (-alpha - 1.0 / delta - rho * alpha / kk - rho / s) * ds
        j22 = 1.0 - rho
        det = j11 * j22 - j12 * j21
        if det == 0.0:
            return delta, t, False
        dsig = -(f1 * j22 - f2 * j12) / det
        dt = -(j11 * f2 - j21 * f1) / det
        biggest = max(abs(dsig), abs(dt))
        if biggest > step_cap:
            dsig *= step_cap / biggest
            dt *= step_cap / biggest
        damp = 1.0
        f1n = f1
        f2n = f2
        dn = delta
        j12n = j12
        new_norm = norm
        for _ in range(60):
            sig_try = sigma + damp * dsig
            t_try = t + damp * dt
            dn = _deficit(-sig_try)
            sn = 1.0 - dn
            f1n = alpha * (1.0 - rho) * sn
            j12n = 0.0
            for j in range(nu, m):
                vj = _lambert_v(bs[j] - t_try)
                f1n -= vj
                j12n += vj / (1.0 + vj)
            ask = alpha * sn / kk
            f2n = ((1.0 - rho) * t_try + alpha * dn + math.log(alpha * dn)
                   - rho * (ask + math.log(ask)) + asum - alpha)
            new_norm = math.hypot(f1n, f2n)
            if new_norm < norm:
                sigma = sig_try
                t = t_try
                break
            damp *= 0.5
        else:
            return delta, t, False
        delta = dn
        f1 = f1n
        f2 = f2n
        j12 = j12n
        norm = new_norm
    return delta, t, False


@njit(**_NJIT)
def _prox_capped_s(bs, alpha, k):
    """All coordinates capped (nu == len(bs)): bisection in s."""
    m = bs.size
    kk = float(k)
    asum = 0.0
    for j in range(m):
        asum += bs[j]
    asum /= kk
    lo = 1e-15
    hi = 1.0 - 1e-15
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        a1s = alpha * (1.0 - mid)
        ask = alpha * mid / kk
        phi = a1s + math.log(a1s) - ask - math.log(ask) + asum - alpha
        if phi > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


@njit(**_NJIT)
def _entropy_prox(b, alpha, k, order, bs, x):
    """Mirror of entropy.entropy_prox: returns (s, ok); writes x."""
    m = b.size
    _sort_desc_stable(b, order)
    mx = 0.0
    for i in range(m):
        bs[i] = b[order[i]]
        if abs(bs[i]) > mx:
            mx = abs(bs[i])
    scale = max(1.0, mx, alpha)

    t = _prox_scalar_t(bs, 0, alpha)
    # carry the mass deficit delta = 1 - s explicitly
    delta = _lambert_v(alpha - t) / alpha
    s = 1.0 - delta
    nu = 0
    ok = True
    kmax = k if k < m else m
    while True:
        if s > 0.0:
            ask = alpha * s / k
            cap_edge = t + ask + math.log(ask)
        else:
            cap_edge = 1e300
        if nu >= kmax or bs[nu] <= cap_edge + 1e-9 * scale:
            break
        nu += 1
        if nu == m:
            s = _prox_capped_s(bs, alpha, k)
            ask = alpha * s / k
            t = bs[m - 1] - (ask + math.log(ask))
            break
        delta, t, ok = _prox_capped_newton(bs, nu, alpha, k, delta, t)
        s = 1.0 - delta
        if not ok:
            break
    # reported s stays strictly below 1 even if the deficit underflowed
    s = min(s, 1.0 - 1e-16)
    cap = s / k
    for i in range(nu):
        x[order[i]] = cap
    for i in range(nu, m):
        v = _lambert_v(bs[i] - t) / alpha
        if v > cap:
            v = cap
        x[order[i]] = v
    return s, ok


@njit(**_NJIT)
def _topk_entropy_loss_value(a, k, order, bs):
    """Mirror of entropy.topk_entropy_loss for the gap evaluation:
    returns the loss value for the truth-removed difference vector a."""
    m = a.size
    _sort_desc_stable(a, order)
    mx = 0.0
    for i in range(m):
        bs[i] = a[order[i]]
        if abs(bs[i]) > mx:
            mx = abs(bs[i])
    prefix = 0.0
    nu = 0
    kk = float(k)
    log_q = 0.0
    log1p_q = 0.0
    s = 0.0
    t = 0.0
    while True:
        rho = nu / kk
        asum = prefix / kk
        if nu == m:
            log_q = -math.log(kk) - asum
            log1p_q = max(log_q, 0.0) + math.log1p(math.exp(-abs(log_q)))
            s = min(1.0 / (1.0 + math.exp(log_q)), 1.0 - 1e-16)
            t = 1e300
            break
        z = 0.0
        top = bs[nu]
        for j in range(nu, m):
            z += math.exp(bs[j] - top)
        log_z = top + math.log(z)
        lr = (1.0 - rho) * math.log1p(-rho) if rho < 1.0 else 0.0
        log_q = lr - rho * math.log(kk) - (1.0 - rho) * log_z - asum
        log1p_q = max(log_q, 0.0) + math.log1p(math.exp(-abs(log_q)))
        s = min(1.0 / (1.0 + math.exp(log_q)), 1.0 - 1e-16)
        t = log_z + log1p_q - math.log1p(-rho)
        bound = -log1p_q - math.log(kk) + t
        if bs[nu] <= bound + 1e-9 * max(1.0, mx) or nu >= k:
            break
        prefix += bs[nu]
        nu += 1
    if nu == 0:
        return t
    log_s = -log1p_q
    log_1ms = log_q - log1p_q
    t_term = (1.0 - nu / kk) * s * t if nu < k else 0.0
    return (prefix / kk) * s - (nu / kk) * s * (log_s - math.log(kk)) \
        + t_term - (1.0 - s) * log_1ms


@njit(**_NJIT)
def _sweep(XT, sqn, labels, A, W, perm, k, gamma, lam_n, lam,
           family_code):
    """One SDCA epoch over perm. family_code: 0 hinge-alpha, 1
    hinge-beta, 2 entropy. Returns (dual violations, skipped updates)."""
    n, d = XT.shape
    m = A.shape[0]
    m1 = m - 1
    b = np.empty(m1)
    x = np.empty(m1)
    order = np.empty(m1, dtype=np.int64)
    bs = np.empty(m1)
    prefix = np.empty(m1 + 1)
    pts = np.empty(2 * m1)
    w_x = np.empty(m)
    q = np.empty(m)
    a_new = np.empty(m)
    delta = np.empty(m)
    violations = 0
    skipped = 0

    for idx in range(perm.size):
        i = perm[idx]
        y = labels[i] - 1
        sq = sqn[i]
        if sq == 0.0 and (family_code == 2 or gamma == 0.0):
            skipped += 1
            continue
        for c in range(m):
            acc = 0.0
            for r_ in range(d):
                acc += W[r_, c] * XT[i, r_]
            w_x[c] = acc
            q[c] = acc - sq * A[c, i]
        if family_code == 2:
            alpha = sq / lam_n
            pos = 0
            for c in range(m):
                if c != y:
                    b[pos] = q[c] - q[y]
                    pos += 1
            _entropy_prox(b, alpha, k, order, bs, x)
            pos = 0
            tot = 0.0
            for c in range(m):
                if c != y:
                    a_new[c] = -x[pos] / lam_n
                    tot += x[pos]
                    pos += 1
            a_new[y] = tot / lam_n
        else:
            denom = sq + gamma * lam_n
            rho = sq / denom
            pos = 0
            for c in range(m):
                if c != y:
                    b[pos] = (q[c] + (1.0 - q[y])) / denom
                    pos += 1
            if family_code == 0:
                _project_alpha(b, k, 1.0 / lam_n, rho, order, bs, prefix, x)
            else:
                _project_beta(b, k, 1.0 / lam_n, rho, pts, x)
            pos = 0
            tot = 0.0
            for c in range(m):
                if c != y:
                    a_new[c] = -x[pos]
                    tot += x[pos]
                    pos += 1
            a_new[y] = tot

        # dual increase: conjugate change minus the ||W||^2 change
        conj_old = _conj_value(A[:, i], y, lam_n, gamma, family_code)
        conj_new = _conj_value(a_new, y, lam_n, gamma, family_code)
        d_w_sq = 0.0
        dd = 0.0
        for c in range(m):
            delta[c] = a_new[c] - A[c, i]
            d_w_sq += w_x[c] * delta[c]
            dd += delta[c] * delta[c]
        d_w_sq = 2.0 * d_w_sq + sq * dd
        incr = (conj_old - conj_new) / n - 0.5 * lam * d_w_sq
        if incr < -1e-10:
            violations += 1

        for c in range(m):
            A[c, i] = a_new[c]
        for r_ in range(d):
            xv = XT[i, r_]
            if xv != 0.0:
                for c in range(m):
                    W[r_, c] += xv * delta[c]
    return violations, skipped


@njit(**_NJIT)
def _conj_value(a_col, y, lam_n, gamma, family_code):
    m = a_col.size
    if family_code == 2:
        val = 0.0
        s = 0.0
        for c in range(m):
            if c != y:
                xv = -lam_n * a_col[c]
                s += xv
                if xv > 0.0:
                    val += xv * math.log(xv)
        if s < 1.0:
            val += (1.0 - s) * math.log1p(-s)
        return val
    val = 0.0
    for c in range(m):
        if c != y:
            xv = -lam_n * a_col[c]
            val += 0.5 * gamma * xv * xv - xv
    return val


@njit(**_NJIT)
def _objectives(XT, sqn, labels, A, W, k, gamma, lam_n, lam, family_code):
    """(P, D) with the dual-consistent primal loss (see sdca.py)."""
    n, d = XT.shape
    m = A.shape[0]
    m1 = m - 1
    z = np.empty(m1)
    x = np.empty(m1)
    order = np.empty(m1, dtype=np.int64)
    bs = np.empty(m1)
    prefix = np.empty(m1 + 1)
    pts = np.empty(2 * m1)
    scores = np.empty(m)

    total = 0.0
    conj = 0.0
    for i in range(n):
        y = labels[i] - 1
        for c in range(m):
            acc = 0.0
            for r_ in range(d):
                acc += W[r_, c] * XT[i, r_]
            scores[c] = acc
        pos = 0
        for c in range(m):
            if c != y:
                z[pos] = scores[c] - scores[y]
                pos += 1
        if family_code == 2:
            total += _topk_entropy_loss_value(z, k, order, bs)
        else:
            for j in range(m1):
                z[j] += 1.0
            if gamma > 0.0:
                if family_code == 0:
                    _project_alpha(z, k, gamma, 0.0, order, bs, prefix, x)
                else:
                    _project_beta(z, k, gamma, 0.0, pts, x)
                acc = 0.0
                for j in range(m1):
                    acc += z[j] * x[j] - 0.5 * x[j] * x[j]
                total += acc / gamma
            else:
                _sort_desc_stable(z, order)
                acc = 0.0
                for j in range(k):
                    v = z[order[j]]
                    if family_code == 1 and v < 0.0:
                        v = 0.0
                    acc += v
                if family_code == 0 and acc < 0.0:
                    acc = 0.0
                total += acc / k
        conj += _conj_value(A[:, i], y, lam_n, gamma, family_code)

    w_sq = 0.0
    for r_ in range(d):
        for c in range(m):
            w_sq += W[r_, c] * W[r_, c]
    reg = 0.5 * lam * w_sq
    p = total / n + reg
    dual = -conj / n - reg
    return p, dual
