"""Compiled inner loops for BEC density evolution and bisection.

Polynomials are dense coefficient arrays in ascending powers and are
evaluated with Horner's scheme so results do not depend on term order.
"""
import numpy as np
from numba import njit

STALL_TOL = 1e-15


@njit(cache=True)
def horner(c, x):
    acc = 0.0
    for k in range(c.shape[0] - 1, -1, -1):
        acc = acc * x + c[k]
    return acc


@njit(cache=True)
def bec_step(lam, rho, eps_star, eps):
    return eps_star * horner(lam, 1.0 - horner(rho, 1.0 - eps))


CERT_FROM = 1e-3
STUCK_EVERY = 8


@njit(cache=True)
def bec_certificate(lam, rho):
    """Coefficients ``g`` with ``eps_star * horner(g, t) >= f(x) / t`` for all ``0 < x <= t``.

    From ``1 - rho(1 - x) <= rho'(1) x`` and monotonicity of lambda:
    ``f(x) <= eps_star * lambda(rho'(1) t)``, so the update is a contraction on
    ``[0, t]`` whenever ``eps_star * lambda(rho'(1) t) / t < 1``.
    """
    a = 0.0
    for k in range(1, rho.shape[0]):
        a += k * rho[k]
    n = lam.shape[0]
    g = np.zeros(max(n - 1, 1))
    for k in range(1, n):
        g[k - 1] = lam[k] * a**k
    return g


@njit(cache=True)
def bec_run(lam, rho, eps_star, l, conv_tol, stall_tol):
    """Iterate from ``eps = eps_star``.

    Success when ``eps < conv_tol``, or once ``eps < CERT_FROM`` and the
    contraction bound of :func:`bec_certificate` proves the remaining rounds
    drive it to zero.  Stagnation above the tolerance is failure.
    """
    g = bec_certificate(lam, rho)
    eps = eps_star
    prev = eps_star
    for it in range(1, l + 1):
        new = bec_step(lam, rho, eps_star, eps)
        if new < conv_tol:
            return True, new, it
        if new < CERT_FROM and eps_star * horner(g, new) < 1.0:
            return True, new, it
        if abs(new - eps) < stall_tol:
            return False, new, it
        if it % STUCK_EVERY == 0 and stuck(lam, rho, eps_star, prev, eps, new, conv_tol):
            return False, new, it
        prev = eps
        eps = new
    return False, eps, l


@njit(cache=True)
def aitken(x0, x1, x2):
    """Limit of a geometric sequence through three iterates (``-1`` if not geometric)."""
    d1 = x1 - x0
    d2 = x2 - x1
    den = d2 - d1
    if d1 == 0.0 or den == 0.0 or d2 / d1 <= 0.0 or d2 / d1 >= 1.0:
        return -1.0
    return x2 - d2 * d2 / den


@njit(cache=True)
def stuck(lam, rho, eps_star, x0, x1, x2, conv_tol):
    """True when a point ``y`` between the extrapolated limit and ``x2`` has
    ``f(y) >= y``; f is increasing, so iterates starting above y never fall
    below it and the run cannot converge."""
    y = aitken(x0, x1, x2)
    if y <= conv_tol or y > x2:
        return False
    return bec_step(lam, rho, eps_star, y) >= y


@njit(cache=True)
def bec_bisect(lam, rho, lo, hi, ceiling, l, conv_tol, stall_tol, tol):
    """Bisection on ``[lo, hi]``; midpoints at or above ``ceiling`` fail without a run."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid >= ceiling:
            hi = mid
            continue
        ok, _, _ = bec_run(lam, rho, mid, l, conv_tol, stall_tol)
        if ok:
            lo = mid
        else:
            hi = mid
    return lo, hi


# ---------------------------------------------------------------------------
# multi-edge-type recursion


@njit(cache=True)
def met_check(cdeg, R, Rx, eps, q):
    """q_j = 1 - rho_j(1 - eps): erasure probability of class-j check-to-variable messages."""
    n_c, m = cdeg.shape
    for j in range(m):
        if Rx[j] <= 0.0:
            q[j] = 0.0
            continue
        acc = 0.0
        for c in range(n_c):
            dj = cdeg[c, j]
            if dj == 0 or R[c] == 0.0:
                continue
            prod = R[c] * dj
            for k in range(m):
                e = cdeg[c, k]
                if k == j:
                    e -= 1
                if e > 0:
                    prod *= (1.0 - eps[k]) ** e
            acc += prod
        q[j] = 1.0 - acc / Rx[j]


@njit(cache=True)
def met_var(vdeg, L, punct, multi, Lx, eps_star, q, out, out_multi):
    """Variable-to-check erasure per class; ``out_multi`` leaves out degree-1 variables."""
    n_v, m = vdeg.shape
    for i in range(m):
        out_multi[i] = 0.0
        if Lx[i] <= 0.0:
            out[i] = 0.0
            continue
        acc = 0.0
        acc_multi = 0.0
        for v in range(n_v):
            di = vdeg[v, i]
            if di == 0 or L[v] == 0.0:
                continue
            prod = L[v] * di
            if not punct[v]:
                prod *= eps_star
            for k in range(m):
                e = vdeg[v, k]
                if k == i:
                    e -= 1
                if e > 0:
                    prod *= q[k] ** e
            acc += prod
            if multi[v]:
                acc_multi += prod
        out[i] = acc / Lx[i]
        out_multi[i] = acc_multi / Lx[i]


@njit(cache=True)
def met_step(vdeg, L, punct, multi, Lx, cdeg, R, Rx, eps_star, eps):
    m = eps.shape[0]
    q = np.empty(m)
    out = np.empty(m)
    tmp = np.empty(m)
    met_check(cdeg, R, Rx, eps, q)
    met_var(vdeg, L, punct, multi, Lx, eps_star, q, out, tmp)
    return out


@njit(cache=True)
def met_certificate(vdeg, L, punct, Lx, cdeg, R, Rx, t, eps_star):
    """Upper bound on ``max_i F_i(x) / t`` over ``0 <= x <= t`` (degree >= 2 variables only).

    Check side: ``q_k <= r_k t`` with ``r_k`` the row sums of the check
    Jacobian at zero (union bound).  Variable side: each monomial is
    bounded by substituting ``r_k t`` for ``q_k``.
    """
    n_c, m = cdeg.shape
    r = np.zeros(m)
    for j in range(m):
        if Rx[j] <= 0.0:
            continue
        for c in range(n_c):
            dj = cdeg[c, j]
            if dj == 0:
                continue
            s = 0
            for k in range(m):
                s += cdeg[c, k]
            r[j] += R[c] * dj * (s - 1) / Rx[j]
    n_v = vdeg.shape[0]
    worst = 0.0
    for i in range(m):
        if Lx[i] <= 0.0:
            continue
        acc = 0.0
        for v in range(n_v):
            di = vdeg[v, i]
            if di == 0 or L[v] == 0.0:
                continue
            w = L[v] * di / Lx[i]
            if not punct[v]:
                w *= eps_star
            p = -1
            for k in range(m):
                e = vdeg[v, k]
                if k == i:
                    e -= 1
                p += e
                if e > 0:
                    w *= r[k] ** e
            acc += w * t**p
        if acc > worst:
            worst = acc
    return worst


@njit(cache=True)
def met_run(vdeg, L, punct, multi, deg1, Lx, cdeg, R, Rx, eps_star, l, conv_tol, stall_tol):
    """Iterate from eps_i = eps_star in every class.

    Success: every variable-to-check erasure leaving a variable of degree >= 2
    and every check-to-variable erasure on a class carrying degree-1
    variables is below ``conv_tol``.  Without degree-1 variables a run also
    succeeds once :func:`met_certificate` proves contraction to zero.
    """
    m = Lx.shape[0]
    certify = True
    for i in range(m):
        if deg1[i]:
            certify = False
    eps = np.empty(m)
    for i in range(m):
        eps[i] = eps_star if Lx[i] > 0.0 else 0.0
    q = np.empty(m)
    new = np.empty(m)
    new_multi = np.empty(m)
    for it in range(1, l + 1):
        met_check(cdeg, R, Rx, eps, q)
        met_var(vdeg, L, punct, multi, Lx, eps_star, q, new, new_multi)
        worst = 0.0
        dmax = 0.0
        for i in range(m):
            if new_multi[i] > worst:
                worst = new_multi[i]
            d = abs(new[i] - eps[i])
            if d > dmax:
                dmax = d
            eps[i] = new[i]
        if worst < conv_tol:
            met_check(cdeg, R, Rx, eps, q)
            for i in range(m):
                if deg1[i] and q[i] > worst:
                    worst = q[i]
        if worst < conv_tol:
            return True, eps, it
        if certify and worst < CERT_FROM and \
                met_certificate(vdeg, L, punct, Lx, cdeg, R, Rx, worst, eps_star) < 1.0:
            return True, eps, it
        if dmax < stall_tol:
            return False, eps, it
    return False, eps, l


@njit(cache=True)
def met_bisect(vdeg, L, punct, multi, deg1, Lx, cdeg, R, Rx, lo, hi, l, conv_tol, stall_tol, tol):
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        ok, _, _ = met_run(vdeg, L, punct, multi, deg1, Lx, cdeg, R, Rx, mid, l, conv_tol,
                           stall_tol)
        if ok:
            lo = mid
        else:
            hi = mid
    return lo, hi
