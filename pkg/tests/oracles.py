"""Independent reference implementations used by the tests.

These deliberately avoid the package's code paths: the bound is evaluated
directly (not in the log domain) with mpmath at 60 digits, envelopes are
written out per type with explicit loops, and the queue recursion is the
one-line Lindley update.
"""
from __future__ import annotations

import math

import mpmath as mp
import numpy as np

mp.mp.dps = 60


def bound_mp(xi_comm, xi_comp, eta_comm, eta_comp, rho, sigma, phi, theta, omega):
    th = mp.mpf(theta)
    c, m = mp.mpf(xi_comp), mp.mpf(xi_comm)
    p = th * mp.mpf(phi) * mp.mpf(rho)
    delta = mp.mpf(sigma) + mp.mpf(eta_comm) + mp.mpf(eta_comp)
    w = mp.mpf(omega)
    front = mp.e ** (th * delta) / (mp.e ** (-th * c) - mp.e ** (-th * m))
    t1 = mp.e ** (-th * c * w) / (mp.e ** (th * c) - mp.e ** p)
    t2 = mp.e ** (-th * m * w) / (mp.e ** (th * m) - mp.e ** p)
    return front * (t1 - t2)


def invert_bound(args, eps, tol=1e-10):
    """Bisection on log(bound) - log(eps) over omega in (-1, hi]."""
    f = lambda w: mp.log(bound_mp(*args, omega=w)) - mp.log(eps)  # noqa: E731
    lo, hi = mp.mpf(-1) + mp.mpf("1e-30"), mp.mpf(1)
    while f(hi) > 0:
        hi *= 2
    if f(lo) < 0:
        return None
    while hi - lo > tol * max(1, abs(hi)):
        mid = (lo + hi) / 2
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)


def dsrc_envelope(i, phi, rho, sigma, r_dsrc, t_serv):
    xi, eta = r_dsrc, r_dsrc * t_serv
    for j in range(len(rho)):
        if j != i:
            xi -= phi[j][1] * rho[j]
            eta += phi[j][1] * sigma[j]
    return xi, eta


def lindley(q0, volumes, service):
    q = np.array(q0, dtype=float)
    out = [q.copy()]
    for a in volumes:
        q = np.maximum((q + a) - service, 0.0)
        out.append(q.copy())
    return np.array(out)


def poisson_ebb_rate(lam, size, theta):
    """Effective rate of a compound Poisson source in the MGF sense (sigma = 0)."""
    return lam * math.expm1(theta * size) / theta


def bound_direct(xi_comm, xi_comp, eta_comm, eta_comp, rho, sigma, phi, theta, omega):
    """The bound in plain float arithmetic; gaps use expm1 to avoid cancellation."""
    c, m = xi_comp, xi_comm
    p = theta * phi * rho
    delta = sigma + eta_comm + eta_comp
    front = math.exp(theta * delta) / (math.exp(-theta * c) * -math.expm1(-theta * (m - c)))
    t1 = math.exp(-theta * c * omega) / (math.exp(p) * math.expm1(theta * c - p))
    t2 = math.exp(-theta * m * omega) / (math.exp(p) * math.expm1(theta * m - p))
    return front * (t1 - t2)


def invert_bound_fast(args, eps, tol=1e-10):
    """Bisection on bound(omega) = eps with the float oracle above."""
    f = lambda w: bound_direct(*args, omega=w) - eps  # noqa: E731
    lo, hi = -1.0 + 1e-12, 1.0
    while f(hi) > 0:
        hi *= 2
    if f(lo) < 0:
        return None
    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fd_grads(net, f, h=1e-6):
    """Central finite differences of the scalar ``f()`` w.r.t. every parameter of ``net``."""
    out = []
    for p in net.params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = f()
            p[idx] = old - h
            dn = f()
            p[idx] = old
            g[idx] = (up - dn) / (2 * h)
        out.append(g)
    return out


def rel_err(a, b):
    a = np.concatenate([np.ravel(x) for x in a])
    b = np.concatenate([np.ravel(x) for x in b])
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))
