"""Stochastic network calculus layer.

Every (technology, role) pair is reduced to an affine service envelope
``beta(s1, s2) = xi * (s2 - s1) - eta``.  A task of type ``i`` offloaded over
technology ``g`` crosses a communication server and then a computing server;
the delay bound below comes from the MGF/Chernoff analysis of that tandem
under an EBB arrival envelope ``(rho, sigma)``.

All functions broadcast over leading array dimensions.  Bounds are evaluated
in the log domain so that ``theta * xi`` may span many orders of magnitude.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TECHS = ("mmw", "dsrc", "cv2i")
MMW, DSRC, CV2I = 0, 1, 2
ROLES = ("comm", "comp")

# Relative perturbation applied to xi_comm when it coincides with xi_comp.
TIE_PERTURBATION = 1e-9


class RegimeViolation(ValueError):
    """The bound is undefined: the smaller service rate does not exceed phi*rho."""


@dataclass(frozen=True)
class ServiceEnvelope:
    xi: np.ndarray
    eta: np.ndarray
    role: str
    tech: str

    @property
    def valid(self) -> np.ndarray:
        return np.asarray(self.xi) > 0


@dataclass(frozen=True)
class DelayBoundInputs:
    """Inputs of the two-stage (comm then comp) delay bound; units Mbit and slots."""

    xi_comm: np.ndarray | float
    xi_comp: np.ndarray | float
    eta_comm: np.ndarray | float
    eta_comp: np.ndarray | float
    rho: np.ndarray | float
    sigma: np.ndarray | float
    phi: np.ndarray | float
    theta: float
    eps: np.ndarray | float

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError(f"theta must be > 0, got {self.theta}")
        eps = np.asarray(self.eps)
        if np.any(eps <= 0) or np.any(eps >= 1):
            raise ValueError("eps must lie in (0, 1)")
        phi = np.asarray(self.phi)
        if np.any(phi < 0) or np.any(phi > 1):
            raise ValueError("phi must lie in [0, 1]")


@dataclass(frozen=True)
class DelayBound:
    """Closed-form delay bound in slots.

    ``omega`` is clamped at zero and is ``inf`` wherever the validity regime
    fails.  ``raw`` keeps the unclamped value (``inf`` on regime failure),
    ``slack`` marks clamped entries and ``comm_branch`` records which service
    was the smaller one.
    """

    omega: np.ndarray
    raw: np.ndarray
    slack: np.ndarray
    regime_ok: np.ndarray
    comm_branch: np.ndarray


# ---------------------------------------------------------------- envelopes

def mmwave_rate(zeta, gamma_sinr, bandwidth, distance, path_loss_exp, scale=1.0):
    """Shannon rate ``B log2(1 + zeta*gamma*l^-delta)`` in Mbit/slot.

    ``bandwidth`` is in MHz so the raw value is in Mbps; ``scale`` converts
    Mbps to Mbit per slot.
    """
    snr = np.asarray(zeta) * gamma_sinr * np.power(float(distance), -path_loss_exp)
    return scale * bandwidth * np.log1p(snr) / np.log(2.0)


def dsrc_access_delay(u: float, r_dsrc: float, exponent: float) -> float:
    """Mean DSRC access delay ``u * R^-exponent`` (slots)."""
    return u * r_dsrc ** (-exponent)


def _competitor_sum(weight: np.ndarray, values: np.ndarray) -> np.ndarray:
    """sum_{j != i} weight_j * values_j for every i, as an explicit masked sum."""
    n = weight.shape[-1]
    mask = 1.0 - np.eye(n)
    return np.einsum("...j,ij->...i", weight * values, mask)


def comm_envelope(tech, phi, rho, sigma, *, beta_mmw=None, r_dsrc=None, t_serv=None, r_cv2i=None):
    """Leftover communication envelope for every task type.

    ``phi`` has shape ``(..., N, 3)``; ``rho`` and ``sigma`` have shape ``(N,)``.
    Only the competitors ``j != i`` enter the mmWave and DSRC forms.
    """
    phi = np.asarray(phi, dtype=float)
    rho = np.asarray(rho, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    shape = phi.shape[:-1]
    if tech == "cv2i":
        xi = np.broadcast_to(np.asarray(r_cv2i, dtype=float), shape).copy()
        return ServiceEnvelope(xi, np.zeros(shape), "comm", tech)
    g = TECHS.index(tech)
    col = phi[..., g]
    load = _competitor_sum(col, rho)
    burst = _competitor_sum(col, sigma)
    if tech == "mmw":
        beta = np.asarray(beta_mmw, dtype=float)
        xi = (beta[..., None] if beta.ndim else beta) - load
        eta = burst
    else:
        xi = r_dsrc - load
        eta = r_dsrc * t_serv + burst
    return ServiceEnvelope(np.asarray(xi, dtype=float), np.asarray(eta, dtype=float), "comm", tech)


def comp_envelope(tech, alpha, phi, rho, sigma, full_service):
    """Leftover computing envelope of the CPU share serving technology ``tech``.

    ``full_service`` is ``f_E / w_i`` in Mbit/slot, so ``alpha * full_service``
    is the CPU service of type ``i``.
    """
    g = TECHS.index(tech)
    phi = np.asarray(phi, dtype=float)
    others = [k for k in range(3) if k != g]
    share = phi[..., others[0]] + phi[..., others[1]]
    xi = np.asarray(alpha, dtype=float) * full_service - share * rho
    eta = share * np.asarray(sigma, dtype=float)
    return ServiceEnvelope(xi, eta, "comp", tech)


# ------------------------------------------------------------- delay bound

def _log1mexp(x):
    """log(1 - exp(-x)) for x > 0, accurate for both tiny and large x."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > np.log(2.0), np.log1p(-np.exp(-x)), np.log(-np.expm1(-x)))


def _ordered(inp: DelayBoundInputs):
    xi_comm = np.asarray(inp.xi_comm, dtype=float)
    xi_comp = np.asarray(inp.xi_comp, dtype=float)
    xi_comm = np.where(xi_comm == xi_comp, xi_comm * (1.0 + TIE_PERTURBATION), xi_comm)
    comm_branch = xi_comp > xi_comm
    th = inp.theta
    a = th * np.minimum(xi_comm, xi_comp)
    b = th * np.maximum(xi_comm, xi_comp)
    p = th * np.asarray(inp.phi, dtype=float) * np.asarray(inp.rho, dtype=float)
    delta = np.asarray(inp.sigma) + np.asarray(inp.eta_comm) + np.asarray(inp.eta_comp)
    return a, b, p, th * delta, comm_branch


def log_violation_bound(inp: DelayBoundInputs, omega):
    """Natural log of the delay-violation upper bound at delay ``omega`` (slots).

    The value may exceed 0 (the bound may exceed 1).  Entries outside the
    validity regime, or with ``omega <= -1``, are ``nan``.
    """
    a, b, p, tdelta, _ = _ordered(inp)
    omega = np.asarray(omega, dtype=float)
    ok = (a > p) & (omega > -1.0)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        # Terms of the bracket, each divided by its own positive denominator.
        log_t1 = -a * (omega + 1.0) - _log1mexp(a - p)
        log_t2 = -b * (omega + 1.0) - _log1mexp(b - p)
        gap = log_t2 - log_t1
        out = tdelta + a - _log1mexp(b - a) + log_t1 + np.log(-np.expm1(gap))
    return np.where(ok, out, np.nan)


def violation_bound(inp: DelayBoundInputs, omega):
    """Upper bound on P(W >= omega) for the comm-then-comp tandem."""
    return np.exp(log_violation_bound(inp, omega))


def closed_form_delay(inp: DelayBoundInputs, strict: bool = False) -> DelayBound:
    """Delay bound obtained by setting the dominant term of the bound to eps.

    With ``x_min`` the smaller of the two service rates this is
    ``-ln(eps)/(theta x_min) + Delta/x_min - chi`` where ``chi`` is the log of
    the product of the two exponential gaps divided by ``theta x_min``.
    """
    a, b, p, tdelta, comm_branch = _ordered(inp)
    regime = a > p
    if strict and not np.all(regime):
        raise RegimeViolation("smaller service rate does not exceed phi*rho")
    log_eps = np.log(np.asarray(inp.eps, dtype=float))
    with np.errstate(invalid="ignore", divide="ignore"):
        raw = (-log_eps + tdelta - _log1mexp(b - a) - _log1mexp(a - p)) / a
    raw = np.where(regime, raw, np.inf)
    slack = regime & (raw < 0)
    omega = np.where(slack, 0.0, raw)
    return DelayBound(omega=omega, raw=raw, slack=slack, regime_ok=regime, comm_branch=comm_branch)


def max_delay_check(omegas, t_max):
    """Latency constraint over technologies (last axis).

    Returns ``(ok, margin)`` with ``margin = t_max - max(omegas)``; any
    non-finite omega makes the constraint fail with margin ``-inf``.
    """
    omegas = np.asarray(omegas, dtype=float)
    worst = np.max(np.where(np.isfinite(omegas), omegas, np.inf), axis=-1)
    margin = np.asarray(t_max, dtype=float) - worst
    return margin >= 0, margin
