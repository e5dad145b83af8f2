"""System utility, Lyapunov drift terms, the per-slot P2 objective and the reward."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class AllocationDecision:
    """CPU shares ``alpha`` (shape ``(..., N)``) and offload splits ``phi`` (``(..., N, 3)``).

    Technology columns of ``phi`` are ordered mmWave, DSRC, C-V2I.
    """

    alpha: np.ndarray
    phi: np.ndarray

    @property
    def n_types(self) -> int:
        return self.alpha.shape[-1]

    def violations(self) -> dict[str, float]:
        """Worst violation of each simplex constraint (0 when feasible)."""
        a, f = np.asarray(self.alpha), np.asarray(self.phi)
        return {
            "alpha_sum": float(np.max(np.sum(a, axis=-1) - 1.0, initial=0.0)),
            "alpha_range": float(max(np.max(-a, initial=0.0), np.max(a - 1.0, initial=0.0))),
            "phi_rows": float(np.max(np.abs(np.sum(f, axis=-1) - 1.0), initial=0.0)),
            "phi_range": float(max(np.max(-f, initial=0.0), np.max(f - 1.0, initial=0.0))),
        }

    def is_feasible(self, tol: float = SIMPLEX_TOL) -> bool:
        return all(v <= tol for v in self.violations().values())

    def validate(self, tol: float = SIMPLEX_TOL) -> "AllocationDecision":
        bad = {k: v for k, v in self.violations().items() if v > tol}
        if bad:
            raise ValueError(f"infeasible allocation: {bad}")
        return self

    def take(self, idx) -> "AllocationDecision":
        return AllocationDecision(self.alpha[idx], self.phi[idx])

    def flat(self) -> np.ndarray:
        """Concatenate ``alpha`` and row-major ``phi`` into one vector per decision."""
        lead = self.alpha.shape[:-1]
        return np.concatenate([self.alpha, self.phi.reshape(lead + (-1,))], axis=-1)


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def project_logits(raw: np.ndarray, n_types: int) -> AllocationDecision:
    """Map unconstrained vectors of length ``4N+1`` onto the feasible set.

    The first ``N+1`` entries are CPU logits; softmax is taken over all of
    them and the last (slack) share is dropped, so ``sum(alpha) <= 1``.  The
    remaining ``3N`` entries are per-type technology logits.
    """
    raw = np.asarray(raw, dtype=float)
    n = n_types
    if raw.shape[-1] != 4 * n + 1:
        raise ValueError(f"expected last dimension {4 * n + 1}, got {raw.shape[-1]}")
    alpha = softmax(raw[..., : n + 1])[..., :n]
    phi = softmax(raw[..., n + 1 :].reshape(raw.shape[:-1] + (n, 3)))
    return AllocationDecision(alpha, phi)


def action_dim(n_types: int) -> int:
    return 4 * n_types + 1


# ------------------------------------------------------------------ utility

@dataclass(frozen=True)
class UtilityBreakdown:
    comm: np.ndarray | float
    comp: np.ndarray | float
    total: np.ndarray | float
    weight_comp: float
    weight_comm: float


def comm_utility(phi, volume, c_comm: float):
    """Charge for traffic sent over the licensed C-V2I link."""
    return c_comm * np.sum(np.asarray(phi)[..., 2] * np.asarray(volume), axis=-1)


def core_power(alpha, f_e: float, n_cores: int, kappa_freq: float):
    """Per-core DVFS power ``kappa (f_E sum(alpha) / N_E)^3`` with ``kappa = kappa_freq^-3``."""
    load = f_e * np.sum(np.asarray(alpha), axis=-1) / n_cores
    return (load / kappa_freq) ** 3


def comp_utility(alpha, f_e: float, n_cores: int, kappa_freq: float, c_comp: float):
    return n_cores * c_comp * core_power(alpha, f_e, n_cores, kappa_freq)


def system_utility(decision: AllocationDecision, volume, *, f_e, n_cores, kappa_freq,
                   c_comp, c_comm, weight_comp, weight_comm) -> UtilityBreakdown:
    comm = comm_utility(decision.phi, volume, c_comm)
    comp = comp_utility(decision.alpha, f_e, n_cores, kappa_freq, c_comp)
    return UtilityBreakdown(comm, comp, weight_comp * comp + weight_comm * comm, weight_comp, weight_comm)


# -------------------------------------------------------------------- drift

def drift_term(q, volume, service):
    """``sum_i q_i a_i - sum_i q_i s_i``; ``service`` is the CPU service in Mbit/slot."""
    q = np.asarray(q)
    return np.sum(q * np.asarray(volume), axis=-1) - np.sum(q * np.asarray(service), axis=-1)


def drift_bound_B(a_max, full_service) -> float:
    """Constant of the drift-plus-penalty bound, reported as a diagnostic only."""
    a_max = np.asarray(a_max, dtype=float)
    full_service = np.asarray(full_service, dtype=float)
    return 0.5 * float(np.sum(a_max**2 - full_service**2))


def p2_objective(drift, utility_total, v: float):
    if v < 0:
        raise ValueError("V must be >= 0")
    return v * np.asarray(drift) + np.asarray(utility_total)


def latency_excess(omega_max, t_max, ceiling: float):
    """Per-type clamped excess ``max(0, min(omega, ceiling) - t_max)`` summed over types."""
    w = np.minimum(np.asarray(omega_max, dtype=float), ceiling)
    return np.sum(np.maximum(0.0, w - np.asarray(t_max)), axis=-1)


def reward(drift, utility_total, omega_max, t_max, v: float, p_e: float, ceiling: float):
    """Negative P2 objective minus the latency penalty (violations only).

    ``omega_max`` holds, per type, the largest bound over the three
    technologies; non-finite values are replaced by ``ceiling``.
    """
    return -p2_objective(drift, utility_total, v) - p_e * latency_excess(omega_max, t_max, ceiling)
