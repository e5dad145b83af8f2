"""Baseline allocation policies.

A policy maps the observation of one slot to an :class:`AllocationDecision`.
Search-based policies additionally receive an *evaluator*: a callable taking
a batch of decisions and returning their per-slot cost (P2 objective plus
latency penalty, i.e. the negated reward).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .objective import AllocationDecision, action_dim, project_logits

POLICY_TAGS = ("EAEO", "Greedy", "PSO", "HGRA", "HGGA", "LySAC")

Evaluator = Callable[[AllocationDecision], np.ndarray]


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 30
    iterations: int = 50
    inertia: float = 0.7
    c1: float = 1.5
    c2: float = 1.5
    init_range: float = 3.0

    def __post_init__(self):
        if self.swarm_size < 1 or self.iterations < 0:
            raise ValueError("swarm_size must be >= 1 and iterations >= 0")
        if not 0 <= self.inertia <= 1 or self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("need inertia in [0, 1] and c1, c2 > 0")


@dataclass(frozen=True)
class GibbsConfig:
    temperature: float = 0.1
    mix_weight: float = 0.1
    iterations: int = 10
    alpha_step: float = 0.25
    phi_step: float = 0.5

    def __post_init__(self):
        if self.temperature <= 0 or not 0 <= self.mix_weight <= 1 or self.iterations < 1:
            raise ValueError("need temperature > 0, mix_weight in [0, 1], iterations >= 1")


def _uniform_phi(n: int) -> np.ndarray:
    return np.full((n, 3), 1.0 / 3.0)


def eaeo_decide(state, n: int) -> AllocationDecision:
    """Equal CPU shares and equal technology splits, whatever the state."""
    return AllocationDecision(np.full(n, 1.0 / n), _uniform_phi(n))


def greedy_decide(state, n: int | None = None) -> AllocationDecision:
    """All CPU to the longest queue (lowest index on ties); uniform splits."""
    state = np.asarray(state, dtype=float)
    n = n if n is not None else state.shape[-1] // 6
    q = state[n : 2 * n]
    alpha = np.zeros(n)
    alpha[int(np.argmax(q))] = 1.0
    return AllocationDecision(alpha, _uniform_phi(n))


def pso_decide(state, evaluator: Evaluator, cfg: PsoConfig, rng: np.random.Generator,
               n: int | None = None) -> AllocationDecision:
    """Global-best PSO over softmax logits; returns the best decision seen."""
    n = n if n is not None else np.asarray(state).shape[-1] // 6
    dim = action_dim(n)
    x = rng.uniform(-cfg.init_range, cfg.init_range, size=(cfg.swarm_size, dim))
    vel = np.zeros_like(x)
    cost = np.asarray(evaluator(project_logits(x, n)), dtype=float)
    pbest, pcost = x.copy(), cost.copy()
    g = int(np.argmin(pcost))
    for _ in range(cfg.iterations):
        r1 = rng.random(x.shape)
        r2 = rng.random(x.shape)
        vel = cfg.inertia * vel + cfg.c1 * r1 * (pbest - x) + cfg.c2 * r2 * (pbest[g] - x)
        x = x + vel
        cost = np.asarray(evaluator(project_logits(x, n)), dtype=float)
        better = cost < pcost
        pbest[better] = x[better]
        pcost[better] = cost[better]
        g = int(np.argmin(pcost))
    return project_logits(pbest[g], n)


def _compositions(total: int, parts: int) -> np.ndarray:
    """All non-negative integer vectors of length ``parts`` summing to ``total``."""
    out = []
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, row = -1, []
        for c in cuts:
            row.append(c - prev - 1)
            prev = c
        row.append(total + parts - 2 - prev)
        out.append(row)
    return np.array(out, dtype=float)


@lru_cache(maxsize=16)
def candidate_grid(n: int, alpha_step: float, phi_step: float) -> AllocationDecision:
    """Joint grid: CPU shares on the simplex with slack, and per-type split rows.

    Returned arrays are read-only and shared between callers.
    """
    ka, kp = int(round(1 / alpha_step)), int(round(1 / phi_step))
    alphas = _compositions(ka, n + 1)[:, :n] / ka
    rows = _compositions(kp, 3) / kp
    row_idx = np.array(list(itertools.product(range(len(rows)), repeat=n)))
    phis = rows[row_idx]                                    # (R^n, n, 3)
    alpha = np.repeat(alphas, len(phis), axis=0)
    phi = np.tile(phis, (len(alphas), 1, 1))
    alpha.setflags(write=False)
    phi.setflags(write=False)
    return AllocationDecision(alpha, phi)


def gibbs_probabilities(energy: np.ndarray, temperature: float, mix_weight: float) -> np.ndarray:
    """Mixture of a Gibbs (softmin) distribution over energies and the uniform law.

    Energies are shifted by their minimum and divided by ``|J_min| + 1`` so
    the temperature is dimensionless.
    """
    energy = np.asarray(energy, dtype=float)
    jmin = float(np.min(energy))
    z = -(energy - jmin) / (temperature * (abs(jmin) + 1.0))
    w = np.exp(z - np.max(z))
    gibbs = w / np.sum(w)
    return (1.0 - mix_weight) * gibbs + mix_weight / energy.size


def gibbs_decide(state, evaluator: Evaluator, cfg: GibbsConfig, greedy: bool,
                 rng: np.random.Generator | None = None, n: int | None = None) -> AllocationDecision:
    """HGRA (``greedy=False``) samples ``iterations`` candidates and keeps the
    cheapest; HGGA (``greedy=True``) takes the most probable candidate."""
    n = n if n is not None else np.asarray(state).shape[-1] // 6
    grid = candidate_grid(n, cfg.alpha_step, cfg.phi_step)
    energy = np.asarray(evaluator(grid), dtype=float)
    p = gibbs_probabilities(energy, cfg.temperature, cfg.mix_weight)
    if greedy:
        k = int(np.argmax(p))
    else:
        if rng is None:
            raise ValueError("HGRA needs a random generator")
        draws = rng.choice(energy.size, size=cfg.iterations, p=p)
        k = int(draws[np.argmin(energy[draws])])
    return AllocationDecision(grid.alpha[k].copy(), grid.phi[k].copy())


# ------------------------------------------------------------ policy objects

class Policy:
    tag = "base"
    needs_evaluator = False

    def act(self, state, evaluator: Evaluator | None = None) -> AllocationDecision:
        raise NotImplementedError


class EaeoPolicy(Policy):
    tag = "EAEO"

    def __init__(self, n: int):
        self.n = n

    def act(self, state, evaluator=None):
        return eaeo_decide(state, self.n)


class GreedyPolicy(Policy):
    tag = "Greedy"

    def __init__(self, n: int):
        self.n = n

    def act(self, state, evaluator=None):
        return greedy_decide(state, self.n)


class PsoPolicy(Policy):
    tag = "PSO"
    needs_evaluator = True

    def __init__(self, n: int, cfg: PsoConfig, seed: int):
        self.n, self.cfg = n, cfg
        self.rng = np.random.default_rng(seed)

    def act(self, state, evaluator=None):
        return pso_decide(state, evaluator, self.cfg, self.rng, self.n)


class GibbsPolicy(Policy):
    needs_evaluator = True

    def __init__(self, n: int, cfg: GibbsConfig, seed: int, greedy: bool):
        self.n, self.cfg, self.greedy = n, cfg, greedy
        self.tag = "HGGA" if greedy else "HGRA"
        self.rng = np.random.default_rng(seed)

    def act(self, state, evaluator=None):
        return gibbs_decide(state, evaluator, self.cfg, self.greedy, self.rng, self.n)


def make_policy(tag: str, n: int, *, pso: PsoConfig | None = None, gibbs: GibbsConfig | None = None,
                seed: int = 0) -> Policy:
    """Construct a baseline by tag (``LySAC`` is built from a checkpoint elsewhere)."""
    if tag == "EAEO":
        return EaeoPolicy(n)
    if tag == "Greedy":
        return GreedyPolicy(n)
    if tag == "PSO":
        return PsoPolicy(n, pso or PsoConfig(), seed)
    if tag in ("HGRA", "HGGA"):
        return GibbsPolicy(n, gibbs or GibbsConfig(), seed, greedy=tag == "HGGA")
    raise ValueError(f"unknown baseline policy {tag!r}")
