"""Discrete-time environment: arrivals, queues, channel draws and the slot transition."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import objective as obj
from . import snc
from .objective import AllocationDecision

ARRIVAL_STREAM = 0
CHANNEL_STREAM = 1


@dataclass(frozen=True)
class TaskTypeSpec:
    id: int
    lam: float               # Poisson tasks per slot
    task_size: float         # Mbit per task
    cycles_per_bit: float
    t_max: float             # ms
    rho: float               # Mbit/slot
    sigma: float             # Mbit
    eps: float
    a_max: float | None = None

    def __post_init__(self):
        if not (self.lam > 0 and self.task_size > 0 and self.cycles_per_bit > 0 and self.t_max > 0):
            raise ValueError(f"task type {self.id}: lam, task_size, cycles_per_bit, t_max must be > 0")
        if not 0 < self.eps < 1:
            raise ValueError(f"task type {self.id}: eps must lie in (0, 1)")
        if not (self.rho > 0 and self.sigma >= 0):
            raise ValueError(f"task type {self.id}: need rho > 0 and sigma >= 0")

    @property
    def arrival_cap(self) -> float:
        """Upper arrival volume used by the drift constant."""
        if self.a_max is not None:
            return self.a_max
        return self.lam * self.task_size + 6.0 * math.sqrt(self.lam) * self.task_size


@dataclass(frozen=True)
class ChannelConfig:
    nakagami_m: float = 5.0
    gamma_sinr: float = 10.0
    bandwidth: float = 20.0         # MHz
    distance: float = 1.0
    path_loss_exp: float = 2.45
    dsrc_u: float = 1.0
    dsrc_exponent: float = 1.0
    r_dsrc: float = 27.0            # Mbit/slot

    def __post_init__(self):
        if self.nakagami_m < 1:
            raise ValueError("nakagami_m must be >= 1")
        if not (self.dsrc_u > 0 and self.dsrc_exponent > 0 and self.r_dsrc > 0):
            raise ValueError("dsrc_u, dsrc_exponent and r_dsrc must be > 0")


@dataclass(frozen=True)
class ChannelSample:
    zeta: float
    gamma_sinr: float
    t_serv: float


@dataclass(frozen=True)
class ArrivalBatch:
    counts: np.ndarray
    volume: np.ndarray


@dataclass
class QueueState:
    backlog: np.ndarray
    slot: int = 0


@dataclass(frozen=True)
class SystemConfig:
    """Everything the slot dynamics need, in internal units (Mbit, slots).

    ``f_e`` stays in GHz for the DVFS power law.  CPU service is decoupled
    from it through ``service_scale``: at ``alpha_i = 1`` type ``i`` is served
    ``full_service[i]`` Mbit/slot, and the mean of ``full_service`` over types
    equals ``service_scale`` while the ratios follow ``1 / cycles_per_bit``.
    """

    specs: tuple[TaskTypeSpec, ...]
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    f_e: float = 6.0e4
    n_cores: int = 10
    kappa_freq: float = 400.0
    c_comp: float = 1000.0
    c_comm: float = 500.0
    weight_comp: float = 0.5
    weight_comm: float = 0.5
    r_cv2i: float = 27.0
    theta: float = 0.01             # per Mbit
    slot_ms: float = 1.0
    rate_scale: float = 1.0         # Mbit/slot per Mbps
    service_scale: float = 300.0
    omega_ceiling_ms: float = 1000.0
    p_e: float = 1.0e6

    def __post_init__(self):
        if not self.specs:
            raise ValueError("at least one task type required")
        if self.theta <= 0 or self.service_scale <= 0 or self.slot_ms <= 0:
            raise ValueError("theta, service_scale and slot_ms must be > 0")

    @property
    def n(self) -> int:
        return len(self.specs)

    def _arr(self, name):
        return np.array([getattr(s, name) for s in self.specs], dtype=float)

    @property
    def lam(self):
        return self._arr("lam")

    @property
    def task_size(self):
        return self._arr("task_size")

    @property
    def rho(self):
        return self._arr("rho")

    @property
    def sigma(self):
        return self._arr("sigma")

    @property
    def eps(self):
        return self._arr("eps")

    @property
    def cycles_per_bit(self):
        return self._arr("cycles_per_bit")

    @property
    def t_max_slots(self):
        return self._arr("t_max") / self.slot_ms

    @property
    def omega_ceiling(self) -> float:
        return self.omega_ceiling_ms / self.slot_ms

    @property
    def a_max(self):
        return np.array([s.arrival_cap for s in self.specs])

    @property
    def f_eff(self) -> float:
        """CPU frequency in the scaled units where ``f_eff / w_i`` is Mbit/slot."""
        return self.service_scale / float(np.mean(1.0 / self.cycles_per_bit))

    @property
    def full_service(self):
        return self.f_eff / self.cycles_per_bit

    def service(self, alpha):
        return np.asarray(alpha) * self.full_service

    def with_arrival_rate(self, lam: float) -> "SystemConfig":
        """Every type gets Poisson rate ``lam`` with its task size kept; rho scales with lam."""
        specs = tuple(replace(s, lam=float(lam), rho=s.rho * lam / s.lam, a_max=None) for s in self.specs)
        return replace(self, specs=specs)

    @classmethod
    def from_experiment(cls, cfg) -> "SystemConfig":
        """Build from an :class:`hetvec.config.ExperimentConfig`."""
        e = cfg.environment
        k = e.mbit_per_slot_per_mbps * e.slot_ms
        specs = []
        for i, t in enumerate(e.tasks):
            rho = t.rho * k
            size = t.task_size if t.task_size is not None else rho / t.lam
            specs.append(TaskTypeSpec(id=i, lam=t.lam, task_size=size, cycles_per_bit=t.cycles_per_bit,
                                      t_max=t.t_max_ms, rho=rho, sigma=t.sigma, eps=t.eps, a_max=t.a_max))
        channel = ChannelConfig(nakagami_m=e.nakagami_m, gamma_sinr=e.gamma_sinr, bandwidth=e.bandwidth,
                                distance=e.distance, path_loss_exp=e.path_loss_exp, dsrc_u=e.dsrc_u,
                                dsrc_exponent=e.dsrc_exponent, r_dsrc=e.r_dsrc * k)
        return cls(specs=tuple(specs), channel=channel, f_e=e.f_e, n_cores=e.n_cores,
                   kappa_freq=e.kappa_freq, c_comp=e.c_comp, c_comm=e.c_comm,
                   weight_comp=e.weight_comp, weight_comm=e.weight_comm, r_cv2i=e.r_cv2i * k,
                   theta=e.theta * 1e6, slot_ms=e.slot_ms, rate_scale=k,
                   service_scale=e.service_scale, omega_ceiling_ms=e.omega_ceiling_ms, p_e=cfg.sac.p_e)


# ------------------------------------------------------------- primitives

def sample_arrivals(specs, rng: np.random.Generator) -> ArrivalBatch:
    lam = np.array([s.lam for s in specs], dtype=float)
    size = np.array([s.task_size for s in specs], dtype=float)
    counts = rng.poisson(lam)
    return ArrivalBatch(counts=counts, volume=counts * size)


def sample_channel(cfg: ChannelConfig, rng: np.random.Generator) -> ChannelSample:
    m = cfg.nakagami_m
    zeta = float(rng.gamma(m, 1.0 / m))
    return ChannelSample(zeta=zeta, gamma_sinr=cfg.gamma_sinr,
                         t_serv=snc.dsrc_access_delay(cfg.dsrc_u, cfg.r_dsrc, cfg.dsrc_exponent))


def step_queues(q: QueueState, arrivals: ArrivalBatch, alpha, sys: SystemConfig) -> QueueState:
    """Lindley recursion ``q' = max(q + a - f_E alpha / w, 0)``."""
    if isinstance(alpha, AllocationDecision):
        alpha = alpha.alpha
    nxt = np.maximum(q.backlog + arrivals.volume - sys.service(alpha), 0.0)
    return QueueState(backlog=nxt, slot=q.slot + 1)


def env_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent arrival and channel generators derived from one seed."""
    return (np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(ARRIVAL_STREAM,))),
            np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(CHANNEL_STREAM,))))


# ------------------------------------------------------------- evaluation

@dataclass(frozen=True)
class SlotOutcome:
    """Per-candidate consequences of a decision in the current slot.

    ``omega`` has shape ``(..., N, 3)`` (slots, ``inf`` where the validity
    regime fails); ``xi_state`` is the ``(..., 4N)`` block fed to the next
    observation.
    """

    drift: np.ndarray
    utility: obj.UtilityBreakdown
    omega: np.ndarray
    omega_max: np.ndarray
    excess: np.ndarray
    violation: np.ndarray
    objective: np.ndarray
    reward: np.ndarray
    xi_state: np.ndarray


def delay_bounds(sys: SystemConfig, decision: AllocationDecision, channel: ChannelSample):
    """Closed-form bounds for every type and technology plus the state xi block."""
    phi, alpha = np.asarray(decision.phi, float), np.asarray(decision.alpha, float)
    rho, sigma = sys.rho, sys.sigma
    ch = sys.channel
    beta_mmw = snc.mmwave_rate(channel.zeta, channel.gamma_sinr, ch.bandwidth, ch.distance,
                               ch.path_loss_exp, sys.rate_scale)
    omegas, comp_xi = [], []
    dsrc_comm = None
    for g, tech in enumerate(snc.TECHS):
        comm = snc.comm_envelope(tech, phi, rho, sigma, beta_mmw=beta_mmw, r_dsrc=ch.r_dsrc,
                                 t_serv=channel.t_serv, r_cv2i=sys.r_cv2i)
        comp = snc.comp_envelope(tech, alpha, phi, rho, sigma, sys.full_service)
        inp = snc.DelayBoundInputs(comm.xi, comp.xi, comm.eta, comp.eta, rho, sigma,
                                   phi[..., g], sys.theta, sys.eps)
        omegas.append(snc.closed_form_delay(inp).omega)
        comp_xi.append(comp.xi)
        if tech == "dsrc":
            dsrc_comm = comm.xi
    omega = np.stack(omegas, axis=-1)
    xi_state = np.stack([dsrc_comm, comp_xi[snc.CV2I], comp_xi[snc.MMW], comp_xi[snc.DSRC]], axis=-1)
    lead = xi_state.shape[:-2]
    return omega, xi_state.reshape(lead + (-1,))


def evaluate_slot(sys: SystemConfig, q, volume, decision: AllocationDecision,
                  channel: ChannelSample, v: float) -> SlotOutcome:
    """Cost of one (or a batch of) decision(s) given the current backlog and arrivals."""
    omega, xi_state = delay_bounds(sys, decision, channel)
    omega_max = np.max(omega, axis=-1)
    drift = obj.drift_term(q, volume, sys.service(decision.alpha))
    util = obj.system_utility(decision, volume, f_e=sys.f_e, n_cores=sys.n_cores,
                              kappa_freq=sys.kappa_freq, c_comp=sys.c_comp, c_comm=sys.c_comm,
                              weight_comp=sys.weight_comp, weight_comm=sys.weight_comm)
    excess = obj.latency_excess(omega_max, sys.t_max_slots, sys.omega_ceiling)
    p2 = obj.p2_objective(drift, util.total, v)
    r = -p2 - sys.p_e * excess
    violation = omega_max > sys.t_max_slots
    return SlotOutcome(drift=drift, utility=util, omega=omega, omega_max=omega_max, excess=excess,
                       violation=violation, objective=p2, reward=r, xi_state=xi_state)


# -------------------------------------------------------------- environment

@dataclass
class StepInfo:
    slot: int
    arrivals: np.ndarray
    backlog: np.ndarray          # backlog the decision was taken against
    outcome: SlotOutcome
    decision: AllocationDecision


class VecEnv:
    """One trajectory of the vehicular edge system.

    ``reset`` draws the episode's mmWave gain and the first arrivals;
    ``step`` applies a decision, returns the reward and moves one slot on.
    The observation is ``[A_t, Q_t, xi_t]`` with, per type, the DSRC leftover
    communication rate and the three computing rates (``6N`` entries).
    """

    def __init__(self, sys: SystemConfig, v: float = 0.0):
        if v < 0:
            raise ValueError("V must be >= 0")
        self.sys = sys
        self.v = float(v)
        self.n = sys.n
        self.state_dim = 6 * self.n
        self._arr_rng = None
        self._ch_rng = None

    def seed(self, seed: int) -> None:
        self._arr_rng, self._ch_rng = env_streams(seed)

    def initial_xi(self) -> np.ndarray:
        comp0 = self.sys.full_service / self.n
        block = np.stack([np.full(self.n, self.sys.channel.r_dsrc), comp0, comp0, comp0], axis=-1)
        return block.reshape(-1)

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.seed(seed)
        if self._arr_rng is None:
            raise RuntimeError("environment not seeded")
        self.channel = sample_channel(self.sys.channel, self._ch_rng)
        self.queue = QueueState(np.zeros(self.n), 0)
        self.arrivals = sample_arrivals(self.sys.specs, self._arr_rng)
        self.xi = self.initial_xi()
        return self.observe()

    def observe(self) -> np.ndarray:
        return np.concatenate([self.arrivals.volume, self.queue.backlog, self.xi])

    def evaluate(self, decision: AllocationDecision) -> SlotOutcome:
        """Cost of candidate decision(s) in the current slot without advancing."""
        return evaluate_slot(self.sys, self.queue.backlog, self.arrivals.volume, decision, self.channel, self.v)

    def step(self, decision: AllocationDecision):
        out = self.evaluate(decision)
        info = StepInfo(slot=self.queue.slot, arrivals=self.arrivals.volume, backlog=self.queue.backlog,
                        outcome=out, decision=decision)
        self.queue = step_queues(self.queue, self.arrivals, decision.alpha, self.sys)
        self.xi = out.xi_state
        self.arrivals = sample_arrivals(self.sys.specs, self._arr_rng)
        return self.observe(), float(out.reward), info


@dataclass
class Trajectory:
    """Per-slot arrays of one rollout (leading axis: slot)."""

    reward: np.ndarray
    comm: np.ndarray
    comp: np.ndarray
    total: np.ndarray
    backlog: np.ndarray          # (T, N) backlog at decision time
    omega: np.ndarray            # (T, N, 3), inf where the regime fails
    violation: np.ndarray        # (T, N) latency constraint broken
    alpha_sum: np.ndarray


def rollout(env: VecEnv, act, slots: int, seed: int) -> Trajectory:
    """Run ``slots`` steps with ``act(state, env) -> AllocationDecision``."""
    s = env.reset(seed)
    cols = {k: [] for k in Trajectory.__dataclass_fields__}
    for _ in range(slots):
        decision = act(s, env)
        s, r, info = env.step(decision)
        out = info.outcome
        cols["reward"].append(r)
        cols["comm"].append(float(out.utility.comm))
        cols["comp"].append(float(out.utility.comp))
        cols["total"].append(float(out.utility.total))
        cols["backlog"].append(info.backlog)
        cols["omega"].append(out.omega)
        cols["violation"].append(out.omega_max > env.sys.t_max_slots)
        cols["alpha_sum"].append(float(np.sum(decision.alpha)))
    return Trajectory(**{k: np.asarray(v) for k, v in cols.items()})
