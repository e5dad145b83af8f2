"""Experiment configuration: schema, defaults, profiles and strict YAML loading.

Every user-settable value lives in one of the dataclasses below.  Fields
whose meaning or unit is not obvious carry a short note.
"""
from __future__ import annotations

import dataclasses
import math
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .policies import POLICY_TAGS, GibbsConfig, PsoConfig

SWEEP_AXES = ("V", "arrival_rate")


class ConfigError(ValueError):
    """Raised for any invalid configuration; the message names the key."""


@dataclass
class TaskConfig:
    name: str
    cycles_per_bit: float
    lam: float = 10.0                   # mean tasks per slot
    rho: float = 0.62                   # envelope rate, Mbps
    sigma: float = 18.6                 # envelope burst, Mbit
    eps: float = 0.01                   # delay-violation target
    t_max_ms: float = 30.0
    task_size: float | None = None      # Mbit; None -> rho per slot / lam
    a_max: float | None = None          # Mbit/slot; None -> lam*d + 6*sqrt(lam)*d


def _default_tasks() -> list[TaskConfig]:
    return [
        TaskConfig(name="3d_game", cycles_per_bit=54633.0),
        TaskConfig(name="vr", cycles_per_bit=40305.0),
        TaskConfig(name="ar", cycles_per_bit=34532.0),
    ]


@dataclass
class EnvironmentConfig:
    f_e: float = 6.0e4                  # GHz, total CPU frequency
    n_cores: int = 10
    kappa_freq: float = 400.0           # GHz; kappa = 1 / kappa_freq**3
    c_comp: float = 1000.0              # dollars / W
    c_comm: float = 500.0               # dollars / Mbit via C-V2I
    weight_comp: float = 0.5
    weight_comm: float = 0.5
    r_cv2i: float = 27.0                # Mbps
    r_dsrc: float = 27.0                # Mbps
    bandwidth: float = 20.0             # MHz
    distance: float = 1.0               # m
    path_loss_exp: float = 2.45
    nakagami_m: float = 5.0
    gamma_sinr: float = 10.0
    dsrc_u: float = 1.0
    dsrc_exponent: float = 1.0
    theta: float = 1.0e-8               # per bit
    slot_ms: float = 1.0
    mbit_per_slot_per_mbps: float = 1.0
    service_scale: float = 300.0        # Mbit/slot, mean full-CPU service over types
    omega_ceiling_ms: float = 1000.0
    tasks: list[TaskConfig] = field(default_factory=_default_tasks)


@dataclass
class SacConfig:
    gamma: float = 0.99
    lr_actor: float = 3.0e-4
    lr_critic: float = 3.0e-3
    lr_temperature: float = 3.0e-3
    hidden: list[int] = field(default_factory=lambda: [256, 256])
    batch_size: int = 256
    r_t: int = 1
    k_max: int = 16000
    t_max: int = 2000
    k_u: int = 2
    r_u: int = 80
    tau1: float = 0.005
    tau2: float = 0.005
    p_e: float = 1.0e6
    t_test: int = 5000
    replay_capacity: int = 1_000_000
    entropy_target_sign: float = 1.0
    init_log_temperature: float = -3.0
    reward_scale: float = 1.0e-9          # applied before rewards enter the replay buffer
    log_std_min: float = -20.0
    log_std_max: float = 2.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1.0e-8
    precision: str = "float32"          # network arithmetic: float32 or float64


@dataclass
class ExperimentSection:
    policy: str = "LySAC"
    v_list: list[float] = field(default_factory=lambda: [0.0, 50.0, 100.0, 200.0])
    seeds: list[int] = field(default_factory=lambda: [0])
    master_seed: int = 2024
    repetitions: int = 50
    smoothing_window: int = 50
    arrival_rates: list[float] = field(default_factory=lambda: [5.0, 10.0, 20.0, 30.0, 40.0, 50.0])
    policies: list[str] = field(default_factory=lambda: list(POLICY_TAGS))
    workers: int = 1
    out_dir: str = "runs"


@dataclass
class ExperimentConfig:
    environment: EnvironmentConfig = field(default_factory=EnvironmentConfig)
    sac: SacConfig = field(default_factory=SacConfig)
    pso: PsoConfig = field(default_factory=PsoConfig)
    gibbs: GibbsConfig = field(default_factory=GibbsConfig)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


# Desk profile: minutes instead of hours.
PROFILES: dict[str, dict[str, dict[str, Any]]] = {
    "full": {},
    "desk": {
        "sac": {"k_max": 300, "t_max": 300, "t_test": 300},
        "experiment": {"repetitions": 5},
    },
    "smoke": {
        "sac": {"k_max": 4, "t_max": 40, "t_test": 40, "r_u": 4, "batch_size": 32,
                "hidden": [32, 32]},
        "experiment": {"repetitions": 2},
        "pso": {"swarm_size": 6, "iterations": 4},
        "gibbs": {"iterations": 3},
    },
}


def _is_optional(tp) -> tuple[bool, Any]:
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if len(args) == 1:
            return True, args[0]
    return False, tp


def _coerce(value: Any, tp: Any, key: str) -> Any:
    optional, tp = _is_optional(tp)
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{key}: must not be null")
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{key}: expected a mapping")
        return _build(tp, value, key)
    origin = typing.get_origin(tp)
    if origin is list:
        (inner,) = typing.get_args(tp)
        if not isinstance(value, list):
            raise ConfigError(f"{key}: expected a list")
        return [_coerce(v, inner, f"{key}[{i}]") for i, v in enumerate(value)]
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{key}: unsupported type {tp!r}")


def _build(cls, data: dict[str, Any], prefix: str):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for k in data:
        if k not in names:
            raise ConfigError(f"{prefix}.{k}: unknown key" if prefix else f"{k}: unknown key")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in data:
            key = f"{prefix}.{f.name}" if prefix else f.name
            kwargs[f.name] = _coerce(data[f.name], hints[f.name], key)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{prefix or 'config'}: {exc}") from None


def _merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _require(ok: bool, key: str, msg: str) -> None:
    if not ok:
        raise ConfigError(f"{key}: {msg}")


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    env = cfg.environment
    positive = ["f_e", "kappa_freq", "r_cv2i", "r_dsrc", "bandwidth", "distance",
                "path_loss_exp", "gamma_sinr", "dsrc_u", "dsrc_exponent", "theta",
                "slot_ms", "mbit_per_slot_per_mbps", "service_scale", "omega_ceiling_ms"]
    for name in positive:
        v = getattr(env, name)
        _require(math.isfinite(v) and v > 0, f"environment.{name}", f"must be > 0 (got {v})")
    for name in ["c_comp", "c_comm", "weight_comp", "weight_comm"]:
        _require(getattr(env, name) >= 0, f"environment.{name}", "must be >= 0")
    _require(env.n_cores >= 1, "environment.n_cores", "must be >= 1")
    _require(env.nakagami_m >= 1, "environment.nakagami_m", "Nakagami index must be >= 1")
    _require(len(env.tasks) >= 1, "environment.tasks", "at least one task type required")
    for i, t in enumerate(env.tasks):
        key = f"environment.tasks[{i}]"
        _require(t.lam > 0, f"{key}.lam", "must be > 0")
        _require(t.cycles_per_bit > 0, f"{key}.cycles_per_bit", "must be > 0")
        _require(t.t_max_ms > 0, f"{key}.t_max_ms", "must be > 0")
        _require(0 < t.eps < 1, f"{key}.eps", "must lie in (0, 1)")
        _require(t.rho > 0, f"{key}.rho", "must be > 0")
        _require(t.sigma >= 0, f"{key}.sigma", "must be >= 0")
        if t.task_size is not None:
            _require(t.task_size > 0, f"{key}.task_size", "must be > 0")
        if t.a_max is not None:
            _require(t.a_max > 0, f"{key}.a_max", "must be > 0")

    sac = cfg.sac
    _require(0 <= sac.gamma <= 1, "sac.gamma", "must lie in [0, 1]")
    for name in ["lr_actor", "lr_critic", "lr_temperature", "reward_scale", "adam_eps"]:
        _require(getattr(sac, name) > 0, f"sac.{name}", "must be > 0")
    for name in ["batch_size", "r_t", "k_max", "t_max", "k_u", "t_test", "replay_capacity"]:
        _require(getattr(sac, name) >= 1, f"sac.{name}", "must be >= 1")
    _require(sac.r_u >= 0, "sac.r_u", "must be >= 0")
    _require(all(h >= 1 for h in sac.hidden), "sac.hidden", "widths must be >= 1")
    for name in ["tau1", "tau2"]:
        _require(0 <= getattr(sac, name) <= 1, f"sac.{name}", "must lie in [0, 1]")
    _require(sac.p_e >= 0, "sac.p_e", "must be >= 0")
    _require(sac.entropy_target_sign in (-1.0, 1.0), "sac.entropy_target_sign", "must be +1 or -1")
    _require(sac.log_std_min < sac.log_std_max, "sac.log_std_min", "must be < log_std_max")
    _require(sac.precision in ("float32", "float64"), "sac.precision", "must be float32 or float64")
    _require(0 <= sac.adam_beta1 < 1 and 0 <= sac.adam_beta2 < 1, "sac.adam_beta1", "Adam betas in [0, 1)")

    pso = cfg.pso
    _require(pso.swarm_size >= 2, "pso.swarm_size", "must be >= 2")
    _require(pso.iterations >= 1, "pso.iterations", "must be >= 1")
    _require(0 <= pso.inertia <= 1, "pso.inertia", "must lie in [0, 1]")
    _require(pso.c1 > 0 and pso.c2 > 0, "pso.c1", "acceleration coefficients must be > 0")
    _require(pso.init_range > 0, "pso.init_range", "must be > 0")

    g = cfg.gibbs
    _require(g.temperature > 0, "gibbs.temperature", "must be > 0")
    _require(0 <= g.mix_weight <= 1, "gibbs.mix_weight", "must lie in [0, 1]")
    _require(g.iterations >= 1, "gibbs.iterations", "must be >= 1")
    for name in ["alpha_step", "phi_step"]:
        step = getattr(g, name)
        _require(0 < step <= 1 and abs(round(1 / step) * step - 1) < 1e-9,
                 f"gibbs.{name}", "must be 1/k for a positive integer k")

    ex = cfg.experiment
    _require(ex.policy in POLICY_TAGS, "experiment.policy", f"must be one of {POLICY_TAGS}")
    for p in ex.policies:
        _require(p in POLICY_TAGS, "experiment.policies", f"unknown policy {p!r}")
    _require(len(ex.v_list) >= 1 and all(v >= 0 for v in ex.v_list),
             "experiment.v_list", "non-empty list of V >= 0")
    _require(len(ex.seeds) >= 1, "experiment.seeds", "non-empty list required")
    _require(ex.repetitions >= 1, "experiment.repetitions", "must be >= 1")
    _require(ex.smoothing_window >= 1, "experiment.smoothing_window", "must be >= 1")
    _require(len(ex.arrival_rates) >= 1 and all(r > 0 for r in ex.arrival_rates),
             "experiment.arrival_rates", "non-empty list of positive rates")
    _require(ex.workers >= 1, "experiment.workers", "must be >= 1")
    return cfg


def config_from_dict(data: dict[str, Any] | None, profile: str | None = None) -> ExperimentConfig:
    data = dict(data or {})
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigError(f"profile: unknown profile {profile!r} (known: {sorted(PROFILES)})")
        data = _merge(PROFILES[profile], data)  # explicit values win over the profile
    return validate(_build(ExperimentConfig, data, ""))


def load_config(path: str | Path | None = None, profile: str | None = None) -> ExperimentConfig:
    """Load and validate a YAML experiment file (``None`` -> all defaults)."""
    if path is None:
        return config_from_dict({}, profile)
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config: file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: parse error: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config: top level must be a mapping")
    return config_from_dict(data, profile)
