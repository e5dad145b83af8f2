"""Experiment orchestration: training runs, evaluations, sweeps and the audit."""
from __future__ import annotations

import json
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ..config import ExperimentConfig, config_from_dict
from ..env import SystemConfig, VecEnv, rollout
from ..policies import Policy, make_policy
from ..sac import SacAgent, train
from . import metrics
from .seeds import derive

log = logging.getLogger(__name__)


class RunFailure(RuntimeError):
    pass


def vtag(v: float) -> str:
    return f"V{float(v):g}"


def checkpoint_path(root: Path, v: float, seed: int) -> Path:
    return Path(root) / "train" / f"{vtag(v)}_seed{seed}" / "checkpoint"


def prepare_run_dir(out: Path, cfg: ExperimentConfig, command: str, extra: dict | None = None) -> Path:
    """Create ``out`` with the echoed config, a schema-version file and the seed manifest."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(cfg.to_yaml(), encoding="utf-8")
    (out / "SCHEMA_VERSION").write_text(metrics.SCHEMA_VERSION + "\n", encoding="utf-8")
    ex = cfg.experiment
    seeds = {}
    for s in ex.seeds:
        seeds[str(s)] = {
            "agent": derive(ex.master_seed, "agent", s),
            "env": [derive(ex.master_seed, "env", s, r) for r in range(ex.repetitions)],
        }
    manifest = {"command": command, "master_seed": ex.master_seed,
                "derivation": "splitmix64 fold over (master_seed, label, *indices); see hetvec.harness.seeds",
                "seeds": seeds, **(extra or {})}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


def _map(fn, jobs, workers: int):
    """Run ``fn(*job)`` for every job, in parallel when ``workers > 1``; order preserved."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *job) for job in jobs]
        return [f.result() for f in futures]


def _guard(fn, name: str):
    def wrapped(*args):
        try:
            return {"ok": True, **fn(*args)}
        except Exception as exc:  # a failed cell must not abort its siblings
            return {"ok": False, "error": f"{type(exc).__name__}: {exc}", "trace": traceback.format_exc()}
    # Module-level name so worker processes can unpickle the job function.
    wrapped.__name__ = wrapped.__qualname__ = name
    return wrapped


# ------------------------------------------------------------------ training

def _train_cell(cfg_dict: dict, v: float, seed: int, out: str) -> dict:
    cfg = config_from_dict(cfg_dict)
    ex = cfg.experiment
    sys = SystemConfig.from_experiment(cfg)
    cell = Path(out) / "train" / f"{vtag(v)}_seed{seed}"
    cell.mkdir(parents=True, exist_ok=True)
    res = train(sys, cfg.sac, v, derive(ex.master_seed, "agent", seed),
                episode_seed=lambda k: derive(ex.master_seed, "train-env", seed, k))
    run_id = f"train-{vtag(v)}-seed{seed}"
    smoothed = metrics.smooth(res.rewards, ex.smoothing_window)
    rows = [{"run_id": run_id, "V": float(v), "seed": seed, "episode": e.episode, "avg_reward": e.avg_reward,
             "smoothed_reward": float(smoothed[i]), "mean_backlog": e.mean_backlog,
             "violation_rate": e.violation_rate, "updates": e.updates, "temperature": e.beta}
            for i, e in enumerate(res.episodes)]
    metrics.write_csv(cell / "learning_curve.csv", metrics.CURVE_COLUMNS, rows)
    res.agent.save(cell / "checkpoint")
    return {"cell": str(cell), "rewards": res.rewards.tolist()}


train_cell = _guard(_train_cell, "train_cell")


def run_training(cfg: ExperimentConfig, out: Path) -> list[dict]:
    """One training run per (V, seed): learning curve CSV and checkpoint."""
    ex = cfg.experiment
    prepare_run_dir(out, cfg, "train")
    jobs = [(cfg.to_dict(), v, s, str(out)) for v in ex.v_list for s in ex.seeds]
    return _map(train_cell, jobs, ex.workers)


# ---------------------------------------------------------------- evaluation

class LySacPolicy(Policy):
    tag = "LySAC"

    def __init__(self, agent: SacAgent):
        self.agent = agent
        agent.norm.frozen = True

    def act(self, state, evaluator=None):
        return self.agent.act(state, deterministic=True)[2]


def build_policy(cfg: ExperimentConfig, tag: str, n: int, v: float, seed: int, rep: int,
                 checkpoint_root: Path | None) -> Policy:
    if tag == "LySAC":
        if checkpoint_root is None:
            raise RunFailure("LySAC evaluation needs a checkpoint directory")
        path = checkpoint_path(checkpoint_root, v, seed)
        if not path.with_suffix(".npz").is_file():
            raise RunFailure(f"missing checkpoint {path.with_suffix('.npz')}")
        return LySacPolicy(SacAgent.load(path, cfg.sac))
    return make_policy(tag, n, pso=cfg.pso, gibbs=cfg.gibbs,
                       seed=derive(cfg.experiment.master_seed, "policy", tag, seed, rep))


def run_policy(sys: SystemConfig, policy: Policy, v: float, slots: int, env_seed: int):
    env = VecEnv(sys, v)

    def act(state, env_):
        if policy.needs_evaluator:
            return policy.act(state, lambda d: -env_.evaluate(d).reward)
        return policy.act(state)

    return rollout(env, act, slots, env_seed)


def _eval_cell(cfg_dict: dict, policy: str, v: float, seed: int, out: str, checkpoint_root: str | None,
               arrival_rate: float | None = None) -> dict:
    cfg = config_from_dict(cfg_dict)
    ex = cfg.experiment
    sys = SystemConfig.from_experiment(cfg)
    if arrival_rate is not None:
        sys = sys.with_arrival_rate(arrival_rate)
    cell = Path(out)
    cell.mkdir(parents=True, exist_ok=True)
    run_id = f"{policy}-{vtag(v)}-seed{seed}" + (f"-lam{arrival_rate:g}" if arrival_rate is not None else "")
    root = Path(checkpoint_root) if checkpoint_root else None
    all_rows, summaries = [], []
    for rep in range(ex.repetitions):
        pol = build_policy(cfg, policy, sys.n, v, seed, rep, root)
        traj = run_policy(sys, pol, v, cfg.sac.t_test, derive(ex.master_seed, "env", seed, rep))
        rows = metrics.slot_rows(traj, run_id=run_id, policy=policy, v=v, seed=seed, rep=rep,
                                 ceiling=sys.omega_ceiling)
        key = {"run_id": run_id, "policy": policy, "V": float(v), "seed": seed, "rep": rep}
        summaries.append(metrics.summarize(rows, key))
        all_rows.extend(rows)
    agg = metrics.aggregate(summaries, {"run_id": run_id, "policy": policy, "V": float(v), "seed": seed,
                                        "rep": metrics.AGGREGATE_REP})
    metrics.write_csv(cell / "slots.csv", metrics.SLOT_COLUMNS, all_rows)
    metrics.write_csv(cell / "summary.csv", metrics.SUMMARY_COLUMNS, summaries + [agg])
    return {"cell": str(cell), "summary": agg, "reps": summaries}


eval_cell = _guard(_eval_cell, "eval_cell")


def run_evaluation(cfg: ExperimentConfig, out: Path, policies: list[str],
                   checkpoint_root: Path | None = None) -> list[dict]:
    """``repetitions`` rollouts of ``t_test`` slots per (policy, V, seed)."""
    ex = cfg.experiment
    prepare_run_dir(out, cfg, "eval", {"policies": policies})
    root = str(checkpoint_root) if checkpoint_root else None
    jobs = [(cfg.to_dict(), p, v, s, str(Path(out) / "eval" / p / f"{vtag(v)}_seed{s}"), root)
            for p in policies for v in ex.v_list for s in ex.seeds]
    return _map(eval_cell, jobs, ex.workers)


def run_sweep(cfg: ExperimentConfig, out: Path, axis: str, policies: list[str],
              checkpoint_root: Path | None = None) -> list[dict]:
    """Policies x axis values x seeds; one aggregated row per (policy, axis value).

    On the arrival-rate axis every cell runs at the largest V of ``v_list``.
    """
    ex = cfg.experiment
    if axis not in ("V", "arrival_rate"):
        raise ValueError(f"unknown sweep axis {axis!r}")
    values = ex.v_list if axis == "V" else ex.arrival_rates
    prepare_run_dir(out, cfg, f"sweep:{axis}", {"policies": policies, "axis": axis, "values": values})
    root = str(checkpoint_root) if checkpoint_root else None
    jobs, keys = [], []
    for p in policies:
        for val in values:
            for s in ex.seeds:
                v = val if axis == "V" else max(ex.v_list)
                lam = None if axis == "V" else val
                cell = Path(out) / "sweep" / axis / p / f"{float(val):g}_seed{s}"
                jobs.append((cfg.to_dict(), p, v, s, str(cell), root, lam))
                keys.append((p, val))
    results = _map(eval_cell, jobs, ex.workers)
    rows = []
    for p in policies:
        for val in values:
            cell_res = [r for r, k in zip(results, keys) if k == (p, val)]
            good = [r["summary"] for r in cell_res if r["ok"]]
            row = {"policy": p, "axis": axis, "value": float(val), "cells": len(cell_res),
                   "failed": len(cell_res) - len(good)}
            for m in metrics.METRIC_KEYS:
                row[m] = metrics._mean([g[m] for g in good]) if good else float("nan")
            rows.append(row)
    metrics.write_csv(Path(out) / f"sweep_{axis}.csv", metrics.SWEEP_COLUMNS, rows)
    return results


# --------------------------------------------------------------------- audit

@dataclass
class Discrepancy:
    file: str
    run_id: str
    rep: str
    column: str
    stored: str
    recomputed: str


def audit(run_dir: Path) -> tuple[int, list[Discrepancy]]:
    """Recompute every summary row from the per-slot rows next to it.

    Returns the number of summary rows checked and the discrepancies found.
    """
    issues: list[Discrepancy] = []
    checked = 0
    cols = metrics.SUMMARY_COLUMNS[5:]
    for summary_path in sorted(Path(run_dir).rglob("summary.csv")):
        by_rep: dict[str, list] = {}
        for r in metrics.read_csv(summary_path.parent / "slots.csv"):
            by_rep.setdefault(r["rep"], []).append(r)
        fresh = {rep: metrics.summarize(rows, {}) for rep, rows in by_rep.items()}
        stored = metrics.read_csv(summary_path)
        per_rep = [row for row in stored if int(row["rep"]) != metrics.AGGREGATE_REP]
        for row in stored:
            checked += 1
            if int(row["rep"]) == metrics.AGGREGATE_REP:
                parts = [fresh[r["rep"]] for r in per_rep if r["rep"] in fresh]
                ref = metrics.aggregate(parts, {}) if parts else None
            else:
                ref = fresh.get(row["rep"])
            if ref is None:
                issues.append(Discrepancy(str(summary_path), row["run_id"], row["rep"], "*", "row", "no slot rows"))
                continue
            for c in cols:
                if row[c] != metrics.fmt(ref[c]):
                    issues.append(Discrepancy(str(summary_path), row["run_id"], row["rep"], c, row[c],
                                              metrics.fmt(ref[c])))
        listed = {r["rep"] for r in per_rep}
        for rep in by_rep:
            if rep not in listed:
                issues.append(Discrepancy(str(summary_path), "", rep, "*", "missing", "slot rows present"))
    return checked, issues
