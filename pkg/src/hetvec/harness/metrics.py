"""Metric rows, summaries and CSV input/output.

Floats are written with ``repr`` so that reading a CSV back yields the exact
values that were summarised; this is what makes the audit exact.
"""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from ..env import Trajectory
from ..snc import TECHS

SCHEMA_VERSION = "1"

SLOT_COLUMNS = ["run_id", "policy", "V", "seed", "rep", "slot", "reward", "comm_utility",
                "comp_utility", "total_utility", "mean_backlog", "omega_mmw", "omega_dsrc",
                "omega_cv2i", "delay_bound", "violation"]
SUMMARY_COLUMNS = ["run_id", "policy", "V", "seed", "rep", "slots", "mean_reward", "mean_comm_utility",
                   "mean_comp_utility", "mean_total_utility", "mean_backlog", "final_backlog",
                   "mean_delay_bound", "violation_prob"]
CURVE_COLUMNS = ["run_id", "V", "seed", "episode", "avg_reward", "smoothed_reward", "mean_backlog",
                 "violation_rate", "updates", "temperature"]
SWEEP_COLUMNS = ["policy", "axis", "value", "cells", "failed", "mean_reward", "mean_comm_utility",
                 "mean_comp_utility", "mean_total_utility", "mean_backlog", "final_backlog",
                 "mean_delay_bound", "violation_prob"]
AGGREGATE_REP = -1
METRIC_KEYS = SUMMARY_COLUMNS[6:]


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, columns: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def slot_rows(traj: Trajectory, *, run_id: str, policy: str, v: float, seed: int, rep: int,
              ceiling: float) -> list[dict]:
    """One row per slot; non-finite bounds are reported at ``ceiling``."""
    omega = np.minimum(traj.omega, ceiling)
    per_tech = omega.mean(axis=1)                 # (T, 3): mean over types
    bound = omega.max(axis=2).mean(axis=1)        # mean over types of the worst technology
    backlog = traj.backlog.mean(axis=1)
    rows = []
    for t in range(len(traj.reward)):
        row = {"run_id": run_id, "policy": policy, "V": float(v), "seed": seed, "rep": rep, "slot": t,
               "reward": float(traj.reward[t]), "comm_utility": float(traj.comm[t]),
               "comp_utility": float(traj.comp[t]), "total_utility": float(traj.total[t]),
               "mean_backlog": float(backlog[t]), "delay_bound": float(bound[t]),
               "violation": int(np.any(traj.violation[t]))}
        for g, tech in enumerate(TECHS):
            row[f"omega_{tech}"] = float(per_tech[t, g])
        rows.append(row)
    return rows


def _mean(values) -> float:
    return math.fsum(values) / len(values)


def summarize(rows, key: dict) -> dict:
    """Summary of one repetition from its slot rows (values may be strings from a CSV)."""
    get = lambda c: [float(r[c]) for r in rows]  # noqa: E731
    return {**key, "slots": len(rows),
            "mean_reward": _mean(get("reward")),
            "mean_comm_utility": _mean(get("comm_utility")),
            "mean_comp_utility": _mean(get("comp_utility")),
            "mean_total_utility": _mean(get("total_utility")),
            "mean_backlog": _mean(get("mean_backlog")),
            "final_backlog": float(rows[-1]["mean_backlog"]),
            "mean_delay_bound": _mean(get("delay_bound")),
            "violation_prob": _mean(get("violation"))}


def aggregate(summaries, key: dict) -> dict:
    """Mean over repetitions of every summary metric."""
    out = {**key, "slots": sum(int(s["slots"]) for s in summaries)}
    for m in METRIC_KEYS:
        out[m] = _mean([float(s[m]) for s in summaries])
    return out


def smooth(values, window: int) -> np.ndarray:
    """Trailing moving average over at most ``window`` past points (inclusive)."""
    v = np.asarray(values, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(1, len(v) + 1)
    lo = np.maximum(0, idx - window)
    return (c[idx] - c[lo]) / (idx - lo)
