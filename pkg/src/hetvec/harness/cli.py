"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime failure (including
failed cells and audit discrepancies).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..config import ConfigError, load_config, validate
from ..policies import POLICY_TAGS
from . import runner

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _policy_list(text: str) -> list[str]:
    tags = [t.strip() for t in text.split(",") if t.strip()]
    for t in tags:
        if t not in POLICY_TAGS:
            raise argparse.ArgumentTypeError(f"unknown policy {t!r}; choose from {', '.join(POLICY_TAGS)}")
    return tags


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment file (defaults when omitted)")
    common.add_argument("--profile", help="named override set: full, desk, smoke")
    common.add_argument("--policy", type=_policy_list, help="policy tag or comma-separated tags")
    common.add_argument("--v", type=_float_list, help="comma-separated V values")
    common.add_argument("--seed", type=int, help="run a single seed label")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--workers", type=int, help="parallel worker processes")
    common.add_argument("-q", "--quiet", action="store_true")

    p = argparse.ArgumentParser(prog="hetvec", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train LySAC for every (V, seed)")
    ev = sub.add_parser("eval", parents=[common], help="evaluate policies over repetitions")
    ev.add_argument("--checkpoints", type=Path, help="directory holding train/ (default: --out)")
    sw = sub.add_parser("sweep", parents=[common], help="policies x axis values x seeds")
    sw.add_argument("--axis", choices=["V", "arrival_rate"], default="V")
    sw.add_argument("--checkpoints", type=Path, help="directory holding train/ (default: --out)")
    au = sub.add_parser("audit", help="recompute summaries from per-slot CSVs")
    au.add_argument("run_dir", type=Path)
    au.add_argument("-q", "--quiet", action="store_true")
    sub.add_parser("print-config", parents=[common], help="print the resolved configuration")
    return p


def _resolve(args):
    cfg = load_config(args.config, args.profile)
    ex = cfg.experiment
    if args.v is not None:
        ex.v_list = args.v
    if args.seed is not None:
        ex.seeds = [args.seed]
    if args.workers is not None:
        ex.workers = args.workers
    if args.out is not None:
        ex.out_dir = str(args.out)
    if args.policy:
        ex.policy = args.policy[0]
        ex.policies = list(args.policy)
    return validate(cfg)


def _report_failures(results) -> int:
    bad = [r for r in results if not r["ok"]]
    for r in bad:
        print(f"cell failed: {r['error']}", file=sys.stderr)
    return EXIT_RUNTIME if bad else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "audit":
        if not args.run_dir.is_dir():
            print(f"audit: no such directory {args.run_dir}", file=sys.stderr)
            return EXIT_RUNTIME
        checked, issues = runner.audit(args.run_dir)
        for d in issues:
            print(f"{d.file} run={d.run_id} rep={d.rep} {d.column}: stored {d.stored} != {d.recomputed}")
        print(f"audit: {checked} summary rows checked, {len(issues)} discrepancies")
        return EXIT_RUNTIME if issues or checked == 0 else EXIT_OK
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.experiment.out_dir)
    try:
        if args.command == "print-config":
            sys.stdout.write(cfg.to_yaml())
            return EXIT_OK
        if args.command == "train":
            return _report_failures(runner.run_training(cfg, out))
        ckpt = args.checkpoints or out
        if args.command == "eval":
            policies = args.policy or [cfg.experiment.policy]
            return _report_failures(runner.run_evaluation(cfg, out, policies, ckpt))
        if args.command == "sweep":
            policies = args.policy or cfg.experiment.policies
            return _report_failures(runner.run_sweep(cfg, out, args.axis, policies, ckpt))
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
