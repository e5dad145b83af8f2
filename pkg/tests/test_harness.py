import filecmp
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from hetvec.harness import metrics
from hetvec.harness.cli import main
from hetvec.harness.runner import audit
from hetvec.harness.seeds import derive, splitmix64


def test_splitmix64_reference_value():
    # first output of the reference generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF


def test_derive_is_stable_and_separates_keys():
    assert derive(2024, "env", 0, 1) == derive(2024, "env", 0, 1)
    seeds = {derive(2024, lab, s, r) for lab in ("env", "agent") for s in range(5) for r in range(20)}
    assert len(seeds) == 200
    assert all(0 <= x < 2**63 for x in seeds)
    assert derive(1, "env") != derive(2, "env")


def test_smooth_is_trailing_mean():
    v = np.array([1.0, 2, 3, 4, 5])
    assert np.allclose(metrics.smooth(v, 2), [1, 1.5, 2.5, 3.5, 4.5])
    assert np.allclose(metrics.smooth(v, 1), v)


def test_csv_round_trip_is_exact(tmp_path):
    rows = [{"a": 0.1 + 0.2, "b": 1, "c": "x"}, {"a": 1e-300, "b": -3, "c": "y"}]
    metrics.write_csv(tmp_path / "t.csv", ["a", "b", "c"], rows)
    back = metrics.read_csv(tmp_path / "t.csv")
    assert float(back[0]["a"]) == 0.1 + 0.2 and float(back[1]["a"]) == 1e-300
    assert (tmp_path / "t.csv").read_bytes().count(b"\r") == 0


def run(*args):
    return main([*args, "-q"])


@pytest.fixture(scope="module")
def smoke_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    args = ["--profile", "smoke", "--policy", "EAEO,Greedy,PSO,HGGA", "--v", "0,50"]
    assert run("eval", *args, "--out", str(root / "a")) == 0
    assert run("eval", *args, "--out", str(root / "b")) == 0
    return root


def _csvs(d: Path):
    return sorted(p.relative_to(d) for p in d.rglob("*.csv"))


def test_reruns_are_byte_identical(smoke_runs):
    a, b = smoke_runs / "a", smoke_runs / "b"
    files = _csvs(a)
    assert files and files == _csvs(b)
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes(), f
    for f in ("manifest.json", "SCHEMA_VERSION"):
        assert filecmp.cmp(a / f, b / f, shallow=False)
    ca, cb = (yaml.safe_load((d / "config.yaml").read_text()) for d in (a, b))
    ca["experiment"].pop("out_dir"), cb["experiment"].pop("out_dir")
    assert ca == cb


def test_run_directory_contents(smoke_runs):
    a = smoke_runs / "a"
    cfg = yaml.safe_load((a / "config.yaml").read_text())
    assert cfg["sac"]["k_max"] == 4
    man = json.loads((a / "manifest.json").read_text())
    assert man["master_seed"] == 2024 and "0" in man["seeds"]
    rows = metrics.read_csv(a / "eval" / "EAEO" / "V50_seed0" / "slots.csv")
    assert list(rows[0]) == metrics.SLOT_COLUMNS
    assert len(rows) == 2 * 40


def test_audit_finds_no_discrepancy(smoke_runs, capsys):
    checked, issues = audit(smoke_runs / "a")
    assert checked == 4 * 2 * 3 and issues == []
    assert run("audit", str(smoke_runs / "a")) == 0


def test_audit_detects_tampering(smoke_runs, tmp_path):
    import shutil
    dst = tmp_path / "t"
    shutil.copytree(smoke_runs / "a", dst)
    p = dst / "eval" / "Greedy" / "V0_seed0" / "summary.csv"
    text = p.read_text().splitlines()
    cols = text[1].split(",")
    cols[6] = repr(float(cols[6]) + 1.0)
    text[1] = ",".join(cols)
    p.write_text("\n".join(text) + "\n")
    checked, issues = audit(dst)
    assert [(d.rep, d.column) for d in issues] == [("0", "mean_reward")]
    assert run("audit", str(dst)) == 2


def test_eaeo_and_greedy_identical_across_v(smoke_runs):
    for pol in ("EAEO", "Greedy"):
        r0 = metrics.read_csv(smoke_runs / "a" / "eval" / pol / "V0_seed0" / "slots.csv")
        r50 = metrics.read_csv(smoke_runs / "a" / "eval" / pol / "V50_seed0" / "slots.csv")
        for c in ("comm_utility", "comp_utility", "mean_backlog", "delay_bound", "violation"):
            assert [r[c] for r in r0] == [r[c] for r in r50]


def test_single_cell_sweep_equals_eval(smoke_runs, tmp_path):
    out = tmp_path / "sw"
    assert run("sweep", "--profile", "smoke", "--policy", "PSO", "--v", "50", "--axis", "V", "--out", str(out)) == 0
    sweep = out / "sweep" / "V" / "PSO" / "50_seed0" / "slots.csv"
    ev = smoke_runs / "a" / "eval" / "PSO" / "V50_seed0" / "slots.csv"
    assert sweep.read_bytes() == ev.read_bytes()
    rows = metrics.read_csv(out / "sweep_V.csv")
    assert len(rows) == 1 and rows[0]["failed"] == "0"


def test_train_then_evaluate_lysac(tmp_path):
    out = tmp_path / "tr"
    assert run("train", "--profile", "smoke", "--v", "50", "--out", str(out)) == 0
    cell = out / "train" / "V50_seed0"
    assert (cell / "checkpoint.npz").is_file()
    curve = metrics.read_csv(cell / "learning_curve.csv")
    assert len(curve) == 4
    assert run("eval", "--profile", "smoke", "--policy", "LySAC", "--v", "50", "--out", str(out)) == 0
    checked, issues = audit(out)
    assert checked == 3 and not issues


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("environment:\n  f_EE: 1\n")
    assert run("eval", "--config", str(bad), "--out", str(tmp_path / "x")) == 1
    assert "environment.f_EE" in capsys.readouterr().err
    neg = tmp_path / "neg.yaml"
    neg.write_text("environment:\n  f_e: -1\n")
    assert run("print-config", "--config", str(neg)) == 1
    # LySAC without a checkpoint is a runtime failure
    assert run("eval", "--profile", "smoke", "--policy", "LySAC", "--v", "50", "--out", str(tmp_path / "y")) == 2
    assert run("audit", str(tmp_path / "missing")) == 2
    (tmp_path / "empty").mkdir()
    assert run("audit", str(tmp_path / "empty")) == 2
    with pytest.raises(SystemExit):
        main(["eval", "--policy", "Nope"])


def test_print_config_echoes_resolved_values(capsys):
    assert run("print-config", "--profile", "desk", "--v", "100") == 0
    out = yaml.safe_load(capsys.readouterr().out)
    assert out["sac"]["k_max"] == 300 and out["experiment"]["v_list"] == [100.0]
