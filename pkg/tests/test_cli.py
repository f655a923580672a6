from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

import vsrl.cli as cli
from vsrl.core import read_pgm
from vsrl.monitor import monitor_from_config
from vsrl.monitor.monitors import XO_MOVES


def run(tmp_path, *args):
    return cli.main(["--out-dir", str(tmp_path), *args])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_train_gf_shielded_writes_zero_violations(tmp_path, capsys):
    assert run(tmp_path, "train", "--env", "gf", "--shield", "on", "--episodes", "100", "--seed", "1") == 0
    rows = read_csv(tmp_path / "train_gf_q_on_oracle_seed1.csv")
    assert len(rows) == 100
    assert {r["violations"] for r in rows} == {"0"}
    summary = json.loads(capsys.readouterr().out)
    assert summary["violations"] == 0 and summary["episodes"] == 100


def test_train_unshielded_random_reports_violations(tmp_path, capsys):
    assert run(tmp_path, "train", "--env", "gf", "--agent", "random", "--shield", "off", "--episodes", "200") == 0
    assert json.loads(capsys.readouterr().out)["violations"] > 0


def test_train_detector_and_epsilon(tmp_path):
    assert run(tmp_path, "train", "--env", "xo", "--agent", "random", "--extractor", "detector",
               "--episodes", "5") == 0
    assert run(tmp_path, "train", "--env", "acc", "--epsilon", "2.0", "--episodes", "5") == 0
    assert (tmp_path / "train_xo_random_on_detector_seed0.csv").exists()


def test_config_overrides(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"envs": {"xo": {"max_steps": 3}}, "train": {"episodes": 7}}))
    assert cli.main(["--config", str(cfg), "--out-dir", str(tmp_path), "train", "--env", "xo"]) == 0
    rows = read_csv(tmp_path / "train_xo_q_on_oracle_seed0.csv")
    assert len(rows) == 7 and max(int(r["steps"]) for r in rows) <= 3


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("VSRL_OUT", str(tmp_path / "envdir"))
    assert cli.main(["render", "--env", "xo", "--steps", "1"]) == 0
    assert len(list((tmp_path / "envdir").glob("*.pgm"))) == 2


def test_verify_theory(tmp_path):
    assert run(tmp_path, "verify-theory", "--instances", "20", "--tol", "1e-9") == 0
    report = json.loads((tmp_path / "wrap_report.json").read_text())
    assert report["passed"] and report["instances"] == 23
    assert report["safe_kernel"] <= 1e-12 and report["optimal_value"] <= 1e-9


def test_detect_check(tmp_path):
    assert run(tmp_path, "detect-check", "--env", "gf", "--frames", "20") == 0
    (res,) = json.loads((tmp_path / "detect_check.json").read_text())
    assert res["frames"] == 20 and res["misses"] == 0 and res["false_positives"] == 0
    assert res["max_error_px"] <= res["tolerance_px"] == 2.0


def test_render_writes_readable_pgm(tmp_path):
    assert run(tmp_path, "render", "--env", "pm", "--steps", "3", "--seed", "2") == 0
    frames = sorted(tmp_path.glob("pm_seed2_t*.pgm"))
    assert len(frames) == 4
    assert read_pgm(frames[0]).shape == cli.make_env("pm").info.frame_shape


def test_report_median_over_seeds(tmp_path, capsys):
    for seed in range(4):
        assert run(tmp_path, "train", "--env", "xo", "--agent", "random", "--episodes", "20", "--seed",
                   str(seed)) == 0
    capsys.readouterr()
    assert run(tmp_path, "report") == 0
    (row,) = read_csv(tmp_path / "report.csv")
    assert row["replicates"] == "4" and row["U"] == "0"
    finals = []
    for seed in range(4):
        rows = read_csv(tmp_path / f"train_xo_random_on_oracle_seed{seed}.csv")
        finals.append(sum(float(r["return"]) for r in rows[-2:]) / 2)
    finals.sort()
    assert float(row["R"]) == pytest.approx((finals[1] + finals[2]) / 2)
    assert (tmp_path / "learning_curves.svg").read_text().lstrip().startswith("<?xml")
    assert "xo" in capsys.readouterr().out


def test_summarize_groups_by_configuration():
    runs = [{"env": "gf", "agent": "q", "shield": s, "extractor": "oracle", "returns": [0.0] * 9 + [r],
             "violations": v} for s, r, v in (("on", 1.0, 0), ("on", 3.0, 0), ("off", 5.0, 2))]
    table = cli.summarize(runs)
    assert [(t["shield"], t["R"], t["U"], t["replicates"]) for t in table] == [("off", 5.0, 2, 1), ("on", 2.0, 0, 2)]


@pytest.mark.parametrize("argv", [
    ["train", "--env", "nope"],
    ["train"],
    ["frobnicate"],
    ["--config", "/no/such/file.json", "train", "--env", "xo"],
    ["report", "/no/such/dir"],
])
def test_usage_errors_exit_2(tmp_path, argv):
    assert run(tmp_path, *argv) == 2


def test_bad_config_contents_exit_2(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"envs": {"xo": {"n_o": 99}}}))
    assert cli.main(["--config", str(cfg), "--out-dir", str(tmp_path), "train", "--env", "xo"]) == 2
    cfg.write_text("{not json")
    assert cli.main(["--config", str(cfg), "--out-dir", str(tmp_path), "train", "--env", "xo"]) == 2
    cfg.write_text(json.dumps({"surprise": 1}))
    assert cli.main(["--config", str(cfg), "--out-dir", str(tmp_path), "train", "--env", "xo"]) == 2


def test_report_without_runs_exit_2(tmp_path):
    assert run(tmp_path, "report") == 2


def test_empty_safe_set_has_its_own_exit_code(tmp_path, monkeypatch):
    bad = monitor_from_config({"formula": "dx > 1000", "bindings": {"dx": "dx"}, "moves": XO_MOVES})
    monkeypatch.setattr(cli, "env_monitor", lambda env: bad)
    assert run(tmp_path, "train", "--env", "xo", "--episodes", "1") == 3


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "vsrl", "--out-dir", str(tmp_path), "verify-theory",
                           "--instances", "2"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["passed"] is True
