import json
import subprocess
import sys

import pytest

from adaptive_support.cli import load_config, main
from adaptive_support.errors import DomainError
from adaptive_support.harness import CSV_COLUMNS


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestBounds:
    def test_sset_sufficient(self, capsys):
        code, out, _ = run(capsys, "bounds", "--class", "sset:n=1000,s=10", "--m", "1000",
                           "--eps", "0.1", "--direction", "sufficient")
        assert code == 0 and "3.2855" in out and "sset.sufficient" in out

    def test_interval_nonadaptive(self, capsys):
        code, out, err = run(capsys, "bounds", "--class", "interval:n=100,s=10", "--m", "100",
                             "--eps", "0.1", "--direction", "nonadaptive")
        assert code == 0 and "0.2965" in out and "warning" in err

    def test_json(self, capsys):
        code, out, _ = run(capsys, "bounds", "--class", "interval:n=100,s=10", "--eps", "0.05",
                           "--direction", "adaptive", "--include-empty", "--json")
        doc = json.loads(out)
        assert code == 0 and abs(doc["mu_threshold"] - 0.6786) < 1e-3

    def test_missing_flag(self, capsys):
        code, _, err = run(capsys, "bounds", "--m", "10")
        assert code == 2 and "usage" in err

    def test_unsupported_names_result(self, capsys):
        code, _, err = run(capsys, "bounds", "--class", "sset:n=100,s=10", "--eps", "0.1",
                           "--metric", "prob_error", "--direction", "adaptive")
        assert code == 2 and "sset.adaptive.hamming" in err

    def test_bad_class(self, capsys):
        code, _, err = run(capsys, "bounds", "--class", "sset:n=3,s=9", "--eps", "0.1")
        assert code == 2 and "error" in err


class TestSimulate:
    def test_stdout_csv(self, capsys):
        code, out, _ = run(capsys, "simulate", "--class", "interval:n=64,s=4", "--mu", "1.5",
                           "--trials", "5", "--workers", "1", "--output", "-")
        lines = out.splitlines()
        assert code == 0 and lines[0] == ",".join(CSV_COLUMNS) and len(lines) == 2

    def test_config_file_and_rerun(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        out = tmp_path / "out.csv"
        cfg.write_text(json.dumps({"class": "star:p=8,s=3", "procedure": "adaptive", "mu": 2.0,
                                   "delta": 0.1, "trials": 8, "seed": 3, "output": str(out)}))
        assert main(["simulate", "--config", str(cfg), "--workers", "1"]) == 0
        first = out.read_bytes()
        assert main(["simulate", "--config", str(cfg), "--workers", "2"]) == 0
        assert out.read_bytes() == first

    def test_flags_override_file(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"class": "sset:n=20,s=2", "mu": 2.0, "trials": 3}))
        code, out, _ = run(capsys, "simulate", "--config", str(cfg), "--trials", "4", "--mu", "3",
                           "--workers", "1")
        row = dict(zip(CSV_COLUMNS, out.splitlines()[1].split(",")))
        assert code == 0 and row["trials"] == "4" and row["mu"] == "3.0"

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"class": "sset:n=20,s=2", "colour": "red"}))
        code, _, err = run(capsys, "simulate", "--config", str(cfg))
        assert code == 2 and "colour" in err

    def test_refusal_exit_code(self, capsys):
        code, _, err = run(capsys, "simulate", "--class", "ustars:p=40,s=4,k=3", "--procedure",
                           "nonadaptive", "--mu", "2", "--trials", "1", "--workers", "1")
        assert code == 3 and "refused" in err

    def test_invalid_class_exit_code(self, capsys):
        code, _, _ = run(capsys, "simulate", "--class", "blob:n=3", "--mu", "1")
        assert code == 2

    def test_missing_mu(self, capsys):
        code, _, err = run(capsys, "simulate", "--class", "sset:n=20,s=2", "--workers", "1")
        assert code == 2 and "mu" in err


class TestSweep:
    def test_both_procedures(self, capsys):
        code, out, err = run(capsys, "sweep", "--class", "sset:n=64,s=2", "--procedure", "both",
                             "--mu-grid", "1:3:1", "--trials", "6", "--budget-matched",
                             "--workers", "1")
        lines = out.splitlines()
        assert code == 0 and len(lines) == 1 + 6
        assert "adaptive: threshold_at" in err and "nonadaptive: threshold_at" in err

    def test_grid_too_short(self, capsys):
        code, _, _ = run(capsys, "sweep", "--class", "sset:n=64,s=2", "--mu-grid", "1,2",
                         "--trials", "2", "--workers", "1")
        assert code == 2


class TestOtherCommands:
    def test_pack_stars(self, capsys):
        code, out, err = run(capsys, "pack-stars", "--p", "6", "--s", "2")
        assert code == 0 and len(out.splitlines()) - 1 >= 5 and "4.5" in err

    def test_calibrate(self, capsys):
        code, out, _ = run(capsys, "calibrate", "--mu", "1", "--alpha", "0.05", "--beta", "0.05",
                           "--gammas", "0.1,0.01,0.001", "--trials", "10000")
        lines = out.splitlines()
        last = dict(zip(lines[0].split(","), lines[-1].split(",")))
        assert code == 0 and len(lines) == 4
        assert abs(float(last["prec_h0"]) / 5.2999 - 1) <= 0.05

    def test_scaling(self, capsys):
        code, out, _ = run(capsys, "scaling", "--class", "sset:n=4096,s=8", "--class",
                           "ustars:p=64,s=8,k=3")
        assert code == 0 and len(out.splitlines()) == 3

    def test_trace(self, capsys):
        code, out, err = run(capsys, "trace", "--class", "interval:n=12,s=3", "--mu", "50",
                             "--support", "4,5,6")
        assert code == 0 and out.splitlines()[0] == "t,query,phase,label"
        assert "estimate: [4, 5, 6]" in err


def test_config_loader_rejects_both_targets(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"epsilon": 0.1, "delta": 0.1}))
    with pytest.raises(DomainError):
        load_config(str(p))


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "adaptive_support", "bounds", "--class",
                          "interval:n=1024,s=16", "--eps", "0.1"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.8404" in res.stdout


def test_usage_exit_code_subprocess():
    res = subprocess.run([sys.executable, "-m", "adaptive_support"], capture_output=True, text=True)
    assert res.returncode == 2
