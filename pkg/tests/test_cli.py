import json

import numpy as np
import pytest

from sdarl.cli import main

GEN = ["--model", "linear", "--n", "80", "--p", "120", "--K", "4", "--sigma1", "0"]


def test_fit_noiseless_dump(tmp_path, capsys):
    out = tmp_path / "fit.json"
    assert main(["fit", *GEN, "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    F = d["fit"]["loss_trajectory"]
    assert d["fit"]["termination"] == "converged"
    assert all(b <= a + 1e-12 for a, b in zip(F, F[1:]))
    assert d["metrics"]["pdr"] == 1.0 and d["config"]["nu"] == 0.9


def test_config_then_flag_precedence(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("model = linear\nn = 80\np = 120\nK = 4\nrho = 0.5\nnu = 0.8\n")
    out = tmp_path / "o.json"
    assert main(["fit", "--config", str(cfg), "--nu", "0.7", "--out", str(out)]) == 0
    meta = json.loads(out.read_text())["config"]
    assert meta["nu"] == 0.7 and meta["rho"] == 0.5


def test_gen_then_fit_real_data_path(tmp_path):
    data = tmp_path / "splice_like.txt"
    assert main(["gen", "--model", "logistic", "--n", "150", "--p", "60", "--K", "3",
                 "--R", "3", "--out", str(data)]) == 0
    assert (tmp_path / "splice_like.txt.json").exists()
    out = tmp_path / "f.json"
    assert main(["fit", "--data", str(data), "--gamma", "0.5", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["T"] == int(0.5 * 150 / np.log(150))
    assert d["data"]["n"] == 150


def test_tune_dump(tmp_path):
    out = tmp_path / "t.json"
    assert main(["tune", *GEN, "--alpha", "2", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["path"][0]["T"] == 0 and d["T_hat"] >= 4


@pytest.mark.parametrize("argv,code,needle", [
    (["fit", "--data", "/no/such/file.txt"], 2, "not found"),
    (["fit", "--config", "/no/such.cfg"], 2, "not found"),
    (["fit", *GEN, "--nu", "1.5"], 1, "nu"),
    (["fit", "--bogus"], 1, "bogus"),
    (["frobnicate"], 1, "invalid choice"),
    (["fit", "--model", "linear"], 1, "missing"),
])
def test_exit_codes(argv, code, needle, capsys):
    assert main(argv) == code
    assert needle in capsys.readouterr().err


def test_malformed_data_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("1 1:1\n1 3:1 2:1\n")
    assert main(["fit", "--data", str(bad)]) == 2
    assert "bad.txt:2" in capsys.readouterr().err


def test_bench_preset_writes_files(tmp_path, capsys):
    assert main(["bench", "--preset", "smoke", "--replications", "1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "results.csv").exists() and (tmp_path / "summary.csv").exists()


def test_verify_quick_passes(capsys):
    assert main(["verify", "--quick"]) == 0
    out = capsys.readouterr().out
    assert "ALL PASS" in out and "gradient_linear:" in out


def test_verify_reports_corrupted_gradient(capsys):
    assert main(["verify", "--quick", "--corrupt-gradient"]) == 3
    out = capsys.readouterr().out
    assert "FAIL gradient_linear" in out and "FAIL gradient_logistic" in out
