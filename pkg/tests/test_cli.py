import json
import subprocess
import sys

import numpy as np
import pytest

from schatten_lab import reports
from schatten_lab.cli import main


def run(argv, capsys):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def only(path, pattern):
    hits = sorted(path.glob(pattern))
    assert len(hits) == 1, hits
    return hits[0]


# ----------------------------------------------------------------- kernel


def test_kernel_defaults(tmp_path, capsys):
    code, out = run(["kernel", "--defaults", "--out", tmp_path], capsys)
    assert code == 0
    assert "PASS" in out.out
    summary = json.loads(only(tmp_path, "kernel-*[0-9a-f].json").read_text())
    assert summary["max_residual"] <= 1e-6 and summary["passed"]
    assert summary["config"]["command"] == "kernel"
    residuals = only(tmp_path, "kernel-*-residuals.csv").read_text().splitlines()
    assert residuals[0] == "ratio,re,im,abs_error" and len(residuals) == 51


def test_kernel_truncated_fails(tmp_path, capsys):
    code, out = run(["kernel", "--s-extent", 5, "--out", tmp_path], capsys)
    assert code != 0
    assert "FAIL" in out.out


def test_kernel_bad_grid(tmp_path, capsys):
    code, out = run(["kernel", "--x-step", -1, "--out", tmp_path], capsys)
    assert code == 2 and "error" in out.err


def test_kernel_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, out = run(["kernel", "--out", blocker / "sub"], capsys)
    assert code == 2 and "cannot write" in out.err


def test_help_exits_zero(capsys):
    for argv in (["--help"], ["kernel", "--help"], ["norm", "--help"], ["experiment", "--help"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 0
    assert "usage" in capsys.readouterr().out


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "schatten_lab.cli", "kernel", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "--s-extent" in proc.stdout


# ----------------------------------------------------------------- norm


def norm_summary(path):
    return json.loads(only(path, "norm-*[0-9a-f].json").read_text())


def test_norm_ones(tmp_path, capsys):
    code, _ = run(["norm", "--ones", 4, "--p", 3, "--out", tmp_path], capsys)
    assert code == 0
    assert abs(norm_summary(tmp_path)["value_lower_bound"] - 1.0) <= 1e-9


def test_norm_oscillatory(tmp_path, capsys):
    code, _ = run(["norm", "--mus", "1,2,3,4,5,6,7,8", "--s", 10, "--p", 2, "--out", tmp_path], capsys)
    assert code == 0
    assert abs(norm_summary(tmp_path)["value_lower_bound"] - 1.0) <= 1e-6


def test_norm_divided_difference(tmp_path, capsys):
    code, out = run(["norm", "--function", "abs", "--strictify", "--lambdas=-2,-1,1,3", "--p", 1.5, "--out", tmp_path],
                    capsys)
    assert code == 0
    assert "lower bound" in out.out
    s = norm_summary(tmp_path)
    assert s["witness_check_passed"]
    W = reports.read_matrix(only(tmp_path, "norm-*-witness.json"))
    assert W.shape == (4, 4)


def test_norm_symbol_file(tmp_path, capsys):
    sym = tmp_path / "phi.json"
    reports.write_matrix(sym, 1.0 - np.eye(3))
    code, _ = run(["norm", "--symbol-file", sym, "--p", 4, "--out", tmp_path / "o"], capsys)
    assert code == 0
    assert abs(norm_summary(tmp_path / "o")["value_lower_bound"] - 1.0641658617058178) <= 1e-6


def test_norm_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 2}')
    assert run(["norm", "--symbol-file", bad, "--out", tmp_path], capsys)[0] == 2
    assert run(["norm", "--ones", 3, "--p", 0.5, "--out", tmp_path], capsys)[0] == 2
    assert run(["norm", "--function", "abs", "--out", tmp_path], capsys)[0] == 2
    assert run(["norm", "--out", tmp_path], capsys)[0] == 2


def test_norm_env_out(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SCHATTEN_LAB_OUT", str(tmp_path / "env"))
    assert run(["norm", "--ones", 2], capsys)[0] == 0
    assert norm_summary(tmp_path / "env")["config"]["params"]["source"] == "ones"


def test_norm_config_rerun(tmp_path, capsys):
    run(["norm", "--mus", "1,2,4,7", "--s", 3, "--p", 1.5, "--starts", 5, "--out", tmp_path / "a"], capsys)
    cfg = only(tmp_path / "a", "norm-*[0-9a-f].json")
    assert run(["norm", "--config", cfg, "--out", tmp_path / "b"], capsys)[0] == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


# ----------------------------------------------------------------- experiment


def test_experiment_lipschitz(tmp_path, capsys):
    code, out = run(["experiment", "lipschitz", "--p", 2, "--n", 8, "--trials", 50, "--seed", 1, "--out", tmp_path],
                    capsys)
    assert code == 0 and "[FAIL]" not in out.out
    rows = only(tmp_path, "lipschitz-*.csv").read_text().splitlines()
    ratios = [float(line.split(",")[-1]) for line in rows[1:] if line.split(",")[-1]]
    assert len(ratios) == 4 * 51
    assert max(ratios) <= 1 + 1e-9


def test_experiment_unknown_suite(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["experiment", "nosuch"])
    assert exc.value.code != 0
    assert "usage" in capsys.readouterr().err


def test_experiment_flag_not_for_suite(tmp_path, capsys):
    code, out = run(["experiment", "reconstruction", "--trials", 3, "--out", tmp_path], capsys)
    assert code == 2 and "does not apply" in out.err


def test_experiment_failure_exit_code(tmp_path, capsys):
    # A kernel truncated to |s| <= 5 cannot reconstruct the symbols, so the suite must fail.
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "experiment", "params": {"cases": 3, "kernel": {"s_extent": 5.0}}}))
    code, out = run(["experiment", "reconstruction", "--config", cfg, "--out", tmp_path / "o"], capsys)
    assert code == 1
    assert "[FAIL]" in out.out and "failing rows" in out.err


def test_experiment_config_echo_reproduces(tmp_path, capsys):
    argv = ["experiment", "integer-reduction", "--starts", 4, "--seed", 3]
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "experiment",
                               "params": {"sequences": 3, "restriction_cases": 4, "s_values": [0.0, 2.0],
                                          "p_values": [3.0], "restriction_p": [1.5]}}))
    assert run(argv + ["--config", cfg, "--out", tmp_path / "a"], capsys)[0] == 0
    echoed = only(tmp_path / "a", "integer-reduction-summary-*.json")
    assert run(["experiment", "integer-reduction", "--config", echoed, "--out", tmp_path / "b", "--threads", 3],
               capsys)[0] == 0
    names = sorted(f.name for f in (tmp_path / "a").iterdir())
    assert names == sorted(f.name for f in (tmp_path / "b").iterdir())
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
