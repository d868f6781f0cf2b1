import csv
import io
import json
import subprocess
import sys

import pytest

from sqrtwalk import __version__, cli, report


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    rep = json.loads(out)
    report.validate(rep)
    return rep


def error_of(err):
    return json.loads(err.strip().splitlines()[-1])["error"]


def test_exponent_example(capsys):
    rep = run_json(capsys, "exponent", "--c", "0")
    assert rep["result"]["value"] == 1.0 and rep["result"]["residual"] <= 1e-10
    assert rep["version"] == __version__ and rep["seed"] == 0
    assert rep["config"]["tol"] == 1e-10 and rep["config"]["format"] == "json"


def test_enumerate_csv_example(capsys):
    code, out, _ = run(capsys, "enumerate", "--dist", "rademacher", "--c", "0", "--a", "1",
                       "--b", "0", "--horizon", "4", "--format", "csv")
    assert code == 0
    lines = [ln for ln in out.splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(io.StringIO("\n".join(lines))))
    assert rows[0] == report.CSV_COLUMNS["enumerate"]
    assert [(int(n), float(p)) for n, p in rows[1:]] == [(1, 0.5), (2, 0.5), (3, 0.375),
                                                          (4, 0.375)]
    assert out.startswith("# command: enumerate\n# version: ")


def test_simulate_is_byte_identical(capsys):
    argv = ["simulate", "--seed", "42", "--c", "1", "--a", "2", "--horizons", "1,10,100",
            "--trials", "20000"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second
    rep = json.loads(first)
    assert [e["n"] for e in rep["result"]["estimates"]] == [1, 10, 100]


def test_wall_time_goes_to_stderr(capsys):
    code, out, err = run(capsys, "psi", "--p", "2", "--x", "1")
    assert code == 0 and "wall_time_s" in err and "wall_time_s" not in out
    rep = run_json(capsys, "psi", "--p", "2", "--x", "1", "--timing")
    assert rep["wall_time_s"] >= 0


def test_every_command_validates_against_schema(capsys, tmp_path):
    cases = [
        ["psi", "--p", "-0.5", "--x", "1"],
        ["v", "--p", "2", "--x", "3", "--t", "1", "--clipped"],
        ["v", "--p", "2", "--x", "3", "--t", "1", "--derivative", "t"],
        ["exponent", "--p", "3"],
        ["simulate", "--c", "0", "--a", "1", "--horizons", "2:5", "--trials", "1000"],
        ["tail-fit", "--c", "0", "--a", "1", "--horizons", "2:8", "--trials", "20000"],
        ["localprob", "--c", "0", "--a", "1", "--n", "3", "--bins", "1.5:1,3.5:1",
         "--dist", "rademacher", "--trials", "1000"],
        ["enumerate", "--c", "0", "--a", "1", "--horizon", "5"],
        ["w-direct", "--c", "1", "--a", "2", "--trials", "200", "--n-start", "16",
         "--n-cap", "64"],
        ["w-decomp", "--c", "1", "--a", "2", "--trials", "200", "--n-max", "64"],
        ["harmonic-check", "--c", "1", "--a", "2", "--b", "1", "--dist", "rademacher",
         "--trials", "200", "--horizon", "16", "--steps", "2"],
        ["audit", "--c", "1", "--p1", "1.8", "--C", "1", "--R", "64"],
        ["search-constants", "--c", "1", "--p1", "1.8", "--k-max", "2", "--m-max", "8"],
        ["kappa", "--c", "0", "--a", "1", "--n-grid", "3:8", "--trials", "20000",
         "--w-trials", "200"],
    ]
    for argv in cases:
        rep = run_json(capsys, *argv)
        assert rep["command"] == argv[0]
        code, out, err = run(capsys, *argv, "--format", "csv")
        assert code == 0, err
        header = [ln for ln in out.splitlines() if not ln.startswith("#")][0]
        assert header.split(",") == report.CSV_COLUMNS[argv[0]]


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"c": 0, "a": 1, "horizons": [1, 2, 3], "trials": 50,
                               "seed": 7}))
    rep = run_json(capsys, "simulate", "--config", str(cfg), "--trials", "80")
    assert rep["config"]["trials"] == 80 and rep["seed"] == 7
    assert rep["config"]["horizons"] == [1, 2, 3] and rep["config"]["dist"] == "gaussian"
    assert "threads" not in rep["config"] and "out" not in rep["config"]


def test_unknown_config_key(capsys, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"c": 0, "a": 1, "bogus": 1}))
    code, _, err = run(capsys, "enumerate", "--config", str(cfg), "--horizon", "2")
    assert code == 2 and "bogus" in error_of(err)["message"]


def test_out_path(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, out, _ = run(capsys, "exponent", "--c", "1", "--out", str(path))
    assert code == 0 and out == ""
    assert json.loads(path.read_text())["result"]["value"] == 2.0


def test_boundary_precondition_reports_inequality(capsys):
    code, out, err = run(capsys, "simulate", "--c", "1", "--a", "0.5", "--b", "1",
                         "--horizons", "4")
    e = error_of(err)
    assert code == 2 and out == ""
    assert e["type"] == "PreconditionError" and "a > c*sqrt(b)" in e["message"]
    assert e["command"] == "simulate" and e["exit_code"] == 2


def test_missing_required_flag(capsys):
    code, _, err = run(capsys, "psi", "--p", "1")
    assert code == 2 and "--x" in error_of(err)["message"]


def test_invalid_flag(capsys):
    code, _, err = run(capsys, "psi", "--p", "1", "--x", "1", "--bogus", "3")
    assert code == 2 and error_of(err)["type"] == "UsageError"


def test_numerical_failure_exit_code(capsys):
    code, _, err = run(capsys, "exponent", "--c", "25")
    assert code == 3 and error_of(err)["type"] == "ExponentSolveError"


def test_exponent_needs_exactly_one_input(capsys):
    assert run(capsys, "exponent")[0] == 2
    assert run(capsys, "exponent", "--c", "1", "--p", "2")[0] == 2


def test_nonpositive_p_rejected(capsys):
    code, _, err = run(capsys, "exponent", "--p", "-1")
    assert code == 2 and "p <= 0" in error_of(err)["message"]


def test_warnings_are_reported(capsys):
    rep = run_json(capsys, "w-decomp", "--c", "0", "--a", "1", "--dist", "rademacher",
                   "--trials", "200", "--n-max", "4")
    assert rep["result"]["flags"]["biased"] and rep["warnings"]


def test_version_flag(capsys):
    code, out, _ = run(capsys, "--version")
    assert code == 0 and __version__ in out


@pytest.mark.slow
def test_threads_do_not_change_output():
    base = [sys.executable, "-m", "sqrtwalk", "simulate", "--seed", "5", "--c", "1",
            "--a", "2", "--horizons", "0:8", "--trials", "50000", "--format", "csv"]
    outs = [subprocess.run(base + ["--threads", str(k)], capture_output=True, check=True).stdout
            for k in (1, 2, 4)]
    assert outs[0] == outs[1] == outs[2] and outs[0]
