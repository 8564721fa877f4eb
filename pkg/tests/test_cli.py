import csv
import io
import subprocess
import sys

import pytest

from spfit.cli import main


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_solve_row_count(capsys):
    code, out, _ = run(["solve", "--problem", "const_a1_f0", "--eps", "0.1", "--n", "4"], capsys)
    assert code == 0
    table = rows(out)
    assert table[0] == ["t", "U", "u", "abs_error"] and len(table) == 6


def test_solve_steady_is_exact(capsys):
    code, out, _ = run(["solve", "--problem", "steady", "--mesh", "random", "--n", "50"], capsys)
    assert code == 0
    assert all(float(r[3]) <= 1e-12 for r in rows(out)[1:])


def test_round_trip_precision(capsys):
    _, out, _ = run(["solve", "--problem", "var_sine", "--n", "8"], capsys)
    for r in rows(out)[1:]:
        for field in r:
            assert repr(float(field)) == field


def test_unknown_problem_exit_2(capsys):
    code, _, err = run(["solve", "--problem", "bogus"], capsys)
    assert code == 2 and "bogus" in err


def test_bad_flag_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--frobnicate"])
    assert exc.value.code == 2


def test_converge_row_count(capsys):
    code, out, _ = run(["converge", "--problem", "var_linear", "--eps-min-exp", "-3",
                        "--eps-max-exp", "-3", "--n-min", "16", "--n-max", "32"], capsys)
    assert code == 0
    table = rows(out)
    assert table[0][:6] == ["eps", "N", "mesh", "scheme", "seed", "error"]
    assert len(table) - 1 == 1 * 2 + 2
    assert [r[0] for r in table[-2:]] == ["uniform", "uniform"]


def test_converge_assert_fitted_random(capsys):
    code, _, err = run(["converge", "--problem", "var_linear", "--mesh", "random", "--assert",
                        "--out", "/dev/null"], capsys)
    assert code == 0, err


def test_converge_assert_standard_uniform(capsys):
    code, _, err = run(["converge", "--problem", "const_a1_f0", "--scheme", "standard",
                        "--assert", "--out", "/dev/null"], capsys)
    assert code == 4 and "FAIL" in err


def test_byte_identical_output(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for path in paths:
        assert main(["converge", "--problem", "var_sine", "--mesh", "random", "--seed", "3",
                     "--eps-min-exp", "-6", "--n-max", "128", "--out", str(path)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# run\nproblem = const_a1_f0\neps = 0.1\nn = 4\n")
    code, out, _ = run(["solve", "--config", str(cfg)], capsys)
    assert code == 0 and len(rows(out)) == 6
    code, out, _ = run(["solve", "--config", str(cfg), "--n", "8"], capsys)
    assert code == 0 and len(rows(out)) == 10
    cfg.write_text("colour = blue\n")
    code, _, err = run(["solve", "--config", str(cfg)], capsys)
    assert code == 2 and "colour" in err


def test_decompose_columns(capsys):
    code, out, _ = run(["decompose", "--problem", "const_a1_f1_u3", "--eps", "0.1", "--n", "4"],
                       capsys)
    assert code == 0
    table = rows(out)
    assert table[0] == ["t", "U", "V", "W", "v", "w"] and len(table) == 6
    for t, U, V, W, v, w in (map(float, r) for r in table[1:]):
        assert abs(V + W - U) <= 1e-13 * 3 and V == 1.0


def test_verify_defaults_pass(capsys):
    code, out, _ = run(["verify"], capsys)
    assert code == 0, out
    assert "FAIL" not in out and "prng=numpy.random.PCG64" in out


def test_verify_non_monotone_mesh_file(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("0\n0.5\n0.4\n1\n")
    code, _, err = run(["verify", "--mesh-file", str(path), "--c-mesh", "3"], capsys)
    assert code == 2 and "monotone" in err


def test_verify_zero_trials_skipped(capsys):
    code, out, _ = run(["verify", "--trials", "0"], capsys)
    assert code == 0
    line = next(x for x in out.splitlines() if "maximum principle (" in x)
    assert line.startswith("[SKIP]")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "spfit", "solve", "--problem", "steady",
                          "--n", "2"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.count("\n") == 4


def test_oracle_failure_exit_3(monkeypatch, capsys):
    from spfit import cli
    from spfit.exceptions import OracleError

    def broken(*args, **kwargs):
        raise OracleError("references disagree")

    monkeypatch.setattr(cli, "build_error_table", broken)
    code, _, err = run(["converge"], capsys)
    assert code == 3 and "references disagree" in err


def test_failed_check_exit_5(monkeypatch, capsys):
    from spfit import cli
    from spfit.reports import CheckReport

    monkeypatch.setattr(cli, "check_exp_difference",
                        lambda **kw: CheckReport("injected", False, 2.0, 1.0, -1.0, 1, 1))
    code, out, _ = run(["verify"], capsys)
    assert code == 5 and "[FAIL] injected" in out
