import csv
import json

import numpy as np
import pytest

from owlmmv import io
from owlmmv.cli import main, parse_values
from owlmmv.exceptions import CsvParseError, InvalidInputError


@pytest.fixture
def problem(tmp_path, rng):
    A = rng.normal(0, 12**-0.25, (12, 24))
    X = np.zeros((24, 3))
    X[[2, 7, 19]] = rng.standard_normal((3, 3))
    Y = A @ X
    io.write_matrix(tmp_path / "A.csv", A)
    io.write_matrix(tmp_path / "Y.csv", Y)
    return tmp_path, A, Y, X


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_matrix_round_trip(tmp_path, rng):
    X = rng.standard_normal((4, 3))
    io.write_matrix(tmp_path / "x.csv", X)
    np.testing.assert_array_equal(io.read_matrix(tmp_path / "x.csv"), X)
    assert (tmp_path / "x.csv").read_bytes().count(b"\r") == 0


def test_read_matrix_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,2\n3\n")
    with pytest.raises(CsvParseError, match=":2"):
        io.read_matrix(p)
    p.write_text("1,2\n3,abc\n")
    with pytest.raises(CsvParseError, match="line|:2"):
        io.read_matrix(p)
    p.write_text("")
    with pytest.raises(CsvParseError):
        io.read_matrix(p)
    p.write_text("a,b\n1,2\n")
    np.testing.assert_array_equal(io.read_matrix(p, skip_header=True), [[1.0, 2.0]])


def test_parse_values():
    assert parse_values("1,5,10") == [1, 5, 10]
    assert parse_values("30:90:10") == [30, 40, 50, 60, 70, 80, 90]
    assert parse_values("2:4") == [2, 3, 4]
    with pytest.raises(InvalidInputError):
        parse_values("4:2")
    with pytest.raises(InvalidInputError):
        parse_values("a,b")


def test_solve_continuation_writes_outputs(problem):
    d, A, Y, X = problem
    code = main([
        "solve", "--dict", str(d / "A.csv"), "--obs", str(d / "Y.csv"), "--delta", "1e-6",
        "--continuation", "--out", str(d / "Z.csv"), "--report", str(d / "r.json"),
    ])
    assert code == 0
    Z = io.read_matrix(d / "Z.csv")
    assert Z.shape == X.shape
    rep = json.loads((d / "r.json").read_text())
    assert set(rep) == set(io.REPORT_KEYS)
    assert sorted(rep["support"]) == [2, 7, 19]
    assert rep["gamma_trace"][0] == 1.0 and rep["gamma_trace"][-1] == 0.0


def test_solve_fixed_and_discrepancy(problem):
    d, *_ = problem
    base = ["solve", "--dict", str(d / "A.csv"), "--obs", str(d / "Y.csv"), "--out", str(d / "Z.csv")]
    assert main(base + ["--gamma", "1", "--alpha", "0.5"]) == 0
    assert main(base + ["--gamma", "0.5", "--delta", "0.1"]) == 0


def test_solve_usage_errors(problem, capsys):
    d, *_ = problem
    assert main(["solve", "--dict", str(d / "A.csv")]) == 1
    assert main(["solve", "--dict", str(d / "A.csv"), "--obs", str(d / "Y.csv"),
                 "--continuation", "--out", str(d / "Z.csv")]) == 1
    assert main(["solve", "--dict", str(d / "missing.csv"), "--obs", str(d / "Y.csv"),
                 "--out", str(d / "Z.csv")]) == 1
    (d / "bad.csv").write_text("1,2\n3\n")
    assert main(["solve", "--dict", str(d / "bad.csv"), "--obs", str(d / "Y.csv"),
                 "--out", str(d / "Z.csv")]) == 1
    assert "bad.csv:2" in capsys.readouterr().err
    assert main(["frobnicate"]) == 1


def test_solve_failure_exit_code(tmp_path, rng):
    # gamma = 0 from Z = 0 is rank deficient.
    io.write_matrix(tmp_path / "A.csv", rng.standard_normal((4, 6)))
    io.write_matrix(tmp_path / "Y.csv", rng.standard_normal((4, 2)))
    code = main(["solve", "--dict", str(tmp_path / "A.csv"), "--obs", str(tmp_path / "Y.csv"),
                 "--gamma", "0", "--out", str(tmp_path / "Z.csv")])
    assert code == 2


def test_synth_csv_and_determinism(tmp_path):
    args = ["synth", "--sweep", "rank", "--values", "1,2", "--n", "12", "--m", "8", "--k", "2",
            "--s", "2", "--trials", "2", "--seed", "3", "--no-timing"]
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.csv"), "--threads", "2",
                        "--per-trial", str(tmp_path / "t.csv")]) == 0
    a = read_csv(tmp_path / "a.csv")
    assert a[0] == ["sweep_value", "recovery_rate", "mean_rmse", "mean_iters", "mean_time"]
    assert [r[0] for r in a[1:]] == ["1", "2"]
    b = read_csv(tmp_path / "b.csv")
    assert [r[:5] for r in b] == a
    assert b[0][5] == "mean_rmse_success"
    trials = read_csv(tmp_path / "t.csv")
    assert len(trials) == 1 + 4
    rates = {}
    for row in trials[1:]:
        rates.setdefault(row[0], []).append(int(row[3]))
    for row in a[1:]:
        assert float(row[1]) == pytest.approx(np.mean(rates[row[0]]))
    assert main(args + ["--out", str(tmp_path / "c.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()


def test_synth_bad_spec(tmp_path):
    assert main(["synth", "--sweep", "rank", "--values", "5", "--s", "3", "--k", "3",
                 "--out", str(tmp_path / "x.csv")]) == 1


def test_features_command(tmp_path, rng):
    G = rng.standard_normal((20, 3))
    data = G @ rng.standard_normal((3, 10))
    data[:, [1, 4, 6]] = G
    io.write_matrix(tmp_path / "d.csv", data)
    code = main(["features", "--data", str(tmp_path / "d.csv"), "--tol", "1e-6",
                 "--out", str(tmp_path / "f.csv"), "--report", str(tmp_path / "f.json")])
    assert code == 0
    rows = read_csv(tmp_path / "f.csv")
    assert rows[0] == ["rank", "feature_index", "score", "rmse_cumulative"]
    assert [int(r[0]) for r in rows[1:]] == list(range(1, len(rows)))
    rmse = [float(r[3]) for r in rows[1:]]
    assert rmse[2] <= 1e-6 * np.linalg.norm(data)
    assert set(json.loads((tmp_path / "f.json").read_text())) == set(io.REPORT_KEYS)
