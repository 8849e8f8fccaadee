"""
Tests for the command-line surface
"""

import json

import numpy as np
import pytest

from cli import cli_dispatch
from commutant import factor_embedding
from ensembles import sample_matrix
from matrix_io import array_to_json, matrix_from_json, read_matrix, write_json, write_matrix


@pytest.fixture
def diag12(tmp_path):
    path = tmp_path / "diag.json"
    write_matrix(path, np.diag([1.0, 2.0]))
    return path


def test_check_reducible_diagonal(diag12, capsys):
    code = cli_dispatch(["check", "--input", str(diag12)])
    out = capsys.readouterr().out
    assert code == 0
    assert "verdict: Reducible" in out
    assert "dimension: 2" in out


def test_check_borderline_exits_two(tmp_path, capsys):
    path = tmp_path / "close.json"
    write_matrix(path, np.diag([0.0, 1.0, 1.0 + 1e-10]))
    assert cli_dispatch(["check", "--input", str(path)]) == 2
    assert "Borderline" in capsys.readouterr().out


def test_perturb_then_check(tmp_path, capsys):
    src = tmp_path / "t.json"
    out = tmp_path / "t3.json"
    trace = tmp_path / "trace.json"
    write_matrix(src, sample_matrix("block_diagonal_conjugated", 4, seed=5))
    code = cli_dispatch(["perturb", "--input", str(src), "--epsilon", "0.1", "--seed", "2",
                         "--output", str(out), "--trace", str(trace)])
    assert code == 0
    assert np.linalg.norm(read_matrix(out) - read_matrix(src), 2) < 0.1
    capsys.readouterr()

    assert cli_dispatch(["check", "--input", str(out)]) == 0
    assert "verdict: Irreducible" in capsys.readouterr().out

    assert cli_dispatch(["verify", "--trace", str(trace)]) == 0
    assert "❌" not in capsys.readouterr().out


def test_perturb_to_stdout(diag12, capsys):
    assert cli_dispatch(["perturb", "--input", str(diag12), "--epsilon", "0.2"]) == 0
    t3 = matrix_from_json(json.loads(capsys.readouterr().out))
    assert np.linalg.norm(t3 - np.diag([1.0, 2.0]), 2) < 0.2


def test_perturb_rejects_nonpositive_epsilon(diag12, capsys):
    assert cli_dispatch(["perturb", "--input", str(diag12), "--epsilon", "0"]) == 1
    assert "epsilon" in capsys.readouterr().err


def test_commutant_prints_basis(diag12, capsys):
    assert cli_dispatch(["commutant", "--input", str(diag12)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["dimension"] == 2
    assert payload["verdict"] == "Reducible"
    assert len(payload["basis"]) == 2


def test_commutant_relative_to_factor(tmp_path, capsys):
    t = tmp_path / "t.json"
    amb = tmp_path / "factor.json"
    write_matrix(t, np.kron(np.array([[0, 1], [0, 0]]), np.eye(2)))
    write_json(amb, factor_embedding(2, 2).to_dict())
    assert cli_dispatch(["commutant", "--input", str(t), "--relative", str(amb)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["dimension"] == 1
    assert payload["verdict"] == "Irreducible"


def test_reduce(diag12, tmp_path, capsys):
    assert cli_dispatch(["reduce", "--input", str(diag12)]) == 0
    p = matrix_from_json(json.loads(capsys.readouterr().out))
    np.testing.assert_allclose(p @ p, p, atol=1e-12)

    irreducible = tmp_path / "jordan.json"
    write_matrix(irreducible, np.array([[0, 1], [0, 0]]))
    assert cli_dispatch(["reduce", "--input", str(irreducible)]) == 0
    assert capsys.readouterr().out.strip() == "irreducible"


def test_sylvester_overlapping_spectra(tmp_path, capsys):
    a, c = tmp_path / "a.json", tmp_path / "c.json"
    write_matrix(a, np.eye(2))
    write_matrix(c, np.ones((2, 2)))
    assert cli_dispatch(["sylvester", "--a", str(a), "--b", str(a), "--c", str(c)]) == 1
    assert "SpectraOverlap" in capsys.readouterr().err


def test_sylvester_rectangular_solution(tmp_path, capsys):
    a, b, c = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
    write_matrix(a, np.diag([1.0, 2.0]))
    write_matrix(b, np.array([[5.0]]))
    write_json(c, array_to_json(np.array([[1.0], [3.0]])))
    assert cli_dispatch(["sylvester", "--a", str(a), "--b", str(b), "--c", str(c), "--method", "schur"]) == 0
    solution, report = capsys.readouterr().out.strip().splitlines()
    payload = json.loads(solution)
    assert (payload["rows"], payload["cols"]) == (2, 1)
    x = np.array([complex(re, im) for re, im in payload["entries"]])
    np.testing.assert_allclose(x, [-0.25, -1.0], atol=1e-12)
    assert report.startswith("residual: ")
    assert report.endswith(" gap: 3")


def test_sylvester_reports_residual_when_logging_is_quiet(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("LOG_LEVEL", "WARNING")
    a, b, c = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
    write_matrix(a, np.array([[2.0]]))
    write_matrix(b, np.array([[1.0]]))
    write_matrix(c, np.array([[3.0]]))
    assert cli_dispatch(["sylvester", "--a", str(a), "--b", str(b), "--c", str(c)]) == 0
    solution, report = capsys.readouterr().out.strip().splitlines()
    np.testing.assert_allclose(matrix_from_json(json.loads(solution)), [[3.0]], atol=1e-12)
    assert report == "residual: 0 gap: 1"


def test_verify_fails_on_tampered_trace(tmp_path, capsys):
    src, trace = tmp_path / "t.json", tmp_path / "trace.json"
    write_matrix(src, np.diag([1.0, 2.0]))
    assert cli_dispatch(["perturb", "--input", str(src), "--epsilon", "0.1", "--trace", str(trace)]) == 0
    data = json.loads(trace.read_text())
    data["inputs"]["epsilon"] = 1e-6
    write_json(trace, data)
    capsys.readouterr()
    assert cli_dispatch(["verify", "--trace", str(trace)]) == 1
    assert "❌ t_t3" in capsys.readouterr().out


def test_experiment_density(tmp_path, capsys):
    cfg, out = tmp_path / "cfg.json", tmp_path / "out" / "rows.csv"
    write_json(cfg, {"dim": 3, "trials": 2, "epsilons": [0.1], "seed": 0})
    assert cli_dispatch(["experiment", "density", "--config", str(cfg), "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "trial,epsilon,distance,commutant_dim,verdict,millis"
    assert "success fraction 1.0000" in capsys.readouterr().out


def test_usage_errors_exit_one(capsys):
    assert cli_dispatch(["check"]) == 1
    assert cli_dispatch(["check", "--input", "/nonexistent/t.json"]) == 1
    assert cli_dispatch(["frobnicate"]) == 1
    assert capsys.readouterr().err


def test_invalid_matrix_file_exits_one(tmp_path, capsys):
    path = tmp_path / "bad.json"
    write_json(path, {"dim": 2, "entries": [[1, 0]]})
    assert cli_dispatch(["check", "--input", str(path)]) == 1
    assert "InvalidMatrix" in capsys.readouterr().err

    write_json(path, {"dim": 2, "entries": 5})
    assert cli_dispatch(["check", "--input", str(path)]) == 1
    assert "InvalidMatrix" in capsys.readouterr().err

    a, b = tmp_path / "a.json", tmp_path / "b.json"
    write_matrix(a, np.diag([1.0, 2.0]))
    write_matrix(b, np.array([[5.0]]))
    write_json(path, {"rows": 2, "cols": 1, "entries": 5})
    assert cli_dispatch(["sylvester", "--a", str(a), "--b", str(b), "--c", str(path)]) == 1
    assert "InvalidMatrix" in capsys.readouterr().err
