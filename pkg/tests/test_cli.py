import json

import numpy as np
import pytest

from qcqp_exact.cli import run
from qcqp_exact.model import instance_from_dict, save_instance

from conftest import one_d


@pytest.fixture
def trust_file(tmp_path, trust_1d):
    path = tmp_path / "trust.json"
    save_instance(trust_1d, path)
    return str(path)


def _json(capsys):
    out = capsys.readouterr()
    return json.loads(out.out), out.err


def test_instance_roundtrip(tmp_path, trust_1d):
    path = tmp_path / "x.json"
    save_instance(trust_1d, path)
    back = instance_from_dict(json.loads(path.read_text()))
    assert np.array_equal(back.A_all, trust_1d.A_all) and np.array_equal(back.b_all, trust_1d.b_all)


def test_solve(trust_file, capsys):
    assert run(["solve", "--instance", trust_file]) == 0
    out, _ = _json(capsys)
    assert out["status"] == "converged" and abs(out["opt_sdp"] + 1.0) < 1e-6


def test_membership(trust_file, capsys):
    assert run(["membership", "--instance", trust_file, "--x", "0.5", "--t", "0.0"]) == 0
    out, _ = _json(capsys)
    assert out["membership"] == "in"
    assert abs(out["tau"] - (0.25 - 1.0)) < 1e-6


def test_out_file(trust_file, tmp_path, capsys):
    target = tmp_path / "o.json"
    assert run(["solve", "--instance", trust_file, "--out", str(target)]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(target.read_text())["status"] == "converged"


def test_usage_error_exit_2(capsys):
    assert run(["solve"]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "usage"
    assert run(["nonsense"]) == 2
    capsys.readouterr()
    assert run(["qmp"]) == 2  # seed is mandatory


def test_domain_error_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 1, "objective": {"A": [[1.0]]}, "bogus": 1}))
    assert run(["solve", "--instance", str(bad)]) == 1
    assert "error" in json.loads(capsys.readouterr().err)
    assert run(["solve", "--instance", str(tmp_path / "missing.json")]) == 1
    capsys.readouterr()
    assert run(["partition", "--a", "1", "2", "--x", "1"]) == 1


def test_membership_wrong_length(trust_file, capsys):
    assert run(["membership", "--instance", trust_file, "--x", "0", "1", "--t", "0"]) == 2


def test_infinite_values_are_strings(tmp_path, capsys):
    path = tmp_path / "inf.json"
    save_instance(one_d(1.0, 0.0, 0.0, [(1.0, 0.0, 1.0, "eq")]), path)
    assert run(["oracle", "--instance", str(path), "--lower", "-1", "--upper", "1", "--points", "11", "--tol", "1e-9"]) == 0
    out, _ = _json(capsys)
    assert out["value"] == "inf"


def test_partition(capsys):
    assert run(["partition", "--a", "3", "1", "1", "--solve", "--witness"]) == 0
    out, _ = _json(capsys)
    assert out["opt"] == 1.0 and abs(out["opt_sdp"] - 1.0) < 1e-12
    assert abs(out["solver_opt_sdp"] - out["opt_sdp"]) < 1e-6


def test_mixed_binary(capsys):
    assert run(["mixed-binary", "--point", "0.5", "0", "0"]) == 0
    out, _ = _json(capsys)
    assert out["ssdp"] and out["perspective"] and out["boundary"]
    assert run(["mixed-binary", "--point", "0.5", "0", "1"]) == 0
    out, _ = _json(capsys)
    assert out["face_case"] == "interior" and not out["boundary"]


def test_phi(capsys):
    assert run(["phi", "--r", "0.6", "--quadrature"]) == 0
    out, _ = _json(capsys)
    assert abs(out[0]["phi"] + 0.4) < 1e-15 and abs(out[0]["quadrature"] + 0.4) < 1e-8


def test_experiment_csv_reproducible(capsys):
    argv = ["experiment", "edm", "--n", "15", "--trials", "3", "--seed", "11"]
    assert run(argv) == 0
    first = capsys.readouterr()
    assert run(argv) == 0
    second = capsys.readouterr()
    assert first.out == second.out
    assert first.out.startswith("# qcqp-exact edm csv v1")
    assert "success_fraction" in first.err


def test_qmp(capsys):
    assert run(["qmp", "--seed", "1", "--instances", "1", "--points", "3"]) == 0
    out, _ = _json(capsys)
    assert sum(out["counts"].values()) == 3 and out["counts"]["unverified"] == 0
