import json

import numpy as np
import pytest

from dsfkit.cli import main, parse_poles
from dsfkit.errors import ValidationError
from dsfkit.factorization import CoprimeFactors, factors_to_dict, output_injection_factors
from dsfkit.realization import StateSpace, system_to_dict

from systems import random_system


@pytest.fixture
def system_file(tmp_path):
    sys_ = random_system(np.random.default_rng(1), 4, 2, 1)
    path = tmp_path / "plant.json"
    path.write_text(json.dumps(system_to_dict(sys_, "plant")))
    return path


def run(args, out):
    return main(list(args) + ["--out", str(out)])


def read(path):
    return json.loads(path.read_text())


def test_parse_poles():
    assert parse_poles("-1, -2+1j,-2-1j") == [-1, -2 + 1j, -2 - 1j]
    assert parse_poles("") == []
    with pytest.raises(ValidationError):
        parse_poles("-1,abc")


@pytest.mark.parametrize("network", ["ring", "line"])
def test_demo(network, tmp_path):
    assert run(["demo", network], tmp_path) == 0
    out = tmp_path / "demo" / network
    assert {p.name for p in out.iterdir()} == {
        "report.json", "factors.json", "network.json", "system.json", "topology.dot"}
    report = read(out / "report.json")
    assert report["passed"]
    expected = {"ring": [[1, 2], [2, 3], [3, 1]], "line": [[1, 2], [2, 3]]}[network]
    assert sorted(report["edges"]) == expected
    assert all(set(c) >= {"name", "pass", "margin", "worst_lambda"} for c in report["checks"])


def test_demo_other_seed(tmp_path):
    assert run(["demo", "ring", "--seed", "7"], tmp_path) == 0


def test_demo_is_byte_deterministic(tmp_path):
    run(["demo", "ring"], tmp_path / "a")
    run(["demo", "ring"], tmp_path / "b")
    for name in ("report.json", "factors.json", "topology.dot"):
        assert (tmp_path / "a/demo/ring" / name).read_bytes() == \
            (tmp_path / "b/demo/ring" / name).read_bytes()


def test_dsf_default_and_zero_k(system_file, tmp_path):
    assert run(["dsf", str(system_file), "--dot"], tmp_path / "a") == 0
    kfile = tmp_path / "k.json"
    kfile.write_text(json.dumps([[0.0, 0.0], [0.0, 0.0]]))
    assert run(["dsf", str(system_file), "--dot", "--k-file", str(kfile)], tmp_path / "b") == 0
    a = tmp_path / "a/dsf/plant"
    b = tmp_path / "b/dsf/plant"
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "topology.dot").exists()


def test_dsf_bad_k_shape(system_file, tmp_path):
    kfile = tmp_path / "k.json"
    kfile.write_text(json.dumps({"K": [[1.0]]}))
    assert run(["dsf", str(system_file), "--k-file", str(kfile)], tmp_path) == 2


def test_malformed_json_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{\"A\": [[1]]")
    assert run(["dsf", str(bad)], tmp_path) == 2
    assert "malformed JSON" in capsys.readouterr().err


def test_missing_file_exit_code(tmp_path):
    assert run(["dsf", str(tmp_path / "nope.json")], tmp_path) == 2


def test_coprime_then_recover(system_file, tmp_path):
    assert run(["coprime", str(system_file), "--poles=-1,-1"], tmp_path) == 0
    factors = tmp_path / "coprime/plant/factors.json"
    assert read(factors)["kind"] == "left_coprime_factors"
    assert run(["recover", str(factors)], tmp_path) == 0
    report = read(tmp_path / "recover/plant/report.json")
    names = {c["name"]: c for c in report["checks"]}
    assert names["factor_round_trip"]["pass"] and names["riccati_residual"]["pass"]


def test_coprime_full_output_system(tmp_path):
    sys_ = StateSpace([[1.0, 2.0], [0.0, 3.0]], [[0.0], [1.0]], np.eye(2), np.zeros((2, 1)))
    path = tmp_path / "full.json"
    path.write_text(json.dumps(system_to_dict(sys_, "full")))
    assert run(["coprime", str(path)], tmp_path) == 0


@pytest.mark.parametrize("poles", ["--poles=-1+1j,-2", "--poles=-1", "--poles=-1,-2,-3"])
def test_coprime_bad_poles(system_file, tmp_path, poles):
    assert run(["coprime", str(system_file), poles], tmp_path) == 2


def test_coprime_unobservable(tmp_path, capsys):
    sys_ = StateSpace(np.diag([1.0, -4.0]), [[1.0], [1.0]], [[1.0, 0.0]], [[0.0]])
    path = tmp_path / "unobs.json"
    path.write_text(json.dumps(system_to_dict(sys_, "unobs")))
    assert run(["coprime", str(path), "--poles=-1"], tmp_path) == 1
    assert "-4" in capsys.readouterr().err


def test_recover_scalar(tmp_path):
    joint = StateSpace([[-1.0]], [[-3.0, 3.0]], [[1.0]], [[1.0, 0.0]])
    path = tmp_path / "scalar.json"
    path.write_text(json.dumps(factors_to_dict(CoprimeFactors(joint, 1), "scalar")))
    assert run(["recover", str(path)], tmp_path) == 0
    report = read(tmp_path / "recover/scalar/report.json")
    assert report["W"]["D"] == [[pytest.approx(2.0)]]
    assert report["V"]["D"] == [[pytest.approx(3.0)]]


def test_recover_disconjugate(tmp_path, capsys):
    sys_ = StateSpace([[-1.0, 0.0], [-1.0, -1.0]], [[1.0], [1.0]], [[1.0, 0.0]], [[0.0]])
    path = tmp_path / "jordan.json"
    path.write_text(json.dumps(factors_to_dict(output_injection_factors(sys_, np.zeros((2, 1))), "jordan")))
    assert run(["recover", str(path)], tmp_path) == 1
    assert "cond(V1)" in capsys.readouterr().err


def test_invalid_flags(system_file, tmp_path):
    with pytest.raises(SystemExit) as info:
        run(["dsf", str(system_file), "--samples", "0"], tmp_path)
    assert info.value.code == 2
