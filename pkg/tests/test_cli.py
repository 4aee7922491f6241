import json
import subprocess
import sys

import pytest

from gamurn.cli import main, parse_scheme
from gamurn.harness import ExperimentSpec, Kind
from gamurn.weights import Family, WeightScheme


def test_parse_scheme_forms(tmp_path):
    assert parse_scheme("power:2") == WeightScheme.power(2)
    assert parse_scheme("linear").family is Family.LINEAR
    assert parse_scheme("constant").c == 1.0
    assert parse_scheme("group-exponential").family is Family.GROUP_EXPONENTIAL
    assert parse_scheme('{"family": "power", "gamma": 3}') == WeightScheme.power(3)
    f = tmp_path / "s.json"
    f.write_text(WeightScheme.exponential(2.0).to_json())
    assert parse_scheme(str(f)) == WeightScheme.exponential(2.0)


def test_simulate_gam(capsys, tmp_path):
    out = tmp_path / "traj.csv"
    assert main(["simulate", "--horizon", "500", "--snapshots", "100", "500",
                 "--seed", "3", "--out", str(out)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["n"] == 500
    assert out.read_text().startswith("n,group_index,size")


def test_simulate_rubin_and_rum(capsys, tmp_path):
    assert main(["simulate", "--model", "rubin", "--horizon", "300", "--out",
                 str(tmp_path / "r.csv")]) == 0
    assert json.loads(capsys.readouterr().out)["points"] == 300
    assert main(["simulate", "--model", "rum", "--k", "2", "--horizon", "1000"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["white"] + res["red"] == 1003


def test_phase(capsys):
    assert main(["phase", "--scheme", "power:0.5", "--p", "0.3"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "all_infinite"
    assert main(["phase", "--scheme", "power:2"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "monopoly"


def test_bound_estur(capsys, tmp_path):
    out = tmp_path / "b.json"
    assert main(["bound", "estur", "--k", "2", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["value"] == pytest.approx(0.19603, abs=1e-5)


def test_bound_lead_tail(capsys):
    assert main(["bound", "lead-tail", "--n", "2", "--r", "4", "--M", "10",
                 "--samples", "2000"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["n"] == 2 and len(res["grid"]) == 1


def test_experiment(capsys, tmp_path):
    spec = ExperimentSpec(Kind.PHASE_CENSUS, {"scheme": {"family": "linear"},
                                              "schedule": {"kind": "constant", "p": 0.5}},
                          [100, 1000], 4, 1)
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec.to_dict()))
    assert main(["experiment", str(path), "--out", str(tmp_path / "rep")]) == 0
    assert (tmp_path / "rep.csv").exists() and (tmp_path / "rep.json").exists()


def test_equivalence_small(capsys):
    assert main(["equivalence", "--p", "0.3", "--replicates", "3000", "--seed", "1"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["sequential"]["passed"] and res["rubin"]["passed"]


def test_error_exit_codes(capsys):
    assert main(["phase", "--scheme", "nonsense"]) == 1
    assert main(["phase", "--p", "1.5"]) == 1
    assert main(["bound", "estur", "--scheme", "linear", "--k", "2"]) == 1
    assert main(["experiment", "/nonexistent/spec.json"]) == 1
    assert main([]) == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gamurn", "phase", "--scheme", "linear"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["verdict"] == "all_infinite"
