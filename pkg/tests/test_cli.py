import json
import subprocess
import sys

import numpy as np
import pytest

from quenched_portfolio.cli import main
from quenched_portfolio.closed_form import GeometryStats, PortfolioSolution
from quenched_portfolio.model import AssetParameters, save_params, write_returns_csv
from quenched_portfolio.moments import MomentSet

from conftest import random_params


@pytest.fixture
def identity_files(tmp_path):
    """Two assets, r = (1, 3), four periods whose modified returns give J = I."""
    params = AssetParameters([1.0, 3.0], [1.0, 1.0])
    x = np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]])
    save_params(params, tmp_path / "p.json")
    write_returns_csv(x + params.means[:, None], tmp_path / "r.csv")
    return tmp_path


def run(*args):
    return main([str(a) for a in args])


def test_generate(tmp_path, capsys):
    save_params(random_params(5, 0), tmp_path / "p.json")
    assert run("generate", tmp_path / "p.json", "--periods", 15, "--seed", 3, "--out", tmp_path / "a.csv") == 0
    assert "N=5 p=15" in capsys.readouterr().out
    rows = [l for l in (tmp_path / "a.csv").read_text().splitlines() if not l.startswith("#")]
    assert len(rows) == 5 and all(len(r.split(",")) == 15 for r in rows)
    run("generate", tmp_path / "p.json", "--periods", 15, "--seed", 3, "--out", tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_generate_rejects_p_le_n(tmp_path, capsys):
    save_params(random_params(5, 0), tmp_path / "p.json")
    assert run("generate", tmp_path / "p.json", "--periods", 5, "--out", tmp_path / "a.csv") == 1
    assert "p > N" in capsys.readouterr().err


def test_bad_flags_exit_1(tmp_path):
    assert run("generate") == 1
    assert run("optimize", "x.csv", "p.json", "--tau", "abc", "--out", "o.json") == 1
    assert run("bogus") == 1
    assert run("replica", tmp_path / "missing.json", "--alpha", 2, "--out", tmp_path / "o") == 1


def test_optimize_identity(identity_files):
    d = identity_files
    assert run("optimize", d / "r.csv", d / "p.json", "--tau", 2, "--out", d / "o.json", "--verify") == 0
    out = json.loads((d / "o.json").read_text())
    assert out["solution"]["R_plus"] == 3.0
    assert out["geometry"]["Delta"] == 4.0
    assert out["geometry"]["rho"] == 0.0
    assert out["moments"]["eps0"] == 0.5


def test_optimize_tau_one(identity_files):
    d = identity_files
    assert run("optimize", d / "r.csv", d / "p.json", "--tau", 1, "--out", d / "o.json") == 0
    out = json.loads((d / "o.json").read_text())
    assert out["geometry"]["Delta"] == 0.0 and out["geometry"]["rho"] == 1.0
    assert out["solution"]["theta_plus"] is None


def test_optimize_errors(identity_files, tmp_path):
    d = identity_files
    assert run("optimize", d / "r.csv", d / "p.json", "--tau", 0.5, "--out", d / "o.json") == 1
    # p > N but all periods identical after centering: J singular
    save_params(AssetParameters([0.0, 0.0], [1.0, 1.0]), tmp_path / "z.json")
    write_returns_csv(np.zeros((2, 3)), tmp_path / "z.csv")
    assert run("optimize", tmp_path / "z.csv", tmp_path / "z.json", "--tau", 2, "--out", tmp_path / "o.json") == 2


def test_optimize_random_verify_and_round_trip(tmp_path):
    params = random_params(50, 4)
    save_params(params, tmp_path / "p.json")
    run("generate", tmp_path / "p.json", "--periods", 150, "--seed", 4, "--out", tmp_path / "r.csv")
    assert run("optimize", tmp_path / "r.csv", tmp_path / "p.json", "--tau", 3, "--verify",
               "--out", tmp_path / "o.json") == 0
    out = json.loads((tmp_path / "o.json").read_text())
    for key, a in out["geometry"].items():
        b = out["geometry_closed_form"][key]
        assert abs(a - b) <= 1e-8 * max(abs(a), abs(b))

    # reloading reproduces the in-memory values
    sol = PortfolioSolution.from_dict(out["solution"])
    assert json.loads(json.dumps(sol.to_dict())) == out["solution"]
    assert MomentSet.from_dict(out["moments"]).to_dict() == out["moments"]
    assert GeometryStats.from_dict(out["geometry"]).to_dict() == out["geometry"]

    first = (tmp_path / "o.json").read_bytes()
    run("optimize", tmp_path / "r.csv", tmp_path / "p.json", "--tau", 3, "--out", tmp_path / "o.json")
    assert (tmp_path / "o.json").read_bytes() == first


def test_frontier(identity_files):
    d = identity_files
    assert run("frontier", d / "r.csv", d / "p.json", "--rmin", 0, "--rmax", 4, "--points", 9,
               "--out", d / "f.csv") == 0
    lines = (d / "f.csv").read_text().splitlines()
    assert lines[0].startswith("# R1=2.0") and lines[1] == "R,eps"
    assert "2.0,0.5" in lines and "3.0,1.0" in lines
    assert run("frontier", d / "r.csv", d / "p.json", "--rmin", 4, "--rmax", 0, "--out", d / "f.csv") == 1


def test_replica(tmp_path):
    save_params(AssetParameters([1.0, 3.0], [1.0, 1.0]), tmp_path / "p.json")
    assert run("replica", tmp_path / "p.json", "--alpha", 3, "--out", tmp_path / "o.json") == 0
    out = json.loads((tmp_path / "o.json").read_text())
    assert out["g0"] == 0.5 and out["f0"] == 0.375 and out["alpha"] == 3.0
    assert run("replica", tmp_path / "p.json", "--alpha", 1, "--out", tmp_path / "o.json") == 1


def test_sweep(tmp_path):
    cfg = {"params": {"means": [1.0, 3.0], "variances": [1.0]}, "n_values": [20],
           "alpha_values": [2.0], "tau_values": [2.0], "trials": 5, "base_seed": 1,
           "family": "gaussian"}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert run("sweep", tmp_path / "c.json", "--out", tmp_path / "rep") == 0
    assert (tmp_path / "rep" / "convergence.csv").exists()
    rep = json.loads((tmp_path / "rep" / "convergence.json").read_text())
    assert rep["metadata"]["config"] == cfg
    cfg["alpha_values"] = [1.0]
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert run("sweep", tmp_path / "c.json", "--out", tmp_path / "rep") == 1


def test_module_entry_point(tmp_path):
    save_params(AssetParameters([1.0, 3.0], [1.0, 1.0]), tmp_path / "p.json")
    proc = subprocess.run(
        [sys.executable, "-m", "quenched_portfolio", "replica", str(tmp_path / "p.json"),
         "--alpha", "3", "--out", str(tmp_path / "o.json")],
        capture_output=True, text=True, env={"PRL_NUMBA": "0", "PATH": ""},
    )
    assert proc.returncode == 0, proc.stderr
    assert "g0=0.5" in proc.stdout
