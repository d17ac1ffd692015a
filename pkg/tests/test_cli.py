import io
import json

import numpy as np
import pytest

from cspkit.cli import run_cli


def run(*argv):
    out = io.StringIO()
    code = run_cli(list(argv), out=out)
    return code, out.getvalue()


def test_sweep_manifold_error_q1():
    code, text = run("sweep", "--exp", "manifold_error", "--q", "1", "--grid-min", "0.5", "--grid-nodes", "16")
    assert code == 0
    lines = text.splitlines()
    assert lines[0] == "eps,metric"
    assert len(lines) == 9
    slope = float(lines[-1].split("slope=")[1].split()[0])
    assert lines[-1].startswith("PASS") and slope >= 1.8


def test_sweep_failure_exit_code():
    # one_step refines the manifold but leaves the fast columns, so fiber rates stay at q=0
    code, text = run("sweep", "--exp", "manifold_error", "--q", "1", "--mode", "one_step",
                     "--eps", "0.03,0.01,0.003,0.001,0.0003", "--grid-nodes", "8", "--grid-min", "0.5")
    assert code == 0  # one_step keeps the manifold rate
    code, text = run("sweep", "--exp", "fiber_angle", "--q", "1", "--mode", "one_step", "--grid-nodes", "8",
                     "--grid-min", "0.5")
    assert code == 1
    assert text.splitlines()[-1].startswith("FAIL")


def test_validate_mmh(tmp_path):
    path = tmp_path / "v.json"
    code, text = run("validate-mmh", "--json", str(path))
    assert code == 0
    assert len(json.loads(path.read_text())) == 2
    assert all(line.startswith("PASS") for line in text.splitlines())


def test_manifold_eps0_is_h0(tmp_path):
    path = tmp_path / "m.csv"
    code, _ = run("manifold", "--system", "mmh", "--q", "0", "--eps", "0", "--out", str(path))
    assert code == 0
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.allclose(data[:, 1], data[:, 0] / (data[:, 0] + 1), atol=1e-15)


def test_bit_identical_output(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert run("sweep", "--exp", "fiber_angle", "--q", "1", "--grid-nodes", "8", "--out", str(p))[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("q = 2\ngrid.min = 0.5\ngrid.nodes = 16\neps.list = 0.03, 0.01, 0.003, 0.001, 0.0003\n")
    code, text = run("sweep", "--exp", "manifold_error", "--config", str(cfg))
    assert code == 0
    assert "q=2" in text.splitlines()[-1]
    assert len(text.splitlines()) == 7


def test_fibers_and_project(tmp_path):
    code, text = run("fibers", "--eps", "0.01", "--q", "1", "--grid-nodes", "5")
    assert code == 0 and len(text.splitlines()) == 5
    out = tmp_path / "p.json"
    code, text = run("project", "--x0", "1,0.7", "--eps", "0.01", "--q", "1", "--oracle", "--horizon", "1",
                     "--out", str(out))
    assert code == 0
    record = json.loads(out.read_text())
    assert record["scheme"] == "fiber_search" and record["slow_phase_error"] < 1e-4


def test_project_wrong_dimension():
    code, _ = run("project", "--x0", "1,0.7,3", "--eps", "0.01")
    assert code == 1


def test_report(tmp_path):
    path = tmp_path / "r.json"
    run("sweep", "--exp", "manifold_error", "--q", "0", "--grid-nodes", "8", "--json", str(path))
    code, text = run("report", str(path))
    assert code == 0
    assert "manifold_error" in text and "PASS" in text
    bad = json.loads(path.read_text())
    bad["pass"] = False
    path.write_text(json.dumps(bad))
    assert run("report", str(path))[0] == 1


@pytest.mark.parametrize("argv", [
    ["sweep"],
    ["sweep", "--exp", "manifold_error", "--bogus"],
    ["frobnicate"],
    ["manifold", "--q", "x", "--eps", "0"],
    [],
])
def test_usage_errors(argv, capsys):
    assert run(*argv)[0] == 2


def test_bad_eps_window():
    assert run("sweep", "--exp", "manifold_error", "--eps", "0.5,0.1,0.01,0.001,0.0001")[0] == 2
