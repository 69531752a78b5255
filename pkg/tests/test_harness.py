import json

import numpy as np
import pytest

from periodic_jacobi.config import parse_config
from periodic_jacobi.errors import BoundaryContamination, RadiusTooLarge
from periodic_jacobi.harness import OUTPUT_ENV, random_state, resolve_output_dir, run
from periodic_jacobi.lattice import Box, Torus
from periodic_jacobi.reporting import Assertion
from periodic_jacobi.verify import run_suites


def test_random_state_deterministic_and_normalised():
    a = random_state(7, Box(6), 3)
    b = random_state(7, Box(6), 3)
    assert np.array_equal(a.amplitudes, b.amplitudes)
    assert abs(a.norm() - 1) <= 1e-14
    assert (a - random_state(8, Box(6), 3)).norm() > 0.1


def test_random_state_support_is_l1_ball():
    psi = random_state(0, Box((4, 4)), 2)
    x, y = Box((4, 4)).coords()
    assert np.all(psi.amplitudes[np.abs(x) + np.abs(y) > 2] == 0)
    assert np.all(psi.amplitudes[np.abs(x) + np.abs(y) <= 2] != 0)


def test_random_state_on_torus_and_too_large():
    assert random_state(1, Torus(4, 2), 3).norm() == pytest.approx(1)
    with pytest.raises(RadiusTooLarge):
        random_state(0, Box(3), 4)
    with pytest.raises(RadiusTooLarge):
        random_state(0, Torus(3, 1), 2)


def test_assertion_rows():
    a = Assertion("x", 0.5, 1.0)
    assert a.verdict and a.row()[-1] == "pass"
    assert not Assertion("y", float("nan"), 1.0).verdict
    assert Assertion("z", 3.0, 2.0, ">=").verdict


def test_bands_run_writes_closed_form(tmp_path):
    cfg = parse_config("d: 1\nq: [1]\ntask: {kind: bands, N: [8]}")
    report = run(cfg, tmp_path)
    assert report.passed
    rows = (tmp_path / "bands.csv").read_text().splitlines()
    assert len(rows) == 9
    E = [float(r.split(",")[2]) for r in rows[1:]]
    assert np.allclose(E, 2 * np.cos(2 * np.pi * np.arange(8) / 8), atol=1e-14)
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["task"] == "bands"
    assert all(set(a) == {"name", "measured", "threshold", "relation", "verdict"} for a in data["assertions"])
    assert "wall_time" not in data


def test_evolve_box_and_torus(tmp_path):
    box = parse_config("""
model: 'ssh(1,2)'
task:
  kind: evolve
  geometry: {kind: box, L: [60]}
  state: {kind: random, radius: 2}
  times: [0, 2, 4]
""")
    report = run(box, tmp_path / "b")
    assert report.passed
    header = (tmp_path / "b" / "trace.csv").read_text().splitlines()[0]
    assert header == "t,mean_X_1,mean_X_over_t_1,second_moment,boundary_mass,p_expectation_1"
    torus = parse_config("""
model: free1d
task:
  kind: evolve
  geometry: {kind: torus, N: [16]}
  times: [0, 3, 30]
""")
    report = run(torus, tmp_path / "t")
    lines = (tmp_path / "t" / "trace.csv").read_text().splitlines()
    assert all(abs(float(line.split(",")[1])) < 1e-12 for line in lines[1:])


def test_evolve_box_too_small(tmp_path):
    cfg = parse_config("""
model: free1d
task:
  kind: evolve
  geometry: {kind: box, L: [10]}
  times: [1, 20]
""")
    with pytest.raises(BoundaryContamination):
        run(cfg, tmp_path)


def test_velocity_run_on_ssh(tmp_path):
    cfg = parse_config("""
model: 'ssh(1,2)'
task: {kind: velocity, N: [256], times: [10, 20, 40]}
""")
    report = run(cfg, tmp_path)
    assert report.passed
    lines = (tmp_path / "velocity_axis1.csv").read_text().splitlines()
    errs = [float(line.split(",")[1]) for line in lines[1:]]
    assert errs[0] > errs[1] > errs[2]


def test_verify_floquet_suite_passes(tmp_path):
    report = run(parse_config("task: {kind: verify, suites: [floquet], seeds: [0]}"), tmp_path)
    assert report.passed
    names = [a.name for a in report.assertions]
    assert any(n.startswith("floquet.unitarity") for n in names)
    assert any(n.startswith("floquet.block_diagonalization") for n in names)


def test_verify_tolerance_override():
    rows = run_suites(["bands"], (0,), {"bands.eigen_residual": 1e-300})
    assert not all(a.verdict for a in rows if a.name.startswith("bands.eigen_residual"))
    assert all(a.threshold == 1e-300 for a in rows if a.name.startswith("bands.eigen_residual"))


def test_output_precedence(tmp_path, monkeypatch):
    cfg = parse_config(f"model: free1d\noutput: {tmp_path / 'cfg'}\ntask: {{kind: bands, N: [4]}}")
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    assert resolve_output_dir(cfg) == tmp_path / "cfg"
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert resolve_output_dir(cfg) == tmp_path / "env"
    assert resolve_output_dir(cfg, tmp_path / "cli") == tmp_path / "cli"


def test_threads_do_not_change_outputs(tmp_path):
    text = "model: 'random_periodic(2,[2,2],3)'\ntask: {kind: bands, N: [12, 12]}\n"
    run(parse_config(text), tmp_path / "a", threads=1)
    run(parse_config(text), tmp_path / "b", threads=4)
    assert (tmp_path / "a" / "bands.csv").read_bytes() == (tmp_path / "b" / "bands.csv").read_bytes()


def test_identical_runs_are_byte_identical(tmp_path):
    text = """
model: 'random_periodic(1,[3],2)'
seed: 11
task:
  kind: evolve
  geometry: {kind: torus, N: [8]}
  state: {kind: random, radius: 3}
  times: [0, 1, 2]
"""
    run(parse_config(text), tmp_path / "a")
    run(parse_config(text), tmp_path / "b")
    for name in ("trace.csv", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
