"""Task orchestration, seeded random states and result files."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from pathlib import Path

import numpy as np

from .bands import compute_bands, spectrum_intervals, write_bands_csv
from .config import BandsTask, EvolveTask, ExperimentConfig, VelocityTask, VerifyTask, config_to_dict
from .dynamics import (
    BOUNDARY_THRESHOLD,
    box_plan,
    boundary_mass,
    energy_expectation,
    evolve,
    p_expectation,
    position_moments,
    torus_plan,
    unwrapped_position_trace,
)
from .errors import BoundaryContamination, RadiusTooLarge
from .floquet import fiber_matrices
from .lattice import Box, LatticeState
from .reporting import Assertion, RunReport
from .velocity import ballistic_report
from .verify import run_suites

log = logging.getLogger(__name__)

OUTPUT_ENV = "PERIODIC_JACOBI_OUT"


def random_state(seed: int, geometry, radius: int) -> LatticeState:
    """Normalised complex Gaussian amplitudes on the l1 ball of ``radius`` about the origin.

    Draws come from PCG64 seeded with ``seed`` in row-major site order, so a
    given numpy version produces the same state on every platform.
    """
    if isinstance(geometry, Box):
        fits = radius <= min(geometry.L)
    else:
        fits = 2 * radius + 1 <= min(geometry.shape)
    if radius < 0 or not fits:
        raise RadiusTooLarge(f"support radius {radius} does not fit {geometry}")
    l1 = sum(np.abs(c) for c in geometry.coords())
    mask = l1 <= radius
    rng = np.random.Generator(np.random.PCG64(seed))
    z = rng.standard_normal((2, int(mask.sum())))
    amp = np.zeros(geometry.shape, dtype=complex)
    amp[mask] = z[0] + 1j * z[1]
    amp /= np.sqrt(np.sum(np.abs(amp) ** 2))
    return LatticeState(geometry, amp)


def make_state(spec, geometry, seed):
    if spec.kind == "delta":
        return LatticeState.delta(geometry, spec.site)
    return random_state(seed, geometry, spec.radius)


def _fmt(x):
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# --------------------------------------------------------------------------
# tasks


def _run_bands(op, task: BandsTask, out: Path, report: RunReport, threads: int):
    bands = compute_bands(op, task.N, threads=threads)
    write_bands_csv(bands, out / "bands.csv")
    report.files.append("bands.csv")
    iv = spectrum_intervals(bands)
    report.results["band_intervals"] = [list(b) for b in iv.bands]
    report.results["spectrum"] = [list(b) for b in iv.union]

    J = fiber_matrices(op, bands.thetas)
    V, E = bands.frames, bands.energies
    residual = float(np.max(np.linalg.norm(J @ V - V * E[:, None, :], axis=1)))
    report.assertions.append(Assertion("bands.eigen_residual", residual, 1e-10))
    report.assertions.append(Assertion("bands.ascending", float(np.max(-np.diff(E, axis=1), initial=0.0)), 0.0))
    bound = 2 * op.max_hopping
    for k in range(op.d):
        P = fiber_matrices(op, bands.thetas, axis=k)
        trace = np.real(np.einsum("mii->m", P))
        v = bands.velocities[k]
        report.assertions.append(Assertion(f"bands.sum_rule[axis {k + 1}]", float(np.max(np.abs(v.sum(axis=1) - trace))), 1e-10))
        report.assertions.append(Assertion(f"bands.velocity_bound[axis {k + 1}]", float(np.max(np.abs(v)) / bound), 1 + 1e-12))


def _run_evolve(op, task: EvolveTask, out: Path, report: RunReport, seed: int):
    d = op.d
    if task.geometry == "box":
        plan = box_plan(op, task.size, task.times)
    else:
        plan = torus_plan(op, task.size, task.times)
    psi = make_state(task.state, plan.geometry, seed)
    energy0 = energy_expectation(op, psi)
    traces = None
    if task.geometry == "torus":
        traces = [unwrapped_position_trace(op, plan, psi, k, task.times, task.h) for k in range(d)]
    rows, norm_err, energy_err = [], 0.0, 0.0
    for i, t in enumerate(task.times):
        psi_t = evolve(plan, psi, t)
        norm_err = max(norm_err, abs(psi_t.norm() - psi.norm()))
        energy_err = max(energy_err, abs(energy_expectation(op, psi_t) - energy0))
        if task.geometry == "box":
            moments = [position_moments(psi_t, k) for k in range(d)]
            means = [m[0] for m in moments]
            second = sum(m[1] for m in moments)
            mass = boundary_mass(psi_t)
            if mass > BOUNDARY_THRESHOLD * psi.norm() ** 2:
                raise BoundaryContamination(
                    f"boundary mass {mass:.3e} at t={t} exceeds {BOUNDARY_THRESHOLD:.0e}; enlarge the box"
                )
        else:
            means = [traces[k][i] for k in range(d)]
            second, mass = None, 0.0
        over_t = [m / t if t != 0 else None for m in means]
        ps = [p_expectation(op, psi_t, k) for k in range(d)]
        rows.append([_fmt(t)] + [_fmt(m) for m in means] + [_fmt(m) for m in over_t]
                    + [_fmt(second), _fmt(mass)] + [_fmt(p) for p in ps])
    header = (["t"] + [f"mean_X_{k + 1}" for k in range(d)] + [f"mean_X_over_t_{k + 1}" for k in range(d)]
              + ["second_moment", "boundary_mass"] + [f"p_expectation_{k + 1}" for k in range(d)])
    _write_rows(out / "trace.csv", header, rows)
    report.files.append("trace.csv")
    report.assertions.append(Assertion("evolve.unitarity", norm_err, 1e-10))
    report.assertions.append(Assertion("evolve.energy_conservation", energy_err, 1e-10))


def _run_velocity(op, task: VelocityTask, out: Path, report: RunReport, seed: int, threads: int):
    if task.state.kind == "delta":
        reach = int(sum(abs(s) for s in task.state.site))
    else:
        reach = task.state.radius
    start = make_state(task.state, Box((reach,) * op.d), seed)
    for axis in task.axes:
        rep = ballistic_report(op, start, axis - 1, task.times, task.N, task.L, threads=threads)
        name = f"velocity_axis{axis}.csv"
        rep.write_csv(out / name)
        report.files.append(name)
        report.results[f"axis_{axis}"] = {
            "box_L": list(rep.box.L),
            "q_mean": rep.rows[0].q_mean,
            "q_second_moment": rep.rows[0].q_second_moment,
            "q_tail_mass": rep.q_tail_mass,
            "strong_error_ratios": [float(r) for r in rep.ratios()],
        }
        if len(rep.rows) > 1:
            report.assertions.append(Assertion(f"velocity.strong_error_decreasing[axis {axis}]",
                                               float(np.max(rep.ratios())), 1.0, "<"))
        report.assertions.append(Assertion(f"velocity.q_tail_mass[axis {axis}]", rep.q_tail_mass, 1e-10))


def _run_verify(task: VerifyTask, out: Path, report: RunReport):
    assertions = run_suites(task.suites, task.seeds, dict(task.tolerances))
    report.assertions.extend(assertions)
    _write_rows(out / "verify.csv", ["name", "measured", "relation", "threshold", "verdict"],
                [a.row() for a in assertions])
    report.files.append("verify.csv")


def resolve_output_dir(config: ExperimentConfig, out_dir=None) -> Path:
    """``--out`` beats the environment variable, which beats the config file."""
    if out_dir is not None:
        return Path(out_dir)
    if os.environ.get(OUTPUT_ENV):
        return Path(os.environ[OUTPUT_ENV])
    return Path(config.output)


def run(config: ExperimentConfig, out_dir=None, threads=None) -> RunReport:
    """Execute the configured task, write its files plus ``report.json``, and return the report."""
    started = time.perf_counter()
    out = resolve_output_dir(config, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    threads = config.threads if threads is None else threads
    task = config.task
    report = RunReport(task.kind, config_to_dict(config))
    op = config.operator.build() if config.operator is not None else None
    log.info("running %s task into %s", task.kind, out)
    if isinstance(task, BandsTask):
        _run_bands(op, task, out, report, threads)
    elif isinstance(task, EvolveTask):
        _run_evolve(op, task, out, report, config.seed)
    elif isinstance(task, VelocityTask):
        _run_velocity(op, task, out, report, config.seed, threads)
    else:
        _run_verify(task, out, report)
    with open(out / "report.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    report.wall_time = time.perf_counter() - started
    return report
