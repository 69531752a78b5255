"""Self-checking suites run by the ``verify`` task.

Every check compares two independent computations of the same quantity on
the builtin models and records an :class:`Assertion`.  Names have the form
``suite.check[model]``; a tolerance override may name either the full
assertion or just ``suite.check`` to cover every model.
"""
from __future__ import annotations

import numpy as np

from .bands import compute_bands, hellmann_feynman_defect
from .config import SUITES
from .dynamics import (
    box_plan,
    energy_expectation,
    evolve,
    integral_identity_defect,
    torus_plan,
)
from .floquet import (
    fiber_matrices,
    floquet_transform,
    gauge_identity_defect,
    inverse_floquet_transform,
    theta_grid,
    verify_block_diagonalization,
)
from .lattice import (
    Box,
    LatticeState,
    Torus,
    apply_J,
    apply_P,
    positions,
    torus_matrix,
    validate,
)
from .models import free1d, free2d, random_periodic, ssh
from .reporting import Assertion
from .velocity import apply_Q, asymptotic_velocity, ballistic_report, q_moments


def _models(seed):
    return {
        "free1d": (free1d(), (8,)),
        "free2d": (free2d(), (4, 4)),
        "ssh(1,2)": (ssh(1, 2), (8,)),
        f"random_periodic(1,[3],{seed})": (random_periodic(1, [3], seed), (8,)),
        f"random_periodic(2,[2,2],{seed})": (random_periodic(2, [2, 2], seed), (4, 4)),
    }


def _random_state(rng, geometry):
    amp = rng.standard_normal(geometry.shape) + 1j * rng.standard_normal(geometry.shape)
    return LatticeState(geometry, amp / np.linalg.norm(amp))


class _Collector:
    def __init__(self, tolerances):
        self.tolerances = dict(tolerances or {})
        self.rows = []

    def check(self, name, measured, threshold, relation="<="):
        base = name.split("[", 1)[0]
        threshold = self.tolerances.get(name, self.tolerances.get(base, threshold))
        self.rows.append(Assertion(name, float(measured), float(threshold), relation))


def _operator_suite(out, seed):
    rng = np.random.default_rng(seed)
    for name, (op, N) in _models(seed).items():
        out.check(f"operator.valid[{name}]", len(validate(op).violations), 0)
        H = torus_matrix(op, N)
        out.check(f"operator.hermitian[{name}]", np.max(np.abs(H - H.conj().T)), 1e-14)
        psi = _random_state(rng, Torus(N, op.q))
        direct = apply_J(op, psi).vector()
        out.check(f"operator.stencil_vs_matrix[{name}]", np.linalg.norm(direct - H @ psi.vector()), 1e-12)
        # P_k = i[J, X_k] on a box, away from the faces
        box = Box((6,) * op.d)
        phi = _random_state(rng, box)
        for k in range(op.d):
            x = positions(phi, k)
            comm = 1j * (apply_J(op, phi.like(x * phi.amplitudes)).amplitudes - x * apply_J(op, phi).amplitudes)
            inner = tuple(slice(1, -1) for _ in range(op.d))
            err = np.max(np.abs(apply_P(op, phi, k).amplitudes[inner] - comm[inner]))
            out.check(f"operator.commutator[{name}, axis {k + 1}]", err, 1e-12)


def _floquet_suite(out, seed):
    rng = np.random.default_rng(seed)
    for name, (op, N) in _models(seed).items():
        psi = _random_state(rng, Torus(N, op.q))
        F = floquet_transform(psi)
        out.check(f"floquet.unitarity[{name}]", abs(F.norm() - psi.norm()), 1e-12)
        out.check(f"floquet.round_trip[{name}]", (inverse_floquet_transform(F) - psi).norm(), 1e-12)
        out.check(f"floquet.block_diagonalization[{name}]",
                  verify_block_diagonalization(op, N, seed=seed), 1e-10)
        for k in range(op.d):
            out.check(f"floquet.block_diagonalization[{name}, axis {k + 1}]",
                      verify_block_diagonalization(op, N, axis=k, seed=seed), 1e-10)
            thetas = rng.uniform(0, 1, size=(8, op.d))
            coarse = max(gauge_identity_defect(op, th, k, 1e-3) for th in thetas)
            fine = max(gauge_identity_defect(op, th, k, 5e-4) for th in thetas)
            out.check(f"floquet.gauge_identity[{name}, axis {k + 1}]", fine, 1e-5)
            if coarse > 1e-12:
                out.check(f"floquet.gauge_order[{name}, axis {k + 1}]", coarse / fine, 3.5, ">=")


def _bands_suite(out, seed):
    for name, (op, N) in _models(seed).items():
        bands = compute_bands(op, N)
        J = fiber_matrices(op, bands.thetas)
        V, E = bands.frames, bands.energies
        out.check(f"bands.eigen_residual[{name}]",
                  np.max(np.linalg.norm(J @ V - V * E[:, None, :], axis=1)), 1e-10)
        torus = np.sort(np.linalg.eigvalsh(torus_matrix(op, N)))
        out.check(f"bands.torus_spectrum[{name}]", np.max(np.abs(torus - np.sort(E.ravel()))), 1e-10)
        grid = theta_grid(N)
        for k in range(op.d):
            P = fiber_matrices(op, grid, axis=k)
            trace = np.real(np.einsum("mii->m", P))
            v = bands.velocities[k]
            out.check(f"bands.sum_rule[{name}, axis {k + 1}]", np.max(np.abs(v.sum(axis=1) - trace)), 1e-10)
            norm = np.max(np.linalg.norm(P, ord=2, axis=(1, 2)))
            out.check(f"bands.velocity_bound[{name}, axis {k + 1}]", norm / (2 * op.max_hopping), 1 + 1e-12)
            # Richardson-extrapolated differences, so the truncation error does not dominate
            out.check(f"bands.hellmann_feynman[{name}, axis {k + 1}]",
                      hellmann_feynman_defect(bands, k, 1e-3, extrapolate=True), 1e-6)


def _dynamics_suite(out, seed):
    rng = np.random.default_rng(seed)
    for name, (op, N) in _models(seed).items():
        plan = torus_plan(op, N)
        psi = _random_state(rng, plan.geometry)
        psi_t = evolve(plan, psi, 1.7)
        out.check(f"dynamics.unitarity[{name}]", abs(psi_t.norm() - 1.0), 1e-12)
        out.check(f"dynamics.energy_conservation[{name}]",
                  abs(energy_expectation(op, psi_t) - energy_expectation(op, psi)), 1e-10)
        # spectral torus evolution against the dense matrix exponential
        w, U = np.linalg.eigh(torus_matrix(op, N))
        dense = U @ (np.exp(-1.7j * w) * (U.conj().T @ psi.vector()))
        out.check(f"dynamics.torus_vs_dense[{name}]", np.linalg.norm(psi_t.vector() - dense), 1e-10)
        if op.d == 1:
            bplan = box_plan(op, (60,))
            start = LatticeState.delta(bplan.geometry)
            out.check(f"dynamics.integral_identity[{name}]",
                      integral_identity_defect(bplan, start, 0, 5.0, 0.005), 1e-8)
            out.check(f"dynamics.box_unitarity[{name}]", abs(evolve(bplan, start, 5.0).norm() - 1.0), 1e-12)


def _velocity_suite(out, seed):
    op = free1d()
    av = asymptotic_velocity(op, (16,))
    psi = LatticeState.delta(av.torus)
    mean, second = q_moments(av, psi, 0)
    out.check("velocity.q_mean[free1d]", abs(mean), 1e-10)
    out.check("velocity.q_second_moment[free1d]", abs(second - 2.0), 1e-10)
    rep = ballistic_report(op, None, 0, [10.0], (64,))
    out.check("velocity.free_exact[free1d]", rep.rows[0].strong_error, 1e-8)

    av2 = asymptotic_velocity(free2d(), (8, 8))
    psi2 = LatticeState.delta(av2.torus)
    for k in range(2):
        _, second = q_moments(av2, psi2, k)
        out.check(f"velocity.q_second_moment[free2d, axis {k + 1}]", abs(second - 2.0), 1e-10)

    rp = random_periodic(1, [3], seed)
    av3 = asymptotic_velocity(rp, (8,))
    phi = _random_state(np.random.default_rng(seed), av3.torus)
    Qphi = apply_Q(av3, phi, 0)
    out.check(f"velocity.q_symmetric[random_periodic(1,[3],{seed})]",
              abs(phi.vdot(apply_Q(av3, Qphi, 0)) - Qphi.vdot(Qphi)), 1e-12)

    rep = ballistic_report(ssh(1, 2), None, 0, [10.0, 20.0, 40.0], (256,))
    out.check("velocity.strong_error_ratio[ssh(1,2)]", np.max(rep.ratios()), 1.0, "<")
    out.check("velocity.q_tail_mass[ssh(1,2)]", rep.q_tail_mass, 1e-10)


_SUITES = {
    "operator": _operator_suite,
    "floquet": _floquet_suite,
    "bands": _bands_suite,
    "dynamics": _dynamics_suite,
    "velocity": _velocity_suite,
}


def run_suites(suites=SUITES, seeds=(0,), tolerances=None) -> list:
    """Run the named suites once per seed and return their assertions in a fixed order."""
    unknown = [s for s in suites if s not in _SUITES]
    if unknown:
        raise ValueError(f"unknown verify suites {unknown}; known: {', '.join(SUITES)}")
    out = _Collector(tolerances)
    for seed in seeds:
        for suite in suites:
            start = len(out.rows)
            _SUITES[suite](out, int(seed))
            if len(seeds) > 1:
                for a in out.rows[start:]:
                    a.name = f"{a.name}@seed{seed}"
    return out.rows
