import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from periodic_jacobi.bands import (
    band_velocity,
    compute_bands,
    finite_difference_velocities,
    hellmann_feynman_defect,
    hermitian_eigendecomposition,
    isolation_gaps,
    kernel_mass_estimate,
    spectrum_intervals,
    write_bands_csv,
)
from periodic_jacobi.errors import NotHermitian
from periodic_jacobi.floquet import fiber_matrices
from periodic_jacobi.lattice import PeriodicJacobiOperator, torus_matrix
from periodic_jacobi.models import free1d, free2d, random_periodic, ssh

from conftest import operators


def test_eigendecomposition_identity():
    E, V = hermitian_eigendecomposition(np.eye(2))
    assert np.allclose(E, [1, 1])
    assert np.allclose(V @ np.diag(E) @ V.conj().T, np.eye(2))


def test_eigendecomposition_pauli_x():
    E, _ = hermitian_eigendecomposition(np.array([[0, 1], [1, 0]]))
    assert np.allclose(E, [-1, 1])


def test_eigendecomposition_round_trip():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    A = B + B.conj().T
    E, V = hermitian_eigendecomposition(A)
    assert np.all(np.diff(E) >= 0)
    assert np.allclose(V @ np.diag(E) @ V.conj().T, A, atol=1e-10)
    assert np.allclose(V.conj().T @ V, np.eye(6), atol=1e-12)


def test_eigendecomposition_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        hermitian_eigendecomposition(np.array([[0, 1], [0, 0]]))


def test_free_bands_closed_form():
    b = compute_bands(free1d(), 8)
    n = np.arange(8)
    assert np.allclose(b.energies[:, 0], 2 * np.cos(2 * np.pi * n / 8), atol=1e-14)
    assert np.allclose(b.velocities[0][:, 0], -2 * np.sin(2 * np.pi * n / 8), atol=1e-14)


def test_free_velocity_at_quarter():
    b = compute_bands(free1d(), 4)
    assert b.velocities[0][1, 0] == pytest.approx(-2)
    fd = finite_difference_velocities(free1d(), [[0.25]], 0, 1e-4)
    assert fd[0, 0] == pytest.approx(-2, abs=1e-6)


def test_free2d_separable():
    b = compute_bands(free2d(), (6, 6))
    th = b.thetas
    assert np.allclose(b.energies[:, 0], 2 * np.cos(2 * np.pi * th[:, 0]) + 2 * np.cos(2 * np.pi * th[:, 1]))
    iv = spectrum_intervals(b)
    assert iv.union[0] == pytest.approx((-4, 4))


def test_spectrum_intervals_free_and_ssh():
    assert spectrum_intervals(compute_bands(free1d(), 256)).union[0] == pytest.approx((-2, 2), abs=1e-8)
    iv = spectrum_intervals(compute_bands(ssh(1, 2), 256))
    assert np.allclose(iv.bands, [(-3, -1), (1, 3)], atol=1e-8)
    assert len(iv.union) == 2


def test_potential_shift_moves_intervals():
    shifted = PeriodicJacobiOperator.from_arrays((1,), [[1.0]], [5.0])
    a = spectrum_intervals(compute_bands(free1d(), 32))
    b = spectrum_intervals(compute_bands(shifted, 32))
    assert np.allclose(np.array(b.bands) - np.array(a.bands), 5, atol=1e-13)


def test_ssh_velocity_matches_finite_difference_at_gap():
    b = compute_bands(ssh(1, 2), 8)
    fd = finite_difference_velocities(ssh(1, 2), b.thetas, 0, 1e-4)
    assert np.max(np.abs(b.velocities[0] - fd)) < 1e-6


def test_time_reversal_odd_velocities():
    op = random_periodic(1, [3], 5)
    real = PeriodicJacobiOperator.from_arrays(op.q, np.abs(op.hoppings), op.potential)
    b = compute_bands(real, 16)
    v = b.velocities[0]
    reflected = (-np.arange(16)) % 16
    assert np.allclose(v, -v[reflected], atol=1e-12)


def test_degenerate_cluster_diagonalises_P():
    # free chain written with period 2: bands cross at theta = 1/2
    op = PeriodicJacobiOperator.from_arrays((2,), [[1.0], [1.0]], [0, 0])
    b = compute_bands(op, 4)
    m = 2
    assert np.isclose(b.energies[m, 0], b.energies[m, 1])
    P = fiber_matrices(op, b.thetas[m:m + 1], axis=0)[0]
    assert np.allclose(np.sort(np.linalg.eigvalsh(P)), b.velocities[0][m])
    assert np.all(np.diff(b.velocities[0][m]) >= 0)
    F = b.velocity_frames[0][m]
    assert np.allclose(F.conj().T @ P @ F, np.diag(b.velocities[0][m]), atol=1e-12)


def test_band_velocity_nondegenerate_is_diagonal():
    E = np.array([-1.0, 1.0])
    V = np.eye(2)
    P = np.array([[0.3, 0.5], [0.5, -0.2]])
    v, F = band_velocity(E, V, P, 1e-8)
    assert np.allclose(v, [0.3, -0.2])
    assert np.array_equal(F, V)


def test_kernel_mass_examples():
    b = compute_bands(free1d(), 1024)
    assert kernel_mass_estimate(b, 0, 1e-3) < 0.01
    assert kernel_mass_estimate(b, 0, 2.1) == 1
    s = compute_bands(ssh(1, 2), 4096)
    assert kernel_mass_estimate(s, 0, 1e-6) <= 1e-3


def test_isolation_gaps():
    g = isolation_gaps(np.array([[0.0, 1.0, 3.0]]))
    assert np.allclose(g, [[1, 1, 2]])
    assert np.isinf(isolation_gaps(np.zeros((2, 1)))).all()


def test_hellmann_feynman_extrapolated():
    b = compute_bands(random_periodic(1, [3]), 16)
    assert hellmann_feynman_defect(b, 0, 1e-3, extrapolate=True) < 1e-8


def test_grid_must_be_at_least_two():
    with pytest.raises(ValueError):
        compute_bands(free1d(), 1)


def test_threads_do_not_change_results():
    op = random_periodic(2, [2, 2], 1)
    a = compute_bands(op, (8, 8))
    b = compute_bands(op, (8, 8), threads=3)
    assert np.array_equal(a.energies, b.energies)
    assert np.array_equal(a.velocities[0], b.velocities[0])


def test_bands_csv(tmp_path):
    b = compute_bands(free2d(), (2, 3))
    write_bands_csv(b, tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "theta_1,theta_2,j,E,v_1,v_2"
    assert len(lines) == 1 + 6


@settings(max_examples=25, deadline=None)
@given(op=operators(), n=st.integers(2, 5))
def test_band_invariants(op, n):
    N = (n,) * op.d
    b = compute_bands(op, N)
    J = fiber_matrices(op, b.thetas)
    V, E = b.frames, b.energies
    assert np.all(np.diff(E, axis=1) >= 0)
    assert np.max(np.linalg.norm(J @ V - V * E[:, None, :], axis=1)) <= 1e-10
    torus = np.sort(np.linalg.eigvalsh(torus_matrix(op, N)))
    assert np.allclose(torus, np.sort(E.ravel()), atol=1e-10)
    bound = 2 * op.max_hopping
    for k in range(op.d):
        v = b.velocities[k]
        assert v.dtype == float
        assert np.max(np.abs(v)) <= bound * (1 + 1e-12)
        trace = np.real(np.einsum("mii->m", fiber_matrices(op, b.thetas, axis=k)))
        assert np.allclose(v.sum(axis=1), trace, atol=1e-10)
        if op.q[k] >= 2:
            assert np.allclose(trace, 0, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(op=operators(max_d=1, max_q=3))
def test_hellmann_feynman_away_from_clusters(op):
    b = compute_bands(op, 12)
    gap_ok = isolation_gaps(b.energies) > 10 * max(b.degeneracy_tol, 1e-3)
    fd_coarse = finite_difference_velocities(op, b.thetas, 0, 1e-3)
    fd_fine = finite_difference_velocities(op, b.thetas, 0, 5e-4)
    v = b.velocities[0]
    # difference quotients converge to the HF velocity at second order
    err_c = np.abs(v - fd_coarse)[gap_ok]
    err_f = np.abs(v - fd_fine)[gap_ok]
    assert np.all(err_f <= np.maximum(1e-6, err_c / 3.5))


def test_eigenvalue_continuity_lipschitz():
    op = random_periodic(1, [3], 2)
    # |dE/dtheta| <= ||dJ/dtheta|| <= 2 pi * 2 max|a| / q
    for n in (16, 64, 256):
        b = compute_bands(op, n)
        jumps = np.max(np.abs(np.diff(np.vstack([b.energies, b.energies[:1]]), axis=0)))
        assert jumps <= 2 * np.pi * 2 * op.max_hopping / op.q[0] / n * (1 + 1e-9)
