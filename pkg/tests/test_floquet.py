import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from periodic_jacobi.errors import IncommensurateTorus, InvalidAxis
from periodic_jacobi.floquet import (
    FiberField,
    fiber_hamiltonian,
    fiber_matrices,
    fiber_velocity,
    floquet_transform,
    gauge_identity_defect,
    gauge_matrix,
    gauged_fiber,
    inverse_floquet_transform,
    theta_grid,
    verify_block_diagonalization,
)
from periodic_jacobi.lattice import LatticeState, PeriodicJacobiOperator, Torus
from periodic_jacobi.models import free1d, random_periodic, ssh

from conftest import operators, random_state


def test_theta_grid_row_major():
    g = theta_grid((2, 3))
    assert g.shape == (6, 2)
    assert np.allclose(g[1], [0, 1 / 3]) and np.allclose(g[3], [0.5, 0])


@pytest.mark.parametrize("theta, value", [(0, 2), (0.25, 0), (0.5, -2)])
def test_free_fiber_hamiltonian(theta, value):
    assert fiber_hamiltonian(free1d(), theta).matrix[0, 0] == pytest.approx(value, abs=1e-15)


@pytest.mark.parametrize("theta", np.linspace(0, 1, 11))
def test_ssh_fiber_eigenvalues(theta):
    E = np.linalg.eigvalsh(fiber_hamiltonian(ssh(1, 2), theta).matrix)
    r = np.sqrt(5 + 4 * np.cos(2 * np.pi * theta))
    assert np.allclose(E, [-r, r], atol=1e-14)


def test_ssh_fiber_endpoints():
    assert np.allclose(np.linalg.eigvalsh(fiber_hamiltonian(ssh(), 0).matrix), [-3, 3])
    assert np.allclose(np.linalg.eigvalsh(fiber_hamiltonian(ssh(), 0.5).matrix), [-1, 1])


@pytest.mark.parametrize("theta", np.linspace(0, 1, 9))
def test_free_fiber_velocity(theta):
    assert fiber_velocity(free1d(), theta, 0).matrix[0, 0] == pytest.approx(-2 * np.sin(2 * np.pi * theta), abs=1e-14)


def test_free_fiber_velocity_quarter_and_zero():
    assert fiber_velocity(free1d(), 0.25, 0).matrix[0, 0] == pytest.approx(-2)
    assert fiber_velocity(free1d(), 0.0, 0).matrix[0, 0] == pytest.approx(0, abs=1e-15)


def test_fiber_velocity_invalid_axis():
    with pytest.raises(InvalidAxis):
        fiber_velocity(ssh(), 0.1, 1)


def test_gauge_matrix_examples():
    op = PeriodicJacobiOperator.from_arrays((2,), [[1.0], [1.0]], [0, 0])
    assert np.allclose(gauge_matrix(op, 0.5), np.diag([1, 1j]))
    assert np.allclose(gauge_matrix(op, 0.0), np.eye(2))
    M = gauge_matrix(random_periodic(2, [2, 3]), [0.3, 0.7])
    assert np.allclose(M @ M.conj().T, np.eye(6), atol=1e-14)


def test_gauged_free_fiber():
    Jt, Pt = gauged_fiber(free1d(), 0.1, 0)
    assert Jt[0, 0] == pytest.approx(2 * np.cos(0.2 * np.pi))
    assert Pt[0, 0] == pytest.approx(-2 * np.sin(0.2 * np.pi))


@pytest.mark.parametrize("op", [ssh(1, 2), random_periodic(1, [3]), random_periodic(2, [2, 3], 4)])
def test_gauge_identity_second_order(op):
    rng = np.random.default_rng(1)
    for theta in rng.uniform(size=(10, op.d)):
        for k in range(op.d):
            coarse = gauge_identity_defect(op, theta, k, 1e-3)
            fine = gauge_identity_defect(op, theta, k, 5e-4)
            assert fine < 1e-5
            if coarse > 1e-11:
                assert 3.5 <= coarse / fine <= 4.5


def test_gauge_identity_across_seam():
    assert gauge_identity_defect(ssh(), 0.0, 0, 1e-3) < 1e-5


def test_delta_transform_is_flat():
    field = floquet_transform(LatticeState.delta(Torus(4, 1)))
    assert np.allclose(field.values, 0.5)


def test_transform_sign_convention():
    """F(theta) = N^{-1/2} sum_m psi_{x+mq} e^{-2 pi i theta m}."""
    torus = Torus(5, 2)
    psi = random_state(torus, np.random.default_rng(3))
    field = floquet_transform(psi)
    cells = psi.amplitudes.reshape(5, 2)
    for n, theta in enumerate(field.thetas):
        expected = cells.T @ np.exp(-2j * np.pi * theta[0] * np.arange(5)) / np.sqrt(5)
        assert np.allclose(field.values[n], expected)


def test_incommensurate_torus():
    with pytest.raises(IncommensurateTorus):
        floquet_transform(LatticeState.delta(Torus(3, 1)), q=(2,))


@settings(max_examples=25, deadline=None)
@given(op=operators(), seed=st.integers(0, 10**6), n=st.integers(1, 4))
def test_transform_unitary_and_invertible(op, seed, n):
    psi = random_state(Torus((n,) * op.d, op.q), np.random.default_rng(seed))
    field = floquet_transform(psi)
    assert abs(field.norm() - psi.norm()) <= 1e-12
    assert (inverse_floquet_transform(field) - psi).norm() <= 1e-12


@settings(max_examples=25, deadline=None)
@given(op=operators(), seed=st.integers(0, 10**6))
def test_fibers_hermitian_and_periodic(op, seed):
    thetas = np.random.default_rng(seed).uniform(-1, 1, size=(5, op.d))
    J = fiber_matrices(op, thetas)
    assert np.max(np.abs(J - J.conj().transpose(0, 2, 1))) < 1e-12
    for j in range(op.d):
        shifted = thetas.copy()
        shifted[:, j] += 1
        assert np.allclose(fiber_matrices(op, shifted), J, atol=1e-12)
    for k in range(op.d):
        P = fiber_matrices(op, thetas, axis=k)
        assert np.max(np.abs(P - P.conj().transpose(0, 2, 1))) < 1e-12


@settings(max_examples=20, deadline=None)
@given(op=operators(), seed=st.integers(0, 10**6))
def test_fiber_entries_are_degree_one_trigonometric(op, seed):
    """Sampling theta_j on 3 points determines the entries; a 4th sample must agree."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(size=op.d)
    j = int(rng.integers(op.d))
    ts = np.array([0.0, 1 / 3, 2 / 3, rng.uniform()])
    thetas = np.repeat(base[None], 4, axis=0)
    thetas[:, j] = ts
    vals = fiber_matrices(op, thetas).reshape(4, -1)
    basis = np.exp(2j * np.pi * np.outer(ts, [-1, 0, 1]))
    coef = np.linalg.solve(basis[:3], vals[:3])
    assert np.allclose(basis[3] @ coef, vals[3], atol=1e-10)


def test_fiber_at_zero_is_periodic_cell_matrix():
    from periodic_jacobi.lattice import torus_matrix

    for op in [ssh(), random_periodic(1, [3], 2), random_periodic(2, [2, 2], 3)]:
        assert np.allclose(fiber_matrices(op, np.zeros((1, op.d)))[0], torus_matrix(op, (1,) * op.d))


@pytest.mark.parametrize("op, N", [(free1d(), (4,)), (ssh(), (8,)), (random_periodic(1, [3]), (8,)),
                                   (random_periodic(2, [2, 2]), (4, 4))])
def test_block_diagonalization(op, N):
    assert verify_block_diagonalization(op, N) <= 1e-12
    for k in range(op.d):
        assert verify_block_diagonalization(op, N, axis=k) <= 1e-12


@settings(max_examples=15, deadline=None)
@given(op=operators(), n=st.integers(1, 3))
def test_block_diagonalization_random_operators(op, n):
    assert verify_block_diagonalization(op, (n,) * op.d, trials=1) <= 1e-10


def test_fiber_field_norm():
    f = FiberField((2,), (1,), np.array([[3.0], [4.0]]))
    assert f.norm() == pytest.approx(5)
