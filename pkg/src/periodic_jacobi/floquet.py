"""Fiber operators J(theta), P_k(theta) and the discrete Floquet transform.

Quasimomenta ``theta`` live in [0, 1)^d.  The fiber at ``theta`` is C^Gamma,
identified with the quasi-periodic sequences ``psi_{x+nq} = e^{2 pi i <theta,n>} psi_x``
through ``delta_x -> sum_n e^{2 pi i <theta,n>} delta_{x+nq}``.  Under that
identification the entry ``(y', x)`` of J(theta), for a neighbour
``y = y' + n q`` of ``x``, is ``a_{y,x} e^{-2 pi i <theta,n>}`` (column = source
basis vector), with contributions accumulated when several neighbours fold
onto the same cell site.

On a commensurate torus the transform

    (F psi)(theta_n, x) = (prod N)^{-1/2} sum_m psi_{x+mq} e^{-2 pi i <theta_n, m>}

is unitary and intertwines J with the fiberwise action of J(theta).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IncommensurateTorus
from .lattice import (
    LatticeState,
    PeriodicJacobiOperator,
    Torus,
    _check_axis,
    torus_matrix,
    torus_velocity_matrix,
)


def theta_grid(N) -> np.ndarray:
    """Grid ``{(n_1/N_1, ..., n_d/N_d)}`` as an array of shape ``(prod N, d)``, row-major."""
    N = tuple(int(n) for n in np.atleast_1d(N))
    axes = np.meshgrid(*[np.arange(n) / n for n in N], indexing="ij")
    return np.stack([a.reshape(-1) for a in axes], axis=-1)


def _as_thetas(op, theta):
    th = np.asarray(theta, dtype=float)
    return th.reshape(-1, op.d)


@dataclass(frozen=True, eq=False)
class FiberOperator:
    theta: np.ndarray
    matrix: np.ndarray

    def hermiticity_defect(self):
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))


def _fiber_terms(op: PeriodicJacobiOperator):
    """Folded stencil: rows, columns, J and P coefficients and cell shifts ``n``."""
    q = np.asarray(op.q)
    rows, cols, cj, cp, shifts = [], [], [], [], []
    for x in op.cell_sites():
        col = np.ravel_multi_index(x, op.q)
        rows.append(col)
        cols.append(col)
        cj.append(op.potential[x])
        cp.append(np.zeros(op.d, dtype=complex))
        shifts.append(np.zeros(op.d, dtype=int))
        for j in range(op.d):
            for s in (1, -1):
                y = np.array(x)
                y[j] += s
                yc = y % q
                n = (y - yc) // q
                if s == 1:
                    a_yx = np.conj(op.hoppings[x + (j,)])
                else:
                    a_yx = op.hoppings[tuple(yc) + (j,)]
                p = np.zeros(op.d, dtype=complex)
                # i a_{y,x} (x_j - y_j)
                p[j] = -1j * s * a_yx
                rows.append(np.ravel_multi_index(tuple(yc), op.q))
                cols.append(col)
                cj.append(a_yx)
                cp.append(p)
                shifts.append(n)
    return (
        np.array(rows),
        np.array(cols),
        np.array(cj, dtype=complex),
        np.array(cp, dtype=complex),
        np.array(shifts),
    )


def fiber_matrices(op: PeriodicJacobiOperator, thetas, axis=None) -> np.ndarray:
    """Stack of J(theta) (``axis=None``) or P_axis(theta) for every row of ``thetas``."""
    thetas = _as_thetas(op, thetas)
    rows, cols, cj, cp, shifts = _fiber_terms(op)
    coef = cj if axis is None else cp[:, _check_axis(op, axis)]
    phases = np.exp(-2j * np.pi * thetas @ shifts.T) * coef
    mats = np.zeros((len(thetas), op.qbar, op.qbar), dtype=complex)
    for t in range(len(rows)):
        mats[:, rows[t], cols[t]] += phases[:, t]
    return mats


def fiber_hamiltonian(op: PeriodicJacobiOperator, theta) -> FiberOperator:
    th = _as_thetas(op, theta)[0]
    return FiberOperator(th, fiber_matrices(op, th)[0])


def fiber_velocity(op: PeriodicJacobiOperator, theta, k: int) -> FiberOperator:
    th = _as_thetas(op, theta)[0]
    return FiberOperator(th, fiber_matrices(op, th, axis=k)[0])


def gauge_phases(op: PeriodicJacobiOperator, thetas) -> np.ndarray:
    """Diagonals ``e^{2 pi i <theta, x/q>}`` of M(theta), shape ``(M, qbar)``."""
    thetas = _as_thetas(op, thetas)
    frac = np.array(op.cell_sites(), dtype=float) / np.asarray(op.q, dtype=float)
    return np.exp(2j * np.pi * thetas @ frac.T)


def gauge_matrix(op: PeriodicJacobiOperator, theta) -> np.ndarray:
    return np.diag(gauge_phases(op, theta)[0])


def gauged_fiber(op: PeriodicJacobiOperator, theta, k: int):
    """``(M^-1 J M, M^-1 P_k M)`` at ``theta``."""
    m = gauge_phases(op, theta)[0]
    sandwich = np.conj(m)[:, None] * m[None, :]
    J = fiber_matrices(op, theta)[0]
    P = fiber_matrices(op, theta, axis=k)[0]
    return J * sandwich, P * sandwich


def gauge_identity_defect(op: PeriodicJacobiOperator, theta, k: int, h: float) -> float:
    """Max-entry gap between the gauged velocity and a central difference of the gauged J."""
    th = _as_thetas(op, theta)[0]
    step = np.zeros(op.d)
    step[k] = h
    _, Pt = gauged_fiber(op, th, k)
    Jp, _ = gauged_fiber(op, th + step, k)
    Jm, _ = gauged_fiber(op, th - step, k)
    fd = op.q[k] / (2 * np.pi) * (Jp - Jm) / (2 * h)
    return float(np.max(np.abs(Pt - fd)))


# --------------------------------------------------------------------------
# discrete transform


@dataclass(frozen=True, eq=False)
class FiberField:
    """Samples of a direct-integral vector on the grid ``theta_grid(N)``."""

    N: tuple
    q: tuple
    values: np.ndarray

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)))

    def like(self, values):
        return FiberField(self.N, self.q, values)

    @property
    def thetas(self):
        return theta_grid(self.N)


def _torus_of(state, q):
    geo = state.geometry
    if not isinstance(geo, Torus):
        raise IncommensurateTorus(f"Floquet transform needs a torus state, got {geo}")
    if q is not None and tuple(q) != geo.q:
        raise IncommensurateTorus(f"torus period {geo.q} != operator period {tuple(q)}")
    return geo


def floquet_transform(state: LatticeState, q=None) -> FiberField:
    geo = _torus_of(state, q)
    d = geo.d
    split = []
    for n, p in zip(geo.N, geo.q):
        split += [n, p]
    arr = state.amplitudes.reshape(split)
    arr = np.fft.fftn(arr, axes=tuple(range(0, 2 * d, 2)), norm="ortho")
    arr = arr.transpose(tuple(range(0, 2 * d, 2)) + tuple(range(1, 2 * d, 2)))
    return FiberField(geo.N, geo.q, arr.reshape(int(np.prod(geo.N)), int(np.prod(geo.q))))


def inverse_floquet_transform(field: FiberField) -> LatticeState:
    geo = Torus(field.N, field.q)
    d = geo.d
    arr = field.values.reshape(tuple(field.N) + tuple(field.q))
    arr = np.fft.ifftn(arr, axes=tuple(range(d)), norm="ortho")
    order = []
    for j in range(d):
        order += [j, d + j]
    arr = arr.transpose(order).reshape(geo.shape)
    return LatticeState(geo, arr)


def apply_fiberwise(field: FiberField, mats: np.ndarray) -> FiberField:
    return field.like(np.einsum("mij,mj->mi", mats, field.values))


def verify_block_diagonalization(op: PeriodicJacobiOperator, N, axis=None, trials=3, seed=0) -> float:
    """Max over random torus states of ``|| F(A psi) - A(theta) (F psi)(theta) ||``.

    ``A`` is J (``axis=None``) or P_axis; the left side uses the dense torus matrix.
    """
    geo = Torus(N, op.q)
    dense = torus_matrix(op, N) if axis is None else torus_velocity_matrix(op, N, axis)
    mats = fiber_matrices(op, theta_grid(geo.N), axis=axis)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        amp = rng.standard_normal(geo.shape) + 1j * rng.standard_normal(geo.shape)
        psi = LatticeState(geo, amp)
        lhs = floquet_transform(LatticeState(geo, (dense @ psi.vector()).reshape(geo.shape)))
        rhs = apply_fiberwise(floquet_transform(psi), mats)
        worst = max(worst, float(np.linalg.norm(lhs.values - rhs.values)))
    return worst
