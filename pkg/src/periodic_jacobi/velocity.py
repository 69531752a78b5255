"""The asymptotic velocity Q_k and ballistic convergence reports.

Q_k acts fiberwise as ``sum_j v_{j,k}(theta) Pi_j(theta)`` with the band
velocities of :mod:`periodic_jacobi.bands`.  It is realised only on
commensurate tori, where the direct integral is a finite direct sum.  For
comparisons on a box, ``Q_k psi`` is computed on a torus and unfolded into
the box.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .bands import BandStructure, add_velocities, compute_bands
from .dynamics import box_plan, heisenberg_position_apply, required_box_radius
from .errors import GridMismatch
from .floquet import FiberField, floquet_transform, inverse_floquet_transform
from .lattice import Box, LatticeState, PeriodicJacobiOperator, Torus, _check_axis


@dataclass(eq=False)
class AsymptoticVelocity:
    bands: BandStructure

    @property
    def op(self):
        return self.bands.op

    @property
    def N(self):
        return self.bands.N

    @property
    def torus(self):
        return Torus(self.N, self.op.q)

    def _axis(self, k):
        k = _check_axis(self.op, k)
        if k not in self.bands.velocities:
            add_velocities(self.bands, k)
        return k

    def fiber(self, k: int) -> np.ndarray:
        """Q_k(theta) on every grid point, shape ``(M, qbar, qbar)``."""
        k = self._axis(k)
        V = self.bands.velocity_frames[k]
        v = self.bands.velocities[k]
        return np.einsum("mij,mj,mkj->mik", V, v, V.conj())


def asymptotic_velocity(op: PeriodicJacobiOperator, N, axes=None, degeneracy_tol=None, threads=1):
    return AsymptoticVelocity(compute_bands(op, N, axes, degeneracy_tol, threads))


def _fiber_coefficients(av, state, k):
    if state.geometry != av.torus:
        raise GridMismatch(f"state on {state.geometry} does not match the velocity grid {av.torus}")
    g = floquet_transform(state).values
    V = av.bands.velocity_frames[k]
    return V, np.einsum("mji,mj->mi", V.conj(), g)


def apply_Q(av: AsymptoticVelocity, state: LatticeState, k: int) -> LatticeState:
    k = av._axis(k)
    V, c = _fiber_coefficients(av, state, k)
    g = np.einsum("mij,mj->mi", V, av.bands.velocities[k] * c)
    return inverse_floquet_transform(FiberField(av.N, av.op.q, g))


def q_moments(av: AsymptoticVelocity, state: LatticeState, k: int):
    """``(<Q_k>, <Q_k^2>)`` from one and two applications of Q_k."""
    Qpsi = apply_Q(av, state, k)
    return float(np.real(state.vdot(Qpsi))), float(np.real(Qpsi.vdot(Qpsi)))


@dataclass
class VelocityDistribution:
    velocities: np.ndarray
    weights: np.ndarray

    def moment(self, p):
        return float(np.sum(self.weights * self.velocities ** p))


def velocity_distribution(av: AsymptoticVelocity, state: LatticeState, k: int) -> VelocityDistribution:
    """Atoms ``v_{j,k}(theta)`` with weights ``||Pi_j(theta) (F psi)(theta)||^2``."""
    k = av._axis(k)
    _, c = _fiber_coefficients(av, state, k)
    return VelocityDistribution(av.bands.velocities[k].reshape(-1), (np.abs(c) ** 2).reshape(-1))


# --------------------------------------------------------------------------
# box <-> torus


def fold_to_torus(state: LatticeState, torus: Torus) -> LatticeState:
    """Periodise a box state onto a torus; its support must fit in one period window."""
    geo = state.geometry
    nz = np.nonzero(state.amplitudes)
    for j, S in enumerate(torus.shape):
        if len(nz[j]) and nz[j].max() - nz[j].min() >= S:
            raise GridMismatch(f"state support along axis {j} does not fit a torus of side {S}")
    out = np.zeros(torus.shape, dtype=complex)
    coords = geo.coords()
    idx = tuple(coords[j][nz] % torus.shape[j] for j in range(geo.d))
    np.add.at(out, idx, state.amplitudes[nz])
    return LatticeState(torus, out)


def embed_in_box(state: LatticeState, box: Box):
    """Place a torus state into ``box`` via centred coordinates; returns ``(state, mass outside)``."""
    coords = state.geometry.coords()
    inside = np.ones(state.geometry.shape, dtype=bool)
    for c, n in zip(coords, box.L):
        inside &= np.abs(c) <= n
    out = np.zeros(box.shape, dtype=complex)
    idx = tuple(c[inside] + n for c, n in zip(coords, box.L))
    out[idx] = state.amplitudes[inside]
    tail = float(np.sum(np.abs(state.amplitudes[~inside]) ** 2))
    return LatticeState(box, out), tail


def rebox(state: LatticeState, box: Box) -> LatticeState:
    """Copy a box state into another box by site coordinates."""
    if state.geometry.periodic:
        raise GridMismatch("rebox expects a box state")
    out = LatticeState.zeros(box)
    for idx in zip(*np.nonzero(state.amplitudes)):
        site = tuple(int(c[idx]) for c in state.geometry.coords())
        try:
            out.amplitudes[box.index(site)] = state.amplitudes[idx]
        except IndexError:
            raise GridMismatch(f"site {site} of the initial state lies outside {box}") from None
    return out


def support_radius(state: LatticeState) -> int:
    """Largest l1 norm of a site carrying nonzero amplitude."""
    nz = state.amplitudes != 0
    if not nz.any():
        return 0
    l1 = sum(np.abs(c) for c in state.geometry.coords())
    return int(l1[nz].max())


# --------------------------------------------------------------------------
# ballistic report


@dataclass
class BallisticRow:
    t: float
    strong_error: float
    mean_error: float
    q_mean: float
    q_second_moment: float
    boundary_mass: float
    x_mean_over_t: float


@dataclass
class BallisticReport:
    axis: int
    N: tuple
    box: Box
    q_tail_mass: float
    rows: list = field(default_factory=list)

    @property
    def strong_errors(self):
        return np.array([r.strong_error for r in self.rows])

    def ratios(self):
        e = self.strong_errors
        return e[1:] / e[:-1]

    @property
    def decreasing(self):
        return bool(np.all(np.diff(self.strong_errors) < 0))

    def write_csv(self, path):
        cols = ["t", "strong_error", "mean_error", "q_mean", "q_second_moment", "boundary_mass"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in self.rows:
                w.writerow([repr(float(getattr(r, c))) for c in cols])


def ballistic_report(op: PeriodicJacobiOperator, state: LatticeState | None, k: int, times, N, L=None,
                     threshold: float = 1e-10, threads: int = 1) -> BallisticReport:
    """Compare ``(X_k(t)/t) psi`` on a box with ``Q_k psi`` from the torus grid ``N``.

    ``state`` is a box state (``None`` means delta at the origin).  ``L``
    defaults to the propagation-bound half-width for the largest time.
    """
    k = _check_axis(op, k)
    times = [float(t) for t in times]
    if L is None:
        r = 0 if state is None else support_radius(state)
        L = (required_box_radius(op, r, max(times)),) * op.d
    box = Box(L)
    if state is None:
        state = LatticeState.delta(box)
    elif state.geometry != box:
        state = rebox(state, box)
    av = asymptotic_velocity(op, N, axes=[k], threads=threads)
    psi_t = fold_to_torus(state, av.torus)
    Qpsi_t = apply_Q(av, psi_t, k)
    q_mean = float(np.real(psi_t.vdot(Qpsi_t)))
    q_second = float(np.real(Qpsi_t.vdot(Qpsi_t)))
    Qpsi, tail = embed_in_box(Qpsi_t, box)
    report = BallisticReport(k, tuple(np.atleast_1d(N)), box, tail)
    plan = box_plan(op, box.L)
    for t in times:
        xt, mass = heisenberg_position_apply(plan, state, k, t, threshold)
        x_over_t = float(np.real(state.vdot(xt)))
        report.rows.append(BallisticRow(
            t=t,
            strong_error=(xt - Qpsi).norm(),
            mean_error=abs(x_over_t - q_mean),
            q_mean=q_mean,
            q_second_moment=q_second,
            boundary_mass=mass,
            x_mean_over_t=x_over_t,
        ))
    return report
