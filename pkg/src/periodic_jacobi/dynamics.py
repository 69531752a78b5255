"""Time evolution, position observables and the integral identity for X_k(t).

Evolution is spectral rather than by time stepping.  On a commensurate torus
each fiber J(theta) is diagonalised once.  On a box the dense matrix is
diagonalised once.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryContamination, GeometryMismatch, IncommensurateTorus, TorusWithoutUnwrapConvention
from .floquet import FiberField, fiber_matrices, floquet_transform, inverse_floquet_transform, theta_grid
from .lattice import (
    Box,
    LatticeState,
    PeriodicJacobiOperator,
    Torus,
    _check_axis,
    apply_J,
    apply_P,
    box_matrix,
    box_velocity_matrix,
    positions,
)

BOUNDARY_THRESHOLD = 1e-10
BOUNDARY_WIDTH = 4
DEFAULT_STEP = 0.05


@dataclass(frozen=True, eq=False)
class EvolutionPlan:
    """Precomputed spectral data for ``e^{-itJ}`` on one geometry."""

    op: PeriodicJacobiOperator
    geometry: Box | Torus
    energies: np.ndarray
    frames: np.ndarray
    times: tuple = ()

    @property
    def mode(self):
        return "torus" if isinstance(self.geometry, Torus) else "box"


def _check_times(times):
    times = tuple(float(t) for t in times)
    if any(not math.isfinite(t) for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise ValueError(f"times must be finite and ascending, got {times}")
    return times


def _per_axis(op, n):
    n = tuple(int(v) for v in np.atleast_1d(n))
    return n * op.d if len(n) == 1 else n


def torus_plan(op: PeriodicJacobiOperator, N, times=()) -> EvolutionPlan:
    geo = Torus(_per_axis(op, N), op.q)
    E, V = np.linalg.eigh(fiber_matrices(op, theta_grid(geo.N)))
    return EvolutionPlan(op, geo, E, V, _check_times(times))


def box_plan(op: PeriodicJacobiOperator, L, times=()) -> EvolutionPlan:
    geo = Box(_per_axis(op, L))
    H = box_matrix(op, geo.L)
    if not np.any(H.imag):
        H = H.real
    E, V = np.linalg.eigh(H)
    return EvolutionPlan(op, geo, E, V, _check_times(times))


def _check_state(plan, state):
    if state.geometry != plan.geometry:
        raise GeometryMismatch(f"state lives on {state.geometry}, plan on {plan.geometry}")


def spectral_coefficients(plan: EvolutionPlan, state: LatticeState) -> np.ndarray:
    """Components of ``state`` in the plan's eigenbasis."""
    _check_state(plan, state)
    if plan.mode == "box":
        return plan.frames.conj().T @ state.vector()
    g = floquet_transform(state).values
    return np.einsum("mji,mj->mi", plan.frames.conj(), g)


def from_coefficients(plan: EvolutionPlan, coeffs: np.ndarray) -> LatticeState:
    geo = plan.geometry
    if plan.mode == "box":
        return LatticeState(geo, (plan.frames @ coeffs).reshape(geo.shape))
    g = np.einsum("mij,mj->mi", plan.frames, coeffs)
    return inverse_floquet_transform(FiberField(geo.N, geo.q, g))


def evolve(plan: EvolutionPlan, state: LatticeState, t: float) -> LatticeState:
    """``e^{-itJ} state``."""
    norm = state.norm()
    if abs(norm - 1.0) > 1e-10:
        warnings.warn(f"evolving a state of norm {norm:.12g}", stacklevel=2)
    c = spectral_coefficients(plan, state)
    return from_coefficients(plan, np.exp(-1j * t * plan.energies) * c)


def position_moments(state: LatticeState, k: int):
    """``(<X_k>, <X_k^2>)`` of a box state."""
    if state.geometry.periodic:
        raise TorusWithoutUnwrapConvention(
            "absolute positions are ambiguous on a torus; use unwrapped_position_trace"
        )
    x = positions(state, k)
    w = np.abs(state.amplitudes) ** 2
    return float(np.sum(x * w)), float(np.sum(x * x * w))


def p_expectation(op: PeriodicJacobiOperator, state: LatticeState, k: int) -> float:
    return float(np.real(state.vdot(apply_P(op, state, k))))


def energy_expectation(op: PeriodicJacobiOperator, state: LatticeState) -> float:
    return float(np.real(state.vdot(apply_J(op, state))))


def boundary_mass(state: LatticeState, width: int = BOUNDARY_WIDTH) -> float:
    """Mass within ``width`` sites of a box face."""
    geo = state.geometry
    if geo.periodic:
        return 0.0
    inner = np.zeros(geo.shape, dtype=bool)
    core = tuple(slice(width, n - width) for n in geo.shape)
    inner[core] = True
    return float(np.sum(np.abs(state.amplitudes[~inner]) ** 2))


def required_box_radius(op: PeriodicJacobiOperator, support_radius: int, t: float, margin: int = 8) -> int:
    """Half-width ``r + 2 (2 max|a|) d t + margin`` from the propagation bound."""
    return int(support_radius + math.ceil(2 * 2 * op.max_hopping * op.d * t) + margin)


# --------------------------------------------------------------------------
# velocity expectations and quadrature


def p_expectation_curve(plan: EvolutionPlan, state: LatticeState, k: int, s) -> np.ndarray:
    """``<psi(s)| P_k |psi(s)>`` for every time in ``s``."""
    op = plan.op
    k = _check_axis(op, k)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    c = spectral_coefficients(plan, state)
    V = plan.frames
    if plan.mode == "box":
        Pe = V.conj().T @ box_velocity_matrix(op, plan.geometry.L, k) @ V
        out = np.empty(len(s))
        for lo in range(0, len(s), 64):
            phi = np.exp(-1j * np.outer(s[lo:lo + 64], plan.energies)) * c
            out[lo:lo + 64] = np.real(np.sum(phi.conj() * (phi @ Pe.T), axis=1))
        return out
    P = fiber_matrices(op, theta_grid(plan.geometry.N), axis=k)
    Pe = np.einsum("mji,mjk,mkl->mil", V.conj(), P, V)
    out = np.empty(len(s))
    for i, si in enumerate(s):
        phi = np.exp(-1j * si * plan.energies) * c
        out[i] = np.real(np.einsum("mi,mij,mj->", phi.conj(), Pe, phi))
    return out


def simpson_nodes(t: float, h: float):
    """Even number of uniform panels of width at most ``h`` covering ``[0, t]``."""
    if h <= 0:
        raise ValueError("quadrature step must be positive")
    n = max(2, math.ceil(abs(t) / h - 1e-12))
    n += n % 2
    return np.linspace(0.0, t, n + 1)


def simpson(values: np.ndarray, step: float) -> float:
    """Composite Simpson rule on uniformly spaced samples (odd count)."""
    y = np.asarray(values)
    if len(y) % 2 == 0 or len(y) < 3:
        raise ValueError("Simpson's rule needs an odd number (>= 3) of samples")
    return float(step / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum()))


def integrated_velocity(plan: EvolutionPlan, state: LatticeState, k: int, t: float, h: float = DEFAULT_STEP) -> float:
    """Simpson approximation of ``int_0^t <psi(s)|P_k|psi(s)> ds``."""
    if t == 0:
        return 0.0
    s = simpson_nodes(t, h)
    return simpson(p_expectation_curve(plan, state, k, s), s[1] - s[0])


def unwrapped_position_trace(op, plan: EvolutionPlan, state: LatticeState, k: int, times, h: float = DEFAULT_STEP):
    """Torus position ``<X_k>(t) = <X_k>(0) + int_0^t <P_k>(s) ds``.

    ``<X_k>(0)`` uses centred coordinates; the integral fixes the winding.
    """
    if plan.mode != "torus" or tuple(plan.geometry.q) != tuple(op.q):
        raise IncommensurateTorus("unwrapped position traces need a commensurate torus plan")
    x0 = float(np.sum(positions(state, k) * np.abs(state.amplitudes) ** 2))
    return [x0 + integrated_velocity(plan, state, k, t, h) for t in _check_times(times)]


def integral_identity_defect(plan: EvolutionPlan, state: LatticeState, k: int, t: float, h: float = DEFAULT_STEP) -> float:
    """``|<X_k>(t) - <X_k>(0) - Simpson int_0^t <P_k>|`` on a box."""
    if plan.mode != "box":
        raise GeometryMismatch("integral identity defect is measured on boxes")
    x0, _ = position_moments(state, k)
    xt, _ = position_moments(evolve(plan, state, t), k)
    return abs(xt - x0 - integrated_velocity(plan, state, k, t, h))


def heisenberg_position_apply(plan: EvolutionPlan, state: LatticeState, k: int, t: float,
                              threshold: float = BOUNDARY_THRESHOLD, width: int = BOUNDARY_WIDTH):
    """``(X_k(t) / t) psi = e^{itJ} X_k e^{-itJ} psi / t`` on a box.

    Returns the state and the relative boundary mass of ``e^{-itJ} psi``.
    """
    if plan.mode != "box":
        raise GeometryMismatch("Heisenberg positions are computed on boxes")
    if t == 0:
        raise ValueError("X_k(t)/t is undefined at t = 0")
    k = _check_axis(plan.op, k)
    c = spectral_coefficients(plan, state)
    psi_t = from_coefficients(plan, np.exp(-1j * t * plan.energies) * c)
    mass = boundary_mass(psi_t, width) / state.norm() ** 2
    if mass > threshold:
        need = required_box_radius(plan.op, 0, t)
        raise BoundaryContamination(
            f"boundary mass {mass:.3e} > {threshold:.1e} at t={t}; try a box half-width >= {need} + support radius"
        )
    x_psi = psi_t.like(positions(psi_t, k) * psi_t.amplitudes)
    back = from_coefficients(plan, np.exp(1j * t * plan.energies) * spectral_coefficients(plan, x_psi))
    return back / t, mass
