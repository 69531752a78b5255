"""Periodic Jacobi operators on finite restrictions of Z^d.

An operator is stored through its positive-direction hoppings on the period
cell, ``hoppings[x + (j,)] = a_{x, x+e_j}`` for ``x`` in the cell, and its
on-site potential ``potential[x] = b_x``.  Every other coefficient follows
from periodicity and Hermitian symmetry ``a_{y,x} = conj(a_{x,y})``.

The action is ``(J u)_x = sum_{y ~ x} a_{x,y} u_y + b_x u_x``.  Axes are
0-based throughout the Python API.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    GeometryMismatch,
    InvalidAxis,
    InvalidOperator,
    NotNeighbors,
    TooLarge,
)

DENSE_LIMIT = 4096


# --------------------------------------------------------------------------
# validation records


@dataclass(frozen=True)
class ZeroHopping:
    site: tuple
    axis: int

    def __str__(self):
        return f"ZeroHopping(site={self.site}, axis={self.axis})"


@dataclass(frozen=True)
class NonRealPotential:
    site: tuple

    def __str__(self):
        return f"NonRealPotential(site={self.site})"


@dataclass(frozen=True)
class NonFiniteCoefficient:
    site: tuple
    which: str

    def __str__(self):
        return f"NonFiniteCoefficient(site={self.site}, {self.which})"


@dataclass(frozen=True)
class ShapeMismatch:
    detail: str

    def __str__(self):
        return f"ShapeMismatch({self.detail})"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok


# --------------------------------------------------------------------------
# operator


@dataclass(frozen=True, eq=False)
class PeriodicJacobiOperator:
    """Nearest-neighbour q-periodic Jacobi operator on Z^d.

    Parameters
    ----------
    q : tuple of int
        Period along each axis.
    hoppings : ndarray, shape ``q + (d,)``
        ``hoppings[x + (j,)]`` is the hopping ``a_{x, x+e_j}`` for ``x`` in
        the period cell.
    potential : ndarray, shape ``q``
        On-site values ``b_x``.

    The constructor does not validate; use :func:`validate` or
    :meth:`from_arrays`.
    """

    q: tuple
    hoppings: np.ndarray
    potential: np.ndarray

    @classmethod
    def from_arrays(cls, q, hoppings, potential):
        q = tuple(int(n) for n in np.atleast_1d(q))
        hop = np.array(hoppings, dtype=complex)
        pot = np.array(potential)
        if hop.ndim == len(q) and len(q) == 1:
            hop = hop.reshape(q + (1,))
        op = cls(q, hop, pot)
        report = validate(op)
        if not report:
            raise InvalidOperator(report)
        return cls._frozen(q, hop, pot.real.astype(float))

    @classmethod
    def from_records(cls, q, hoppings=None, potential=None):
        """Build from ``{(site, axis): a}`` and ``{site: b}`` mappings.

        Omitted hoppings default to 1 and omitted potentials to 0.
        """
        q = tuple(int(n) for n in q)
        d = len(q)
        hop = np.ones(q + (d,), dtype=complex)
        pot = np.zeros(q, dtype=complex)
        bad = []
        for (site, axis), value in (hoppings or {}).items():
            site = tuple(site)
            if not _in_cell(site, q) or not 0 <= axis < d:
                bad.append(ShapeMismatch(f"hopping key {(site, axis)} outside cell x axes"))
                continue
            hop[site + (axis,)] = value
        for site, value in (potential or {}).items():
            site = tuple(site)
            if not _in_cell(site, q):
                bad.append(ShapeMismatch(f"potential key {site} outside cell"))
                continue
            pot[site] = value
        if bad:
            raise InvalidOperator(ValidationReport(bad))
        return cls.from_arrays(q, hop, pot)

    @classmethod
    def _frozen(cls, q, hop, pot):
        hop = hop.copy()
        pot = pot.copy()
        hop.flags.writeable = False
        pot.flags.writeable = False
        return cls(q, hop, pot)

    @property
    def d(self):
        return len(self.q)

    @property
    def qbar(self):
        return int(np.prod(self.q))

    @property
    def max_hopping(self):
        return float(np.max(np.abs(self.hoppings)))

    def cell_sites(self):
        """Sites of the period cell in row-major order."""
        return list(np.ndindex(*self.q))

    def __repr__(self):
        return f"PeriodicJacobiOperator(d={self.d}, q={self.q})"


def _in_cell(site, q):
    return len(site) == len(q) and all(0 <= s < n for s, n in zip(site, q))


def validate(op: PeriodicJacobiOperator) -> ValidationReport:
    """Check every invariant of ``op`` and list the violations found."""
    report = ValidationReport()
    q = tuple(op.q)
    d = len(q)
    if d == 0 or any(n < 1 for n in q):
        report.violations.append(ShapeMismatch(f"period must be positive, got {q}"))
        return report
    hop = np.asarray(op.hoppings)
    pot = np.asarray(op.potential)
    if hop.shape != q + (d,):
        report.violations.append(ShapeMismatch(f"hoppings shape {hop.shape} != {q + (d,)}"))
    if pot.shape != q:
        report.violations.append(ShapeMismatch(f"potential shape {pot.shape} != {q}"))
    if not report.ok:
        return report
    for site in np.ndindex(*q):
        for j in range(d):
            a = hop[site + (j,)]
            if not np.isfinite(a):
                report.violations.append(NonFiniteCoefficient(site, f"hopping axis {j}"))
            elif a == 0:
                report.violations.append(ZeroHopping(site, j))
        b = pot[site]
        if not np.isfinite(b):
            report.violations.append(NonFiniteCoefficient(site, "potential"))
        elif np.imag(b) != 0:
            report.violations.append(NonRealPotential(site))
    return report


def _check_axis(op, k):
    if not (isinstance(k, (int, np.integer)) and 0 <= k < op.d):
        raise InvalidAxis(f"axis {k!r} not in 0..{op.d - 1}")
    return int(k)


def hopping_at(op: PeriodicJacobiOperator, x, y) -> complex:
    """Coefficient ``a_{x,y}`` for neighbouring sites of Z^d."""
    x = np.asarray(x, dtype=int).reshape(-1)
    y = np.asarray(y, dtype=int).reshape(-1)
    diff = y - x
    if np.abs(diff).sum() != 1:
        raise NotNeighbors(f"{tuple(x)} and {tuple(y)} are not nearest neighbours")
    j = int(np.flatnonzero(diff)[0])
    q = np.asarray(op.q)
    if diff[j] == 1:
        return complex(op.hoppings[tuple(x % q) + (j,)])
    # stored edge is (y, y + e_j) = (y, x)
    return complex(np.conj(op.hoppings[tuple(y % q) + (j,)]))


# --------------------------------------------------------------------------
# geometries and states


@dataclass(frozen=True)
class Box:
    """Sites ``x`` with ``|x_j| <= L_j``; zero boundary conditions outside."""

    L: tuple

    def __post_init__(self):
        object.__setattr__(self, "L", tuple(int(n) for n in np.atleast_1d(self.L)))
        if any(n < 0 for n in self.L):
            raise ValueError(f"box half-widths must be non-negative, got {self.L}")

    @property
    def d(self):
        return len(self.L)

    @property
    def shape(self):
        return tuple(2 * n + 1 for n in self.L)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def coords(self):
        return np.meshgrid(*[np.arange(-n, n + 1) for n in self.L], indexing="ij")

    def index(self, site):
        site = tuple(int(s) for s in np.atleast_1d(site))
        if len(site) != self.d or any(abs(s) > n for s, n in zip(site, self.L)):
            raise IndexError(f"site {site} outside {self}")
        return tuple(s + n for s, n in zip(site, self.L))

    periodic = False


@dataclass(frozen=True)
class Torus:
    """Sites of Z^d modulo ``N_j q_j``.

    Positions are reported through centred representatives in
    ``[-floor(S/2), ceil(S/2))`` with ``S = N_j q_j``.
    """

    N: tuple
    q: tuple

    def __post_init__(self):
        object.__setattr__(self, "N", tuple(int(n) for n in np.atleast_1d(self.N)))
        object.__setattr__(self, "q", tuple(int(n) for n in np.atleast_1d(self.q)))
        if len(self.N) != len(self.q) or any(n < 1 for n in self.N + self.q):
            raise ValueError(f"bad torus N={self.N}, q={self.q}")

    @property
    def d(self):
        return len(self.N)

    @property
    def shape(self):
        return tuple(n * p for n, p in zip(self.N, self.q))

    @property
    def size(self):
        return int(np.prod(self.shape))

    def centred(self, s, axis):
        S = self.shape[axis]
        s = np.asarray(s) % S
        return np.where(s < (S + 1) // 2, s, s - S)

    def coords(self):
        grids = np.meshgrid(*[np.arange(S) for S in self.shape], indexing="ij")
        return [self.centred(g, j) for j, g in enumerate(grids)]

    def index(self, site):
        site = np.atleast_1d(np.asarray(site, dtype=int))
        if len(site) != self.d:
            raise IndexError(f"site {tuple(site)} has wrong dimension for {self}")
        return tuple(int(s % S) for s, S in zip(site, self.shape))

    periodic = True


@dataclass(frozen=True, eq=False)
class LatticeState:
    """Complex amplitudes on a :class:`Box` or :class:`Torus`."""

    geometry: Box | Torus
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != self.geometry.shape:
            raise ValueError(f"amplitudes shape {amp.shape} != geometry shape {self.geometry.shape}")
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def zeros(cls, geometry):
        return cls(geometry, np.zeros(geometry.shape, dtype=complex))

    @classmethod
    def delta(cls, geometry, site=None):
        site = (0,) * geometry.d if site is None else site
        amp = np.zeros(geometry.shape, dtype=complex)
        amp[geometry.index(site)] = 1.0
        return cls(geometry, amp)

    def like(self, amplitudes):
        return LatticeState(self.geometry, amplitudes)

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def vdot(self, other):
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def vector(self):
        return self.amplitudes.reshape(-1)

    def __add__(self, other):
        _same_geometry(self, other)
        return self.like(self.amplitudes + other.amplitudes)

    def __sub__(self, other):
        _same_geometry(self, other)
        return self.like(self.amplitudes - other.amplitudes)

    def __mul__(self, c):
        return self.like(self.amplitudes * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self.like(self.amplitudes / c)


def _same_geometry(a, b):
    if a.geometry != b.geometry:
        raise GeometryMismatch(f"{a.geometry} != {b.geometry}")


def positions(state: LatticeState, k: int) -> np.ndarray:
    """Coordinate ``x_k`` of every site (centred representatives on a torus)."""
    return state.geometry.coords()[k]


# --------------------------------------------------------------------------
# stencil application


def _coefficient_fields(op, geometry):
    """Forward and backward hoppings ``a_{x,x+e_j}``, ``a_{x,x-e_j}`` and ``b_x`` per site."""
    if geometry.d != op.d:
        raise ValueError(f"geometry dimension {geometry.d} != operator dimension {op.d}")
    coords = geometry.coords()
    q = op.q
    cell = tuple(c % p for c, p in zip(coords, q))
    fwd, back = [], []
    for j in range(op.d):
        fwd.append(op.hoppings[cell + (j,)])
        prev = tuple((c - (1 if i == j else 0)) % p for i, (c, p) in enumerate(zip(coords, q)))
        back.append(np.conj(op.hoppings[prev + (j,)]))
    return fwd, back, op.potential[cell]


def _shift(arr, axis, step, periodic):
    """Array whose entry at ``x`` is ``arr[x + step e_axis]``."""
    if periodic:
        return np.roll(arr, -step, axis=axis)
    out = np.zeros_like(arr)
    n = arr.shape[axis]
    src = [slice(None)] * arr.ndim
    dst = [slice(None)] * arr.ndim
    if step > 0:
        src[axis] = slice(step, n)
        dst[axis] = slice(0, n - step)
    else:
        src[axis] = slice(0, n + step)
        dst[axis] = slice(-step, n)
    out[tuple(dst)] = arr[tuple(src)]
    return out


def apply_J(op: PeriodicJacobiOperator, state: LatticeState) -> LatticeState:
    """Matrix-free application of ``J`` (zero outside a box, wrap-around on a torus)."""
    geo = state.geometry
    fwd, back, b = _coefficient_fields(op, geo)
    psi = state.amplitudes
    out = b * psi
    for j in range(op.d):
        out = out + fwd[j] * _shift(psi, j, 1, geo.periodic) + back[j] * _shift(psi, j, -1, geo.periodic)
    return state.like(out)


def apply_P(op: PeriodicJacobiOperator, state: LatticeState, k: int) -> LatticeState:
    """Apply the velocity operator ``P_k = i[J, X_k]``.

    ``(P_k u)_x = i a_{x,x+e_k} u_{x+e_k} - i a_{x,x-e_k} u_{x-e_k}``.
    """
    k = _check_axis(op, k)
    geo = state.geometry
    fwd, back, _ = _coefficient_fields(op, geo)
    psi = state.amplitudes
    out = 1j * fwd[k] * _shift(psi, k, 1, geo.periodic) - 1j * back[k] * _shift(psi, k, -1, geo.periodic)
    return state.like(out)


# --------------------------------------------------------------------------
# dense oracles


def _dense_matrix(op, geometry, axis=None):
    """Dense J (``axis=None``) or P_axis built edge by edge in the standard basis."""
    if geometry.size > DENSE_LIMIT:
        raise TooLarge(f"{geometry} has {geometry.size} sites > {DENSE_LIMIT}")
    if geometry.d != op.d:
        raise GeometryMismatch(f"{geometry} is {geometry.d}-dimensional, the operator {op.d}-dimensional")
    shape = geometry.shape
    mat = np.zeros((geometry.size, geometry.size), dtype=complex)
    origin = np.array([n for n in getattr(geometry, "L", (0,) * op.d)])
    q = np.asarray(op.q)
    for idx in np.ndindex(*shape):
        x = np.array(idx) - origin
        i = np.ravel_multi_index(idx, shape)
        if axis is None:
            mat[i, i] += op.potential[tuple(x % q)]
        for j in range(op.d):
            nxt = list(idx)
            nxt[j] += 1
            if geometry.periodic:
                nxt[j] %= shape[j]
            elif nxt[j] >= shape[j]:
                continue
            jn = np.ravel_multi_index(tuple(nxt), shape)
            a = op.hoppings[tuple(x % q) + (j,)]
            if axis is None:
                mat[i, jn] += a
                mat[jn, i] += np.conj(a)
            elif axis == j:
                # P_{z,w} = i a_{z,w} (w_k - z_k)
                mat[i, jn] += 1j * a
                mat[jn, i] += -1j * np.conj(a)
    return mat


def torus_matrix(op: PeriodicJacobiOperator, N) -> np.ndarray:
    """Dense ``J`` on the torus ``Z^d / (N_j q_j Z)`` (row-major site order)."""
    return _dense_matrix(op, Torus(N, op.q))


def torus_velocity_matrix(op: PeriodicJacobiOperator, N, k: int) -> np.ndarray:
    return _dense_matrix(op, Torus(N, op.q), axis=_check_axis(op, k))


def box_matrix(op: PeriodicJacobiOperator, L) -> np.ndarray:
    """Dense ``J`` on a box with zero boundary conditions."""
    return _dense_matrix(op, Box(L))


def box_velocity_matrix(op: PeriodicJacobiOperator, L, k: int) -> np.ndarray:
    return _dense_matrix(op, Box(L), axis=_check_axis(op, k))
