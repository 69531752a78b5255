"""Band structures, Hellmann-Feynman band velocities and spectral intervals.

Bands are always enumerated in ascending order at each quasimomentum.  A
band velocity ``v_{j,k}(theta)`` is the compression of P_k(theta) onto the
j-th eigenvector and equals ``(q_k / 2 pi) dE_j/dtheta_k`` away from band
crossings.  Eigenvalues closer than the degeneracy tolerance form a cluster;
inside a cluster the compressed velocity matrix is diagonalised, its
eigenvalues are reported in ascending order and the cluster frame is rotated
accordingly.  That is one consistent choice on the measure-zero crossing set,
not something forced by the mathematics.  Even grid sizes put theta = 0 and
theta = 1/2 on the grid, where crossings are common.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NotHermitian
from .floquet import fiber_matrices, theta_grid
from .lattice import PeriodicJacobiOperator, _check_axis


def hermitian_eigendecomposition(A, tol=1e-10):
    """Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix.

    Works on stacks of matrices too.  Delegates to LAPACK (``numpy.linalg.eigh``)
    after checking Hermiticity relative to the largest entry.
    """
    A = np.asarray(A)
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    defect = float(np.max(np.abs(A - np.swapaxes(A, -1, -2).conj()))) if A.size else 0.0
    if defect > tol * scale:
        raise NotHermitian(f"Hermiticity defect {defect:.3e} exceeds {tol:.1e}")
    return np.linalg.eigh(A)


def _clusters(energies, tol):
    """Index runs ``[start, stop)`` of eigenvalues whose neighbours are closer than ``tol``."""
    out = []
    start = 0
    for i in range(1, len(energies) + 1):
        if i == len(energies) or energies[i] - energies[i - 1] >= tol:
            if i - start > 1:
                out.append((start, i))
            start = i
    return out


def band_velocity(energies, frame, P, tol):
    """Velocities of the ordered bands at one quasimomentum.

    Parameters
    ----------
    energies : (n,) ndarray
        Ascending eigenvalues of J(theta).
    frame : (n, n) ndarray
        Matching eigenvectors (columns).
    P : (n, n) ndarray
        Fiber velocity operator P_k(theta).
    tol : float
        Degeneracy tolerance.

    Returns
    -------
    v : (n,) ndarray
        Real velocities.
    frame : (n, n) ndarray
        Frame whose degenerate blocks are rotated to diagonalise the compressed P.
    """
    compressed = frame.conj().T @ P @ frame
    v = np.real(np.diag(compressed)).copy()
    clusters = _clusters(energies, tol)
    if not clusters:
        return v, frame
    frame = frame.copy()
    for a, b in clusters:
        w, u = np.linalg.eigh(compressed[a:b, a:b])
        v[a:b] = w
        frame[:, a:b] = frame[:, a:b] @ u
    return v, frame


@dataclass(eq=False)
class BandStructure:
    """Ordered bands and velocities on the grid ``theta_grid(N)``.

    ``energies`` has shape ``(M, qbar)`` and ``frames`` ``(M, qbar, qbar)``.
    ``velocities[k]`` has shape ``(M, qbar)``; ``velocity_frames[k]`` is the frame
    used for axis ``k`` (it differs from ``frames`` only inside degenerate clusters).
    """

    op: PeriodicJacobiOperator
    N: tuple
    thetas: np.ndarray
    energies: np.ndarray
    frames: np.ndarray
    degeneracy_tol: float
    velocities: dict = field(default_factory=dict)
    velocity_frames: dict = field(default_factory=dict)

    @property
    def axes(self):
        return sorted(self.velocities)


def _eigh_chunked(mats, threads):
    if threads <= 1 or len(mats) < 2 * threads:
        return hermitian_eigendecomposition(mats)
    chunks = np.array_split(np.arange(len(mats)), threads)
    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(lambda idx: hermitian_eigendecomposition(mats[idx]), chunks))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def compute_bands(op: PeriodicJacobiOperator, N, axes=None, degeneracy_tol=None, threads=1) -> BandStructure:
    """Diagonalise J(theta) on the grid and attach velocities for ``axes`` (default: all).

    ``degeneracy_tol`` defaults to ``1e-8`` times the spectral diameter on the grid.
    """
    N = tuple(int(n) for n in np.atleast_1d(N))
    if len(N) != op.d or any(n < 2 for n in N):
        raise ValueError(f"grid N={N} must have {op.d} entries, each >= 2")
    thetas = theta_grid(N)
    energies, frames = _eigh_chunked(fiber_matrices(op, thetas), threads)
    if degeneracy_tol is None:
        diameter = float(energies.max() - energies.min())
        degeneracy_tol = 1e-8 * (diameter if diameter > 0 else 1.0)
    bands = BandStructure(op, N, thetas, energies, frames, degeneracy_tol)
    for k in range(op.d) if axes is None else axes:
        add_velocities(bands, k)
    return bands


def add_velocities(bands: BandStructure, k: int):
    op = bands.op
    k = _check_axis(op, k)
    P = fiber_matrices(op, bands.thetas, axis=k)
    V = bands.frames
    compressed = np.einsum("mji,mjk,mkl->mil", V.conj(), P, V)
    v = np.real(np.einsum("mii->mi", compressed)).copy()
    frames = V
    gaps = np.diff(bands.energies, axis=1)
    degenerate = np.flatnonzero(np.any(gaps < bands.degeneracy_tol, axis=1))
    if len(degenerate):
        frames = V.copy()
        for m in degenerate:
            v[m], frames[m] = band_velocity(bands.energies[m], V[m], P[m], bands.degeneracy_tol)
    bands.velocities[k] = v
    bands.velocity_frames[k] = frames
    return v


def finite_difference_velocities(op: PeriodicJacobiOperator, thetas, k: int, h: float) -> np.ndarray:
    """``(q_k / 2 pi)`` times the central difference of the ordered bands along theta_k."""
    k = _check_axis(op, k)
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    step = np.zeros(op.d)
    step[k] = h
    plus = np.linalg.eigvalsh(fiber_matrices(op, thetas + step))
    minus = np.linalg.eigvalsh(fiber_matrices(op, thetas - step))
    return op.q[k] / (2 * np.pi) * (plus - minus) / (2 * h)


def isolation_gaps(energies: np.ndarray) -> np.ndarray:
    """Distance from each band to its nearest neighbour at the same theta (inf for a single band)."""
    gaps = np.diff(energies, axis=1)
    pad = np.full((len(energies), 1), np.inf)
    return np.minimum(np.hstack([pad, gaps]), np.hstack([gaps, pad]))


def hellmann_feynman_defect(bands: BandStructure, k: int, h: float, min_gap: float = 1e-4,
                            extrapolate: bool = False) -> float:
    """Worst ``|v_{j,k} - finite difference|`` over bands isolated by more than ``min_gap``.

    With ``extrapolate`` the difference quotients at ``h`` and ``h/2`` are
    combined by Richardson extrapolation, which removes the O(h^2) term.
    """
    v = bands.velocities[k] if k in bands.velocities else add_velocities(bands, k)
    fd = finite_difference_velocities(bands.op, bands.thetas, k, h)
    if extrapolate:
        fd = (4 * finite_difference_velocities(bands.op, bands.thetas, k, h / 2) - fd) / 3
    mask = isolation_gaps(bands.energies) > min_gap
    return float(np.max(np.abs(v - fd)[mask], initial=0.0))


@dataclass
class SpectrumIntervals:
    bands: list
    union: list


def spectrum_intervals(bands: BandStructure) -> SpectrumIntervals:
    """Range of each ordered band over the grid, plus the merged union."""
    lo = bands.energies.min(axis=0)
    hi = bands.energies.max(axis=0)
    per_band = [(float(a), float(b)) for a, b in zip(lo, hi)]
    merged = []
    for a, b in sorted(per_band):
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return SpectrumIntervals(per_band, merged)


def kernel_mass_estimate(bands: BandStructure, k: int, eps: float) -> float:
    """Fraction of (band, grid point) pairs with ``|v_{j,k}| < eps``."""
    v = bands.velocities[k] if k in bands.velocities else add_velocities(bands, k)
    return float(np.mean(np.abs(v) < eps))


def write_bands_csv(bands: BandStructure, path):
    d = bands.op.d
    axes = range(d)
    for k in axes:
        if k not in bands.velocities:
            add_velocities(bands, k)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"theta_{i + 1}" for i in axes] + ["j", "E"] + [f"v_{i + 1}" for i in axes])
        for m, theta in enumerate(bands.thetas):
            for j, e in enumerate(bands.energies[m]):
                row = [repr(float(t)) for t in theta] + [j + 1, repr(float(e))]
                row += [repr(float(bands.velocities[k][m, j])) for k in axes]
                writer.writerow(row)
