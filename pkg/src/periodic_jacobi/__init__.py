"""Floquet-Bloch analysis and ballistic transport for periodic Jacobi operators on Z^d."""

__version__ = "0.1.0"

from .bands import BandStructure, compute_bands, kernel_mass_estimate, spectrum_intervals
from .dynamics import evolve, box_plan, torus_plan
from .floquet import (
    fiber_hamiltonian,
    fiber_velocity,
    floquet_transform,
    gauge_matrix,
    gauged_fiber,
    inverse_floquet_transform,
    verify_block_diagonalization,
)
from .lattice import Box, LatticeState, PeriodicJacobiOperator, Torus, apply_J, apply_P, hopping_at, validate
from .models import free1d, free2d, model_from_name, random_periodic, ssh
from .velocity import apply_Q, asymptotic_velocity, ballistic_report, q_moments

__all__ = [
    "BandStructure",
    "Box",
    "LatticeState",
    "PeriodicJacobiOperator",
    "Torus",
    "apply_J",
    "apply_P",
    "apply_Q",
    "asymptotic_velocity",
    "ballistic_report",
    "box_plan",
    "compute_bands",
    "evolve",
    "fiber_hamiltonian",
    "fiber_velocity",
    "floquet_transform",
    "free1d",
    "free2d",
    "gauge_matrix",
    "gauged_fiber",
    "hopping_at",
    "inverse_floquet_transform",
    "kernel_mass_estimate",
    "model_from_name",
    "q_moments",
    "random_periodic",
    "spectrum_intervals",
    "ssh",
    "torus_plan",
    "validate",
    "verify_block_diagonalization",
]
