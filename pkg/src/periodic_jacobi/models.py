"""Builtin operators addressable by name, e.g. ``"ssh(1,2)"`` or ``"random_periodic(2,[2,2],7)"``."""
from __future__ import annotations

import ast
import re

import numpy as np

from .lattice import PeriodicJacobiOperator


def free(d: int = 1) -> PeriodicJacobiOperator:
    """Discrete Laplacian-type operator: all hoppings 1, no potential."""
    q = (1,) * d
    return PeriodicJacobiOperator.from_arrays(q, np.ones(q + (d,)), np.zeros(q))


def free1d() -> PeriodicJacobiOperator:
    return free(1)


def free2d() -> PeriodicJacobiOperator:
    return free(2)


def ssh(t1: float = 1.0, t2: float = 2.0) -> PeriodicJacobiOperator:
    """Dimerised chain with ``a_{0,1} = t1`` and ``a_{1,2} = t2``."""
    return PeriodicJacobiOperator.from_arrays((2,), [[t1], [t2]], [0.0, 0.0])


def random_periodic(d: int, q, seed: int = 0) -> PeriodicJacobiOperator:
    """Seeded random complex hoppings and real potential.

    Hopping moduli are uniform in [0.5, 1], phases uniform, potentials
    uniform in [-0.5, 0.5], so the coefficients sit on the scale of the free
    operator.
    """
    q = tuple(int(n) for n in np.atleast_1d(q))
    if len(q) != d:
        raise ValueError(f"period {q} does not have {d} entries")
    rng = np.random.Generator(np.random.PCG64(seed))
    moduli = rng.uniform(0.5, 1.0, size=q + (d,))
    phases = rng.uniform(0.0, 2 * np.pi, size=q + (d,))
    potential = rng.uniform(-0.5, 0.5, size=q)
    return PeriodicJacobiOperator.from_arrays(q, moduli * np.exp(1j * phases), potential)


BUILTIN = {
    "free1d": free1d,
    "free2d": free2d,
    "free": free,
    "ssh": ssh,
    "random_periodic": random_periodic,
}

_NAME = re.compile(r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*(?:\((.*)\))?\s*$")


def model_from_name(spec: str) -> PeriodicJacobiOperator:
    m = _NAME.match(spec)
    if not m or m.group(1) not in BUILTIN:
        raise ValueError(f"unknown model {spec!r}; known: {', '.join(sorted(BUILTIN))}")
    args = ()
    if m.group(2) is not None and m.group(2).strip():
        try:
            args = ast.literal_eval("(" + m.group(2) + ",)")
        except (SyntaxError, ValueError) as exc:
            raise ValueError(f"cannot parse arguments of {spec!r}") from exc
    return BUILTIN[m.group(1)](*args)
