import numpy as np
import pytest
from hypothesis import strategies as st

from periodic_jacobi import PeriodicJacobiOperator, LatticeState
from periodic_jacobi.models import free1d, free2d, random_periodic, ssh


def builtin_models():
    return {
        "free1d": free1d(),
        "free2d": free2d(),
        "ssh": ssh(1, 2),
        "random1": random_periodic(1, [3], 0),
        "random2": random_periodic(2, [2, 2], 0),
    }


@pytest.fixture(params=sorted(builtin_models()))
def model(request):
    return builtin_models()[request.param]


@st.composite
def operators(draw, max_d=2, max_q=3):
    """Random valid operators with hoppings bounded away from zero."""
    d = draw(st.integers(1, max_d))
    q = tuple(draw(st.lists(st.integers(1, max_q), min_size=d, max_size=d)))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    mod = rng.uniform(0.2, 2.0, size=q + (d,))
    hop = mod * np.exp(2j * np.pi * rng.uniform(size=q + (d,)))
    pot = rng.uniform(-2, 2, size=q)
    return PeriodicJacobiOperator.from_arrays(q, hop, pot)


def random_state(geometry, rng):
    amp = rng.standard_normal(geometry.shape) + 1j * rng.standard_normal(geometry.shape)
    return LatticeState(geometry, amp / np.linalg.norm(amp))


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def record(label, ok, detail):
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
