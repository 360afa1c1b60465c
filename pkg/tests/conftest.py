"""Shared fixtures: solved steady states and traced paths for the built-ins.

Everything here is pure and deterministic, so fixtures are session-scoped
to keep the suite fast.
"""

import numpy as np
import pytest

from steadyctl import (
    CUBIC_SHIFT,
    LOGISTIC,
    RADIAL_CUBIC_2D,
    ControlPolyline,
    solve_steady_state,
    trace_path,
)


@pytest.fixture(scope="session")
def logistic_target_a2():
    return solve_steady_state(LOGISTIC, 2.0, 0.6)


@pytest.fixture(scope="session")
def cubic_target_a0():
    return solve_steady_state(CUBIC_SHIFT, 0.0, 0.1)


@pytest.fixture(scope="session")
def radial_target_a0():
    return solve_steady_state(RADIAL_CUBIC_2D, 0.0, [0.1, -0.1])


@pytest.fixture(scope="session")
def logistic_phi3_path():
    """Stable stretch of the nontrivial logistic branch, alpha 1.05..2.95."""
    pl = ControlPolyline.from_points([[1.05], [2.95]])
    seed = solve_steady_state(LOGISTIC, 1.05, 0.05)
    return trace_path(LOGISTIC, seed, pl, initial_step=0.02, max_step=0.05)


@pytest.fixture(scope="session")
def cubic_phi1_path():
    """Always-stable identity branch of the cubic map, alpha 0..2."""
    pl = ControlPolyline.from_points([[0.0], [2.0]])
    seed = solve_steady_state(CUBIC_SHIFT, 0.0, 0.1)
    return trace_path(CUBIC_SHIFT, seed, pl, initial_step=0.02, max_step=0.05)


@pytest.fixture(scope="session")
def radial_path():
    """Stable diagonal branch of the planar map, alpha -1..1."""
    pl = ControlPolyline.from_points([[-1.0], [1.0]])
    seed = solve_steady_state(RADIAL_CUBIC_2D, -1.0, [-0.9, -1.1])
    return trace_path(RADIAL_CUBIC_2D, seed, pl, initial_step=0.02, max_step=0.05)


def closed_form_cubic(x0: float, alpha: float, k: int) -> float:
    """Exact orbit of the cubic map: (x0 - alpha)**(3**k) + alpha."""
    return (x0 - alpha) ** (3 ** k) + alpha


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
