"""Controlled discrete maps: iteration, steady states, and stability.

A controlled map is the update rule ``x_next = f(x, alpha)`` with state
``x`` in R^n and control ``alpha`` in R^m.  This module provides the map
container, orbit iteration with escape/convergence detection, a Newton
solver for steady states (fixed points at a given control value), and
spectral classification of their stability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

__all__ = [
    "ControlledMap",
    "SteadyState",
    "Trajectory",
    "Stability",
    "StepBudget",
    "Escaped",
    "ConvergedTo",
    "NearSingularJacobian",
    "NoConvergence",
    "NonFiniteDerivative",
    "iterate",
    "solve_steady_state",
    "jacobian_x",
    "classify_stability",
    "shift_to_origin",
]

# Optimal central-difference step scale for smooth maps.
_FD_STEP = float(np.cbrt(np.finfo(float).eps))

DEFAULT_MARGIN = 1e-9


class NearSingularJacobian(RuntimeError):
    """Newton met an iterate where ``J - I`` is singular to working precision.

    This typically signals a fold or branch point of the steady-state set.
    """


class NoConvergence(RuntimeError):
    """Newton failed to reach the residual tolerance within the budget."""


class NonFiniteDerivative(RuntimeError):
    """A Jacobian evaluation produced NaN or infinite entries."""


class Stability(Enum):
    ASYMPTOTICALLY_STABLE = "asymptotically_stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


def as_state(x, n: int) -> np.ndarray:
    """Coerce ``x`` to a float vector of length ``n``."""
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.shape != (n,):
        raise ValueError(f"expected state vector of length {n}, got shape {v.shape}")
    return v


def as_control(alpha, m: int) -> np.ndarray:
    """Coerce ``alpha`` to a float vector of length ``m``."""
    v = np.atleast_1d(np.asarray(alpha, dtype=float))
    if v.shape != (m,):
        raise ValueError(f"expected control vector of length {m}, got shape {v.shape}")
    return v


@dataclass(frozen=True, eq=False)
class ControlledMap:
    """A discrete dynamical system with control, ``x_next = f(x, alpha)``.

    Parameters
    ----------
    name : str
        Identifier used by the CLI registry and in reports.
    state_dim, control_dim : int
        Dimensions n and m of the state and control spaces.
    eval : callable
        Pure function ``(x, alpha) -> x_next`` on float vectors.  Must be
        deterministic: identical inputs give bit-identical outputs.
    jacobian_x : callable, optional
        Analytic state Jacobian ``(x, alpha) -> (n, n) array``.  When absent,
        derivatives fall back to central finite differences.
    escape_radius : float
        Norm threshold beyond which an orbit is declared divergent.
    """

    name: str
    state_dim: int
    control_dim: int
    eval: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jacobian_x: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    escape_radius: float = 1e6

    def __post_init__(self):
        if self.state_dim < 1 or self.control_dim < 1:
            raise ValueError("state_dim and control_dim must be positive")
        if self.escape_radius <= 0:
            raise ValueError("escape_radius must be positive")

    def step(self, x: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        """Apply the map once, with shape checks."""
        return np.asarray(
            self.eval(as_state(x, self.state_dim), as_control(alpha, self.control_dim)),
            dtype=float,
        )


@dataclass(frozen=True, eq=False)
class SteadyState:
    """A verified fixed point ``f(x, alpha) = x`` with stability evidence.

    ``residual`` is ``||f(x, alpha) - x||`` at the solution, ``spectral_radius``
    and ``operator_norm`` are taken from the state Jacobian there, and
    ``stability`` classifies the linearization (spectral radius vs. 1, with a
    marginal band of half-width ``margin`` around 1).
    """

    x: np.ndarray
    alpha: np.ndarray
    residual: float
    spectral_radius: float
    operator_norm: float
    stability: Stability

    @property
    def is_stable(self) -> bool:
        return self.stability is Stability.ASYMPTOTICALLY_STABLE


@dataclass(frozen=True)
class StepBudget:
    """Orbit ran for the full step budget without another stop firing."""


@dataclass(frozen=True)
class Escaped:
    """Orbit left the escape radius or produced a non-finite state.

    ``index`` is the position of the offending state in the trajectory.
    """

    index: int


@dataclass(frozen=True, eq=False)
class ConvergedTo:
    """Orbit came within ``tolerance`` of ``target``."""

    target: np.ndarray
    tolerance: float


Termination = Union[StepBudget, Escaped, ConvergedTo]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """An orbit under a fixed control value.

    ``states`` has shape (K+1, n); ``states[k+1]`` is exactly the computed
    image of ``states[k]``.
    """

    alpha: np.ndarray
    states: np.ndarray
    terminated_by: Termination

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self) -> int:
        return self.states.shape[0]


def iterate(
    m: ControlledMap,
    x0,
    alpha,
    max_steps: int,
    stop: Optional[tuple] = None,
) -> Trajectory:
    """Iterate the map from ``x0`` under a fixed control value.

    Stops early when the state norm exceeds the map's escape radius or a
    non-finite value appears (``Escaped``), or when ``stop=(target, tol)`` is
    given and the state comes within ``tol`` of ``target`` (``ConvergedTo``).
    Otherwise runs ``max_steps`` steps (``StepBudget``).
    """
    a = as_control(alpha, m.control_dim)
    x = as_state(x0, m.state_dim)
    target = tol = None
    if stop is not None:
        target, tol = stop
        target = as_state(target, m.state_dim)
        tol = float(tol)

    states = [x]
    term: Termination
    k = 0
    while True:
        xk = states[-1]
        if not np.all(np.isfinite(xk)) or np.linalg.norm(xk) > m.escape_radius:
            term = Escaped(index=len(states) - 1)
            break
        if target is not None and np.linalg.norm(xk - target) < tol:
            term = ConvergedTo(target=target, tolerance=tol)
            break
        if k >= max_steps:
            term = StepBudget()
            break
        states.append(np.asarray(m.eval(xk, a), dtype=float))
        k += 1
    return Trajectory(alpha=a, states=np.array(states), terminated_by=term)


def jacobian_x(m: ControlledMap, x, alpha) -> np.ndarray:
    """State Jacobian of the map at ``(x, alpha)``.

    Uses the analytic Jacobian when the map provides one, else central
    finite differences with per-coordinate step ``cbrt(eps) * max(1, |x_i|)``.
    """
    a = as_control(alpha, m.control_dim)
    v = as_state(x, m.state_dim)
    n = m.state_dim
    if m.jacobian_x is not None:
        J = np.asarray(m.jacobian_x(v, a), dtype=float).reshape(n, n)
    else:
        J = np.empty((n, n))
        for i in range(n):
            h = _FD_STEP * max(1.0, abs(v[i]))
            e = np.zeros(n)
            e[i] = h
            J[:, i] = (
                np.asarray(m.eval(v + e, a), dtype=float)
                - np.asarray(m.eval(v - e, a), dtype=float)
            ) / (2.0 * h)
    if not np.all(np.isfinite(J)):
        raise NonFiniteDerivative(
            f"non-finite Jacobian entries for map {m.name!r} at x={v}, alpha={a}"
        )
    return J


def classify_stability(
    J, margin: float = DEFAULT_MARGIN
) -> tuple[float, float, Stability]:
    """Spectral radius, induced 2-norm, and stability class of a Jacobian.

    The class is asymptotically stable when ``rho < 1 - margin``, unstable
    when ``rho > 1 + margin``, and marginal in between; the band absorbs
    floating-point ambiguity at ``rho = 1``.
    """
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    J = np.atleast_2d(np.asarray(J, dtype=float))
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {J.shape}")
    if not np.all(np.isfinite(J)):
        raise ValueError("Jacobian must be finite")
    if J.shape == (1, 1):
        # eigenvalue and singular value coincide exactly in 1-D
        rho = opnorm = abs(J[0, 0])
    else:
        rho = float(np.max(np.abs(np.linalg.eigvals(J))))
        opnorm = float(np.linalg.norm(J, 2))
    if rho < 1.0 - margin:
        cls = Stability.ASYMPTOTICALLY_STABLE
    elif rho > 1.0 + margin:
        cls = Stability.UNSTABLE
    else:
        cls = Stability.MARGINAL
    return float(rho), float(opnorm), cls


def _residual(m: ControlledMap, x: np.ndarray, a: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(m.eval(x, a), dtype=float) - x))


def _make_steady_state(
    m: ControlledMap, x: np.ndarray, a: np.ndarray, margin: float
) -> SteadyState:
    J = jacobian_x(m, x, a)
    rho, opnorm, cls = classify_stability(J, margin)
    return SteadyState(
        x=x.copy(),
        alpha=a.copy(),
        residual=_residual(m, x, a),
        spectral_radius=rho,
        operator_norm=opnorm,
        stability=cls,
    )


def solve_steady_state(
    m: ControlledMap,
    alpha,
    guess,
    newton_tol: float = 1e-10,
    max_iters: int = 50,
    margin: float = DEFAULT_MARGIN,
) -> SteadyState:
    """Solve ``f(x, alpha) = x`` by Newton iteration from ``guess``.

    Returns a :class:`SteadyState` whose residual is at most ``newton_tol``
    and whose stability data are freshly computed at the solution.

    Raises
    ------
    NearSingularJacobian
        When ``J - I`` is singular to working precision at an iterate.
    NoConvergence
        When the residual tolerance is not met within ``max_iters`` steps.
    """
    if newton_tol <= 0:
        raise ValueError("newton_tol must be positive")
    a = as_control(alpha, m.control_dim)
    x = as_state(guess, m.state_dim)
    if not np.all(np.isfinite(x)):
        raise ValueError("guess must be finite")
    n = m.state_dim
    eye = np.eye(n)

    for _ in range(max_iters + 1):
        fx = np.asarray(m.eval(x, a), dtype=float)
        if not np.all(np.isfinite(fx)):
            raise NoConvergence(
                f"map {m.name!r} produced non-finite values at alpha={a}"
            )
        F = fx - x
        if np.linalg.norm(F) <= newton_tol:
            return _make_steady_state(m, x, a, margin)
        A = jacobian_x(m, x, a) - eye
        smax = float(np.linalg.norm(A, 2))
        smin = float(np.linalg.svd(A, compute_uv=False)[-1])
        if smin <= 1e-12 * max(1.0, smax):
            raise NearSingularJacobian(
                f"I - df/dx singular at x={x}, alpha={a} (sigma_min={smin:.3e})"
            )
        x = x - np.linalg.solve(A, F)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > 1e3 * m.escape_radius:
            raise NoConvergence(f"Newton iterates diverged at alpha={a}")

    raise NoConvergence(
        f"no steady state within {max_iters} Newton steps at alpha={a} "
        f"(last residual {np.linalg.norm(F):.3e})"
    )


def shift_to_origin(m: ControlledMap, ss: SteadyState) -> ControlledMap:
    """Conjugate the map so the given steady state sits at the origin.

    The returned map is ``g(y, alpha) = f(y + x0, alpha) - x0`` with
    ``x0 = ss.x``; at ``ss.alpha`` it fixes the origin up to ``ss.residual``,
    and membership in its basin corresponds to membership in the original
    basin shifted by ``x0``.
    """
    x0 = ss.x.copy()
    f = m.eval
    fj = m.jacobian_x

    def g(y: np.ndarray, a: np.ndarray) -> np.ndarray:
        return np.asarray(f(y + x0, a), dtype=float) - x0

    gj = None
    if fj is not None:
        def gj(y: np.ndarray, a: np.ndarray) -> np.ndarray:  # noqa: F811
            return fj(y + x0, a)

    return ControlledMap(
        name=f"{m.name}@origin",
        state_dim=m.state_dim,
        control_dim=m.control_dim,
        eval=g,
        jacobian_x=gj,
        escape_radius=m.escape_radius,
    )


def norm(v) -> float:
    """Euclidean norm, as used for all residuals and distances here."""
    return float(np.linalg.norm(v))


def _finite(v: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(v)))


def converge_orbit(
    m: ControlledMap,
    x0,
    alpha,
    target_x,
    tol: float,
    k_max: int,
    escape_radius: Optional[float] = None,
) -> tuple[bool, int, float, str]:
    """Run an orbit until it comes within ``tol`` of ``target_x``.

    Lightweight loop (no state storage) shared by membership tests and
    maneuver verification.  Returns ``(converged, steps, final_distance,
    cause)`` with cause in {"converged", "escaped", "step_budget"}.
    """
    a = as_control(alpha, m.control_dim)
    x = as_state(x0, m.state_dim)
    tx = as_state(target_x, m.state_dim)
    esc = m.escape_radius if escape_radius is None else float(escape_radius)
    d = math.inf
    for k in range(k_max + 1):
        if not _finite(x) or np.linalg.norm(x) > esc:
            return False, k, d, "escaped"
        d = float(np.linalg.norm(x - tx))
        if d <= tol:
            return True, k, d, "converged"
        x_next = np.asarray(m.eval(x, a), dtype=float)
        if np.array_equal(x_next, x):
            # pinned on another fixed point to the last bit: never converges
            return False, k, d, "stationary"
        x = x_next
    return False, k_max, d, "step_budget"
