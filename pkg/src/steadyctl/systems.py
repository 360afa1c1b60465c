"""Built-in controlled maps and the system registry used by the CLI.

Three benchmark systems ship with the package:

``logistic``
    x_next = alpha * x * (1 - x), the quadratic growth map.  Fixed points
    are 0 and (alpha - 1)/alpha.
``cubic-shift``
    x_next = (x - alpha)^3 + alpha.  Fixed points are alpha and alpha +/- 1;
    orbits have the closed form x_k = (x0 - alpha)^(3^k) + alpha.
``radial-cubic-2d``
    Planar map contracting cubically toward (alpha, alpha) inside the unit
    disc around that point and expanding outside it.

Custom maps are added by code registration (``register_system``), not by
runtime expression parsing; ``make_polynomial_map`` builds one-dimensional
polynomial systems from a coefficient matrix.
"""

from __future__ import annotations

import numpy as np

from .maps import ControlledMap

__all__ = [
    "LOGISTIC",
    "CUBIC_SHIFT",
    "RADIAL_CUBIC_2D",
    "available_systems",
    "get_system",
    "register_system",
    "make_polynomial_map",
]


def _logistic_eval(x, a):
    return np.array([a[0] * x[0] * (1.0 - x[0])])


def _logistic_jac(x, a):
    return np.array([[a[0] * (1.0 - 2.0 * x[0])]])


LOGISTIC = ControlledMap(
    name="logistic",
    state_dim=1,
    control_dim=1,
    eval=_logistic_eval,
    jacobian_x=_logistic_jac,
)


def _cubic_shift_eval(x, a):
    u = x[0] - a[0]
    return np.array([u * u * u + a[0]])


def _cubic_shift_jac(x, a):
    u = x[0] - a[0]
    return np.array([[3.0 * u * u]])


CUBIC_SHIFT = ControlledMap(
    name="cubic-shift",
    state_dim=1,
    control_dim=1,
    eval=_cubic_shift_eval,
    jacobian_x=_cubic_shift_jac,
)


def _radial_cubic_eval(x, a):
    u = x - a[0]
    s = float(u @ u)
    return u * s + a[0]


def _radial_cubic_jac(x, a):
    u = x - a[0]
    s = float(u @ u)
    return s * np.eye(2) + 2.0 * np.outer(u, u)


RADIAL_CUBIC_2D = ControlledMap(
    name="radial-cubic-2d",
    state_dim=2,
    control_dim=1,
    eval=_radial_cubic_eval,
    jacobian_x=_radial_cubic_jac,
)


_REGISTRY: dict[str, ControlledMap] = {
    m.name: m for m in (LOGISTIC, CUBIC_SHIFT, RADIAL_CUBIC_2D)
}


def available_systems() -> tuple[str, ...]:
    """Names of all registered systems, in registration order."""
    return tuple(_REGISTRY)


def get_system(name: str) -> ControlledMap:
    """Look up a registered system by name."""
    try:
        return _REGISTRY[name]
    except KeyError:
        known = ", ".join(available_systems())
        raise KeyError(f"unknown system {name!r} (known: {known})") from None


def register_system(m: ControlledMap, overwrite: bool = False) -> None:
    """Add a map to the registry so the CLI can resolve it by name."""
    if m.name in _REGISTRY and not overwrite:
        raise ValueError(f"system {m.name!r} is already registered")
    _REGISTRY[m.name] = m


def make_polynomial_map(name: str, coeffs, escape_radius: float = 1e6) -> ControlledMap:
    """Build a 1-D polynomial system from a coefficient matrix.

    ``coeffs[i, j]`` multiplies ``x**i * alpha**j``, so
    ``f(x, alpha) = sum_ij coeffs[i, j] * x**i * alpha**j``.  The analytic
    state derivative is generated alongside.
    """
    C = np.atleast_2d(np.asarray(coeffs, dtype=float))
    deg_x, deg_a = C.shape

    def f(x, a):
        xp = x[0] ** np.arange(deg_x)
        ap = a[0] ** np.arange(deg_a)
        return np.array([float(xp @ C @ ap)])

    def jac(x, a):
        if deg_x == 1:
            return np.array([[0.0]])
        xp = x[0] ** np.arange(deg_x - 1)
        ap = a[0] ** np.arange(deg_a)
        D = C[1:, :] * np.arange(1, deg_x)[:, None]
        return np.array([[float(xp @ D @ ap)]])

    return ControlledMap(
        name=name,
        state_dim=1,
        control_dim=1,
        eval=f,
        jacobian_x=jac,
        escape_radius=escape_radius,
    )
