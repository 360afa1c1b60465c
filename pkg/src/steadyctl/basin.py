"""Basin-of-attraction machinery for asymptotically stable steady states.

The central object is the series ``V(x) = sum_k ||f^k(x, alpha) - x*||^2``
summed along the orbit of ``x`` under the target's control value.  It is
zero at the steady state, finite exactly on the basin, and grows without
bound toward the basin boundary, which makes it both a convergence
certificate and a basin probe.

Finite iteration cannot decide boundary-adjacent points, so membership is
three-valued (In / Out / Undetermined) and the geometric estimates below
are inner approximations: an interval in 1-D, star-shaped ray estimates or
a grid mask in higher dimensions.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from .maps import (
    ControlledMap,
    DEFAULT_MARGIN,
    SteadyState,
    as_state,
    jacobian_x,
)

__all__ = [
    "LyapunovStatus",
    "LyapunovEvaluation",
    "Verdict",
    "OrbitEvidence",
    "MembershipResult",
    "Interval",
    "Star",
    "GridMask",
    "BasinSlice",
    "TargetNotStable",
    "NotConverged",
    "ContractionBallNotFound",
    "certify_contraction_ball",
    "lyapunov_value",
    "functional_residual",
    "in_basin",
    "estimate_interval_1d",
    "estimate_star",
    "estimate_grid",
]

DEFAULT_K_MAX = 100_000
DEFAULT_TAIL_TOL = 1e-12
DEFAULT_VALUE_CAP = 1e12
DEFAULT_CONV_TOL = 1e-8
DEFAULT_BISECT_TOL = 1e-4
DEFAULT_R_PROBE_MAX = 1e3


class TargetNotStable(RuntimeError):
    """The operation requires an asymptotically stable target state."""


class NotConverged(RuntimeError):
    """A required Lyapunov evaluation did not converge."""


class ContractionBallNotFound(RuntimeError):
    """No sampled ball around the target certified a Jacobian norm below 1."""


class LyapunovStatus(Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    INCONCLUSIVE = "inconclusive"


class Verdict(Enum):
    IN = "in"
    OUT = "out"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class LyapunovEvaluation:
    """Outcome of summing the squared-distance series along an orbit.

    ``value`` is the partial sum over ``terms_used`` terms in fixed
    ascending-k order; on convergence ``tail_bound`` dominates the unsummed
    remainder.  ``cause`` explains divergence ("escaped", "non_finite",
    "value_cap").
    """

    value: float
    terms_used: int
    tail_bound: float
    status: LyapunovStatus
    cause: Optional[str] = None


@dataclass(frozen=True)
class OrbitEvidence:
    """Summary of the orbit behind a membership or maneuver verdict."""

    steps: int
    final_distance: float
    cause: str


@dataclass(frozen=True)
class MembershipResult:
    verdict: Verdict
    evidence: OrbitEvidence


@dataclass(frozen=True)
class Interval:
    """1-D basin estimate: the open interval (lo, hi) around the target.

    An open-ended flag means the probe budget was exhausted while still
    inside the basin, i.e. the basin extends at least to the probe limit on
    that side.
    """

    lo: float
    hi: float
    lo_open_ended: bool = False
    hi_open_ended: bool = False


@dataclass(frozen=True, eq=False)
class Star:
    """Star-shaped inner basin estimate: per-ray admissible radii."""

    center: np.ndarray
    directions: np.ndarray  # (k, n) unit vectors
    radii: np.ndarray  # (k,)
    open_ended: np.ndarray  # (k,) bool


@dataclass(frozen=True, eq=False)
class GridMask:
    """Boolean membership mask over a rectangular grid of probe points."""

    bounds: tuple  # ((lo, hi) per state dimension)
    resolution: tuple  # points per dimension
    cells: np.ndarray  # boolean, shape == resolution


Geometry = Union[Interval, Star, GridMask]


@dataclass(frozen=True, eq=False)
class BasinSlice:
    """Basin geometry estimate for one steady state."""

    target: SteadyState
    geometry: Geometry
    method: str
    probe_tol: float


# ---------------------------------------------------------------------------
# contraction ball certification

# Memo of certified balls keyed by map and target identity; the certificate is
# a deterministic function of its inputs, so caching only skips recompute.
_BALL_CACHE = weakref.WeakKeyDictionary()


def _ball_probes(n: int) -> np.ndarray:
    """Unit probe directions used to sample the Jacobian norm in a ball."""
    dirs = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        dirs.extend([e, -e])
    if n >= 2:
        d = np.ones(n) / math.sqrt(n)
        dirs.extend([d, -d])
        alt = np.array([1.0 if i % 2 == 0 else -1.0 for i in range(n)]) / math.sqrt(n)
        dirs.extend([alt, -alt])
    return np.array(dirs)


def certify_contraction_ball(
    m: ControlledMap,
    target: SteadyState,
    r_init: float = 1.0,
    margin: float = DEFAULT_MARGIN,
) -> tuple[float, float]:
    """Find a radius around the target where the Jacobian norm stays below 1.

    Samples ``||df/dx||`` on rays around ``target.x`` and halves the radius
    until the sampled maximum is at most ``q = (1 + rho)/2 < 1``.  Orbits that
    enter the returned ball contract at factor ``q`` per step, so entry
    certifies convergence to the target.

    Returns ``(r_loc, q)``.  The certificate is sampled, not rigorous, and
    requires the Jacobian norm to approach ``rho`` near the target (true for
    normal Jacobians; a strongly non-normal map can defeat it).
    """
    if target.stability.value != "asymptotically_stable":
        raise TargetNotStable(
            f"spectral radius {target.spectral_radius:.6g} is not below 1"
        )
    per_map = _BALL_CACHE.get(m)
    if per_map is not None:
        hit = per_map.get(target)
        if hit is not None and hit[0] == r_init:
            return hit[1], hit[2]

    q = 0.5 * (1.0 + target.spectral_radius)
    probes = _ball_probes(m.state_dim)
    fractions = (1.0, 2.0 / 3.0, 1.0 / 3.0)
    a = target.alpha
    r = float(r_init)
    for _ in range(80):
        worst = float(np.linalg.norm(jacobian_x(m, target.x, a), 2))
        if worst <= q:
            for d in probes:
                for frac in fractions:
                    J = jacobian_x(m, target.x + r * frac * d, a)
                    worst = max(worst, float(np.linalg.norm(J, 2)))
                    if worst > q:
                        break
                if worst > q:
                    break
        if worst <= q:
            if per_map is None:
                per_map = _BALL_CACHE[m] = weakref.WeakKeyDictionary()
            per_map[target] = (r_init, r, q)
            return r, q
        r *= 0.5
    raise ContractionBallNotFound(
        f"could not certify a contraction ball around x={target.x} "
        f"(rho={target.spectral_radius:.6g})"
    )


# ---------------------------------------------------------------------------
# Lyapunov series


def lyapunov_value(
    m: ControlledMap,
    x,
    target: SteadyState,
    k_max: int = DEFAULT_K_MAX,
    tail_tol: float = DEFAULT_TAIL_TOL,
    value_cap: float = DEFAULT_VALUE_CAP,
    escape_radius: Optional[float] = None,
) -> LyapunovEvaluation:
    """Sum ``||f^k(x, alpha) - target.x||^2`` along the orbit of ``x``.

    Terms are added in fixed ascending-k order (bit-reproducible).  Once the
    orbit enters the certified contraction ball with factor ``q``, the tail is
    bounded by ``d^2 q^2 / (1 - q^2)`` and summation stops as soon as that
    bound drops to ``tail_tol`` (status Converged).  Escape, non-finite
    arithmetic, or a partial sum above ``value_cap`` give Diverged; exhausting
    ``k_max`` gives Inconclusive.
    """
    if tail_tol <= 0:
        raise ValueError("tail_tol must be positive")
    a = target.alpha
    tx = target.x
    xk = as_state(x, m.state_dim)
    esc = m.escape_radius if escape_radius is None else float(escape_radius)

    r_loc = q = None
    if target.stability.value == "asymptotically_stable":
        r_loc, q = certify_contraction_ball(m, target)
        tail_factor = q * q / (1.0 - q * q)

    value = 0.0
    for k in range(k_max + 1):
        if not np.all(np.isfinite(xk)):
            return LyapunovEvaluation(value, k, math.inf, LyapunovStatus.DIVERGED, "non_finite")
        if np.linalg.norm(xk) > esc:
            return LyapunovEvaluation(value, k, math.inf, LyapunovStatus.DIVERGED, "escaped")
        d = float(np.linalg.norm(xk - tx))
        value += d * d
        if value > value_cap:
            return LyapunovEvaluation(value, k + 1, math.inf, LyapunovStatus.DIVERGED, "value_cap")
        if d == 0.0:
            return LyapunovEvaluation(value, k + 1, 0.0, LyapunovStatus.CONVERGED)
        if r_loc is not None and d <= r_loc:
            tail = d * d * tail_factor
            if tail <= tail_tol:
                return LyapunovEvaluation(value, k + 1, tail, LyapunovStatus.CONVERGED)
        x_next = np.asarray(m.eval(xk, a), dtype=float)
        if np.array_equal(x_next, xk):
            # pinned on another fixed point: the remaining terms never decay
            return LyapunovEvaluation(value, k + 1, math.inf, LyapunovStatus.DIVERGED, "stationary")
        xk = x_next
    return LyapunovEvaluation(value, k_max + 1, math.inf, LyapunovStatus.INCONCLUSIVE)


def functional_residual(
    m: ControlledMap,
    x,
    target: SteadyState,
    k_max: int = DEFAULT_K_MAX,
    tail_tol: float = DEFAULT_TAIL_TOL,
    value_cap: float = DEFAULT_VALUE_CAP,
) -> float:
    """Defect of the one-step functional equation of the series at ``x``.

    Returns ``|V(f(x)) - V(x) + ||x - target.x||^2|``, which is bounded by
    twice the summed tail bounds of the two evaluations.

    Raises
    ------
    NotConverged
        When either evaluation fails to converge.
    """
    xv = as_state(x, m.state_dim)
    ex = lyapunov_value(m, xv, target, k_max, tail_tol, value_cap)
    if ex.status is not LyapunovStatus.CONVERGED:
        raise NotConverged(f"series did not converge at x={xv} ({ex.status.value})")
    fx = np.asarray(m.eval(xv, target.alpha), dtype=float)
    efx = lyapunov_value(m, fx, target, k_max, tail_tol, value_cap)
    if efx.status is not LyapunovStatus.CONVERGED:
        raise NotConverged(f"series did not converge at f(x)={fx} ({efx.status.value})")
    d = float(np.linalg.norm(xv - target.x))
    return abs(efx.value - ex.value + d * d)


# ---------------------------------------------------------------------------
# membership


def in_basin(
    m: ControlledMap,
    x,
    target: SteadyState,
    k_max: int = DEFAULT_K_MAX,
    conv_tol: float = DEFAULT_CONV_TOL,
    escape_radius: Optional[float] = None,
) -> MembershipResult:
    """Decide whether ``x`` lies in the basin of attraction of ``target``.

    The orbit is In once it enters the certified contraction ball (entry
    guarantees convergence; the orbit is then run on to within ``conv_tol``
    of the target so the evidence records an actual approach).  Escape gives
    Out, and exhausting ``k_max`` gives Undetermined, which callers should
    treat as failure.

    Raises
    ------
    TargetNotStable
        When the target is not asymptotically stable; membership is only
        meaningful for attracting states.
    """
    if target.stability.value != "asymptotically_stable":
        raise TargetNotStable(
            f"target at alpha={target.alpha} has spectral radius "
            f"{target.spectral_radius:.6g}; basin membership needs an "
            f"asymptotically stable target"
        )
    r_loc, q = certify_contraction_ball(m, target)
    a = target.alpha
    tx = target.x
    esc = m.escape_radius if escape_radius is None else float(escape_radius)
    xk = as_state(x, m.state_dim)

    d = math.inf
    for k in range(k_max + 1):
        if not np.all(np.isfinite(xk)) or np.linalg.norm(xk) > esc:
            return MembershipResult(Verdict.OUT, OrbitEvidence(k, d, "escaped"))
        d = float(np.linalg.norm(xk - tx))
        if d <= r_loc:
            steps, d = _polish_to(m, xk, a, tx, max(conv_tol, 0.0), q, d)
            return MembershipResult(Verdict.IN, OrbitEvidence(k + steps, d, "converged"))
        x_next = np.asarray(m.eval(xk, a), dtype=float)
        if np.array_equal(x_next, xk):
            # pinned on another fixed point outside the contraction ball
            return MembershipResult(Verdict.UNDETERMINED, OrbitEvidence(k, d, "stationary"))
        xk = x_next
    return MembershipResult(Verdict.UNDETERMINED, OrbitEvidence(k_max, d, "step_budget"))


def _polish_to(m, xk, a, tx, tol, q, d) -> tuple[int, float]:
    """Continue a ball-interior orbit until within ``tol`` of the target."""
    if d <= tol or tol <= 0.0:
        return 0, d
    budget = int(math.ceil(math.log(tol / d) / math.log(q))) + 64
    steps = 0
    for _ in range(budget):
        xk = np.asarray(m.eval(xk, a), dtype=float)
        steps += 1
        d = float(np.linalg.norm(xk - tx))
        if d <= tol:
            break
    return steps, d


# ---------------------------------------------------------------------------
# geometry estimates


def _ray_extent(
    probe_in, r_probe_max: float, bisect_tol: float, r_init: float
) -> tuple[float, bool]:
    """Largest In radius along one ray: doubling expansion then bisection."""
    r_in = 0.0
    r = min(r_init, r_probe_max)
    r_out = None
    while True:
        if probe_in(r):
            r_in = r
            if r >= r_probe_max:
                return r_in, True
            r = min(2.0 * r, r_probe_max)
        else:
            r_out = r
            break
    while r_out - r_in > bisect_tol:
        mid = 0.5 * (r_in + r_out)
        if probe_in(mid):
            r_in = mid
        else:
            r_out = mid
    return r_in, False


def estimate_interval_1d(
    m: ControlledMap,
    target: SteadyState,
    r_probe_max: float = DEFAULT_R_PROBE_MAX,
    bisect_tol: float = DEFAULT_BISECT_TOL,
    r_init: float = 1e-3,
    k_max: int = DEFAULT_K_MAX,
    conv_tol: float = DEFAULT_CONV_TOL,
) -> BasinSlice:
    """Estimate the basin interval around a stable 1-D steady state.

    Expands outward from the target by doubling on each side until a probe
    is no longer In (Undetermined counts as Out, keeping the estimate
    conservative), then bisects the bracket to ``bisect_tol`` and returns the
    certified-In endpoint.  A side still In at ``r_probe_max`` is reported
    open-ended at that extent.
    """
    if m.state_dim != 1:
        raise ValueError("interval estimation requires a 1-D state space")
    if bisect_tol <= 0 or r_probe_max <= 0:
        raise ValueError("bisect_tol and r_probe_max must be positive")
    x0 = float(target.x[0])

    def prober(side: float):
        def probe_in(r: float) -> bool:
            res = in_basin(
                m, np.array([x0 + side * r]), target, k_max=k_max, conv_tol=conv_tol
            )
            return res.verdict is Verdict.IN

        return probe_in

    r_hi, hi_open = _ray_extent(prober(+1.0), r_probe_max, bisect_tol, r_init)
    r_lo, lo_open = _ray_extent(prober(-1.0), r_probe_max, bisect_tol, r_init)
    geom = Interval(
        lo=x0 - r_lo, hi=x0 + r_hi, lo_open_ended=lo_open, hi_open_ended=hi_open
    )
    return BasinSlice(target=target, geometry=geom, method="interval-1d", probe_tol=bisect_tol)


def _sphere_directions(n: int, k: int) -> np.ndarray:
    """k unit directions: uniform on the circle for n=2, low-discrepancy
    (Sobol points through the normal inverse CDF) on the sphere for n>2."""
    if n == 2:
        theta = 2.0 * np.pi * np.arange(k) / k
        return np.column_stack([np.cos(theta), np.sin(theta)])
    from scipy.stats import qmc
    from scipy.special import ndtri

    sampler = qmc.Sobol(d=n, scramble=False)
    pts = sampler.random_base2(max(4, int(np.ceil(np.log2(2 * k + 8)))))
    z = ndtri(np.clip(pts, 1e-12, 1.0 - 1e-12))
    norms = np.linalg.norm(z, axis=1)
    z = z[norms > 1e-9]  # the leading Sobol points can map to the origin
    return z[:k] / np.linalg.norm(z[:k], axis=1, keepdims=True)


def estimate_star(
    m: ControlledMap,
    target: SteadyState,
    num_rays: int = 16,
    r_max: float = DEFAULT_R_PROBE_MAX,
    bisect_tol: float = DEFAULT_BISECT_TOL,
    r_init: float = 1e-3,
    k_max: int = DEFAULT_K_MAX,
    conv_tol: float = DEFAULT_CONV_TOL,
) -> BasinSlice:
    """Star-shaped inner basin estimate for a stable target with n >= 2.

    Bisects the largest In radius independently along ``num_rays`` unit
    directions from the target.  Each ray probe is self-contained, so the
    result is a deterministic function of the inputs.
    """
    if m.state_dim < 2:
        raise ValueError("star estimation requires state dimension >= 2")
    if num_rays < 4:
        raise ValueError("num_rays must be at least 4")
    dirs = _sphere_directions(m.state_dim, num_rays)
    radii = np.empty(num_rays)
    open_ended = np.zeros(num_rays, dtype=bool)
    for j, d in enumerate(dirs):
        def probe_in(r: float) -> bool:
            res = in_basin(m, target.x + r * d, target, k_max=k_max, conv_tol=conv_tol)
            return res.verdict is Verdict.IN

        radii[j], open_ended[j] = _ray_extent(probe_in, r_max, bisect_tol, r_init)
    geom = Star(center=target.x.copy(), directions=dirs, radii=radii, open_ended=open_ended)
    return BasinSlice(target=target, geometry=geom, method="star", probe_tol=bisect_tol)


def estimate_grid(
    m: ControlledMap,
    target: SteadyState,
    bounds,
    resolution,
    k_max: int = DEFAULT_K_MAX,
    conv_tol: float = DEFAULT_CONV_TOL,
) -> BasinSlice:
    """Membership mask on a rectangular grid (fallback for non-star basins).

    ``bounds`` is one (lo, hi) pair per state dimension and ``resolution`` the
    number of probe points per dimension.  Cells are probed in row-major
    order; each probe is independent.
    """
    n = m.state_dim
    bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
    if len(bounds) != n:
        raise ValueError(f"need {n} (lo, hi) bound pairs")
    if isinstance(resolution, int):
        resolution = (resolution,) * n
    resolution = tuple(int(r) for r in resolution)
    axes = [np.linspace(lo, hi, r) for (lo, hi), r in zip(bounds, resolution)]
    cells = np.zeros(resolution, dtype=bool)
    for idx in np.ndindex(*resolution):
        pt = np.array([axes[i][idx[i]] for i in range(n)])
        res = in_basin(m, pt, target, k_max=k_max, conv_tol=conv_tol)
        cells[idx] = res.verdict is Verdict.IN
    geom = GridMask(bounds=bounds, resolution=resolution, cells=cells)
    return BasinSlice(target=target, geometry=geom, method="grid", probe_tol=0.0)
