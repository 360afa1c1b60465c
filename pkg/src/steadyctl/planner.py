"""Maneuver checking and multi-leg transfer planning along a steady path.

A maneuver switches the control from one steady state's value to another's
and succeeds when the state, started at the source steady state, converges
to the target steady state under the new control.  A direct maneuver fails
whenever the source lies outside the target's basin; the planner then
splits the transfer into a finite chain of verified legs along the traced
path, advancing as far per leg as simulation confirms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basin import (
    OrbitEvidence,
    TargetNotStable,
    Verdict,
    in_basin,
)
from .continuation import SteadyPath, state_at
from .maps import ControlledMap, SteadyState, Stability, converge_orbit

__all__ = [
    "Maneuver",
    "PlanStatus",
    "ManeuverPlan",
    "LegReport",
    "VerificationReport",
    "NoProgress",
    "UnstableOnPath",
    "LegBudgetExceeded",
    "check_maneuver",
    "plan_along_path",
    "plan_from_controls",
    "verify_plan",
]

DEFAULT_CONV_TOL = 1e-8
DEFAULT_K_MAX = 100_000
DEFAULT_MAX_LEGS = 64


class NoProgress(RuntimeError):
    """No admissible leg of at least the minimum step succeeded.

    ``stuck_t`` is the arclength where planning stalled and ``evidence``
    summarizes the failing probe orbit.
    """

    def __init__(self, message: str, stuck_t: float, evidence: Optional[OrbitEvidence]):
        super().__init__(message)
        self.stuck_t = stuck_t
        self.evidence = evidence


class UnstableOnPath(RuntimeError):
    """A required path sample is not asymptotically stable."""


class LegBudgetExceeded(RuntimeError):
    """The plan would need more legs than allowed."""


@dataclass(frozen=True, eq=False)
class Maneuver:
    """A checked control switch from ``source`` to ``target``.

    ``success`` records whether the simulated orbit from ``source.x`` under
    ``target.alpha`` actually converged to ``target.x``; ``evidence`` carries
    the orbit summary either way.
    """

    source: SteadyState
    target: SteadyState
    success: bool
    evidence: OrbitEvidence


@dataclass(frozen=True)
class PlanStatus:
    verified: bool
    failed_leg: Optional[int] = None


@dataclass(frozen=True, eq=False)
class ManeuverPlan:
    """An ordered chain of maneuvers; consecutive legs share their endpoint state."""

    legs: tuple
    status: PlanStatus

    @property
    def control_sequence(self) -> tuple:
        """The control values alpha_start, intermediates..., alpha_end."""
        if not self.legs:
            return ()
        return (self.legs[0].source.alpha,) + tuple(l.target.alpha for l in self.legs)

    @property
    def intermediates(self) -> tuple:
        """Control values strictly between the endpoints."""
        return self.control_sequence[1:-1]


@dataclass(frozen=True)
class LegReport:
    index: int
    success: bool
    steps: int
    final_distance: float
    cause: str


@dataclass(frozen=True)
class VerificationReport:
    mode: str
    legs: tuple
    verified: bool
    failed_leg: Optional[int] = None


def check_maneuver(
    m: ControlledMap,
    source: SteadyState,
    target: SteadyState,
    conv_tol: float = DEFAULT_CONV_TOL,
    k_max: int = DEFAULT_K_MAX,
) -> Maneuver:
    """Check a single control switch by simulating the orbit.

    Success means basin membership of the source state confirmed by actual
    convergence to within ``conv_tol`` of the target.  Source and target need
    not lie on the same steady path.  An Undetermined membership counts as
    failure (conservative).

    Raises
    ------
    TargetNotStable
        When the target is not asymptotically stable; switching toward an
        unstable state is not a transfer.
    """
    res = in_basin(m, source.x, target, k_max=k_max, conv_tol=conv_tol)
    success = res.verdict is Verdict.IN and res.evidence.final_distance <= conv_tol
    return Maneuver(source=source, target=target, success=success, evidence=res.evidence)


def _stable_between(path: SteadyPath, t_lo: float, t_hi: float) -> None:
    for s in path.samples:
        if t_lo - 1e-12 <= s.t <= t_hi + 1e-12:
            if s.steady.stability is not Stability.ASYMPTOTICALLY_STABLE:
                raise UnstableOnPath(
                    f"path sample at t={s.t:.6g} (alpha={s.alpha}) is "
                    f"{s.steady.stability.value}; plan only over stable stretches"
                )


def plan_along_path(
    m: ControlledMap,
    path: SteadyPath,
    t_start: float,
    t_end: float,
    min_step: Optional[float] = None,
    conv_tol: float = DEFAULT_CONV_TOL,
    k_max: int = DEFAULT_K_MAX,
    max_legs: int = DEFAULT_MAX_LEGS,
    max_leg: Optional[float] = None,
) -> ManeuverPlan:
    """Plan a chain of successful maneuvers from t_start to t_end on the path.

    Greedy farthest-advance: from the current point, bisection over the
    remaining arclength finds the largest destination whose maneuver check
    succeeds; that leg is emitted and planning repeats from its endpoint.
    Every emitted leg is verified by actual orbit simulation.  Bisection
    assumes feasibility is prefix-monotone in the destination; where it is
    not, the accepted candidate is still simulation-verified, so plans may be
    suboptimal in leg count but never unsound.

    Parameters
    ----------
    min_step : float, optional
        Progress floor (default: polyline length / 1000).  If not even a leg
        of this size succeeds, ``NoProgress`` is raised.
    max_leg : float, optional
        Cap on the arclength advanced per leg.

    Raises
    ------
    NoProgress, UnstableOnPath, LegBudgetExceeded
    """
    t_start = float(t_start)
    t_end = float(t_end)
    if t_start == t_end:
        raise ValueError("t_start and t_end coincide; nothing to plan")
    direction = 1.0 if t_end > t_start else -1.0
    span_lo, span_hi = min(t_start, t_end), max(t_start, t_end)
    if min_step is None:
        min_step = path.polyline.length / 1000.0
    if min_step <= 0:
        raise ValueError("min_step must be positive")
    if max_leg is not None and max_leg < min_step:
        raise ValueError("max_leg must be at least min_step")
    _stable_between(path, span_lo, span_hi)

    cur_t = t_start
    cur_ss = state_at(m, path, t_start)
    legs = []

    def try_leg(src: SteadyState, t_probe: float) -> Maneuver:
        tgt = state_at(m, path, t_probe)
        if tgt.stability is not Stability.ASYMPTOTICALLY_STABLE:
            raise UnstableOnPath(
                f"steady state at t={t_probe:.6g} is {tgt.stability.value}"
            )
        return check_maneuver(m, src, tgt, conv_tol=conv_tol, k_max=k_max)

    while cur_t != t_end:
        remaining = abs(t_end - cur_t)
        reach = remaining if max_leg is None else min(remaining, max_leg)
        t_far = cur_t + direction * reach
        man = try_leg(cur_ss, t_far)
        if man.success:
            chosen_t, chosen = t_far, man
        else:
            # bisect (cur_t, t_far] for the largest advance that still works
            lo, hi = 0.0, reach
            lo_man = None
            while hi - lo > min_step:
                mid = 0.5 * (lo + hi)
                cand = try_leg(cur_ss, cur_t + direction * mid)
                if cand.success:
                    lo, lo_man = mid, cand
                else:
                    hi = mid
            if lo_man is None or lo < min_step:
                # last resort: the canonical minimum step
                cand = try_leg(cur_ss, cur_t + direction * min_step)
                if cand.success:
                    lo, lo_man = min_step, cand
                else:
                    raise NoProgress(
                        f"no maneuver of at least {min_step:.3g} advances from "
                        f"t={cur_t:.6g}",
                        stuck_t=cur_t,
                        evidence=cand.evidence,
                    )
            chosen_t, chosen = cur_t + direction * lo, lo_man
        legs.append(chosen)
        if len(legs) > max_legs:
            raise LegBudgetExceeded(f"plan exceeds {max_legs} legs")
        cur_t, cur_ss = chosen_t, chosen.target

    return ManeuverPlan(legs=tuple(legs), status=PlanStatus(verified=True))


def plan_from_controls(
    m: ControlledMap,
    states: list,
    conv_tol: float = DEFAULT_CONV_TOL,
    k_max: int = DEFAULT_K_MAX,
) -> ManeuverPlan:
    """Build and check a plan through an explicit chain of steady states."""
    if len(states) < 2:
        raise ValueError("need at least two steady states")
    legs = []
    failed = None
    for i in range(len(states) - 1):
        man = check_maneuver(m, states[i], states[i + 1], conv_tol=conv_tol, k_max=k_max)
        legs.append(man)
        if not man.success and failed is None:
            failed = i
    status = PlanStatus(verified=failed is None, failed_leg=failed)
    return ManeuverPlan(legs=tuple(legs), status=status)


def verify_plan(
    m: ControlledMap,
    plan: ManeuverPlan,
    mode: str = "nominal",
    conv_tol: float = DEFAULT_CONV_TOL,
    k_max: int = DEFAULT_K_MAX,
) -> VerificationReport:
    """Re-run a plan's legs by simulation and report per-leg outcomes.

    Nominal mode restarts every leg exactly at its source steady state.
    Chained mode runs one continuous journey: the control switches to the
    next leg's value only once the state is within ``conv_tol`` of the
    current leg's target, and the final state must reach the last target to
    ``conv_tol``.  Failures are reported, not raised.
    """
    if mode not in ("nominal", "chained"):
        raise ValueError("mode must be 'nominal' or 'chained'")
    if not plan.legs:
        raise ValueError("plan has no legs")
    reports = []
    failed = None
    if mode == "nominal":
        for i, leg in enumerate(plan.legs):
            ok, steps, dist, cause = converge_orbit(
                m, leg.source.x, leg.target.alpha, leg.target.x, conv_tol, k_max
            )
            reports.append(LegReport(i, ok, steps, dist, cause))
            if not ok and failed is None:
                failed = i
    else:
        x = plan.legs[0].source.x
        for i, leg in enumerate(plan.legs):
            ok, steps, dist, cause, x = _run_leg(
                m, x, leg.target.alpha, leg.target.x, conv_tol, k_max
            )
            reports.append(LegReport(i, ok, steps, dist, cause))
            if not ok:
                failed = i
                break
    return VerificationReport(
        mode=mode,
        legs=tuple(reports),
        verified=failed is None and len(reports) == len(plan.legs),
        failed_leg=failed,
    )


def _run_leg(m, x, alpha, target_x, tol, k_max):
    """Like ``converge_orbit`` but also hands back the final state."""
    xk = np.asarray(x, dtype=float)
    d = float("inf")
    for k in range(k_max + 1):
        if not np.all(np.isfinite(xk)) or np.linalg.norm(xk) > m.escape_radius:
            return False, k, d, "escaped", xk
        d = float(np.linalg.norm(xk - target_x))
        if d <= tol:
            return True, k, d, "converged", xk
        x_next = np.asarray(m.eval(xk, alpha), dtype=float)
        if np.array_equal(x_next, xk):
            return False, k, d, "stationary", xk
        xk = x_next
    return False, k_max, d, "step_budget", xk
