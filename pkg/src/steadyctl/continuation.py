"""Continuation of steady states along a polyline in control space.

``trace_path`` marches a steady-state branch along a piecewise-linear
control path with a secant predictor and Newton corrector, adapting the
arclength step and annotating every sample with its stability.  Tracing
deliberately continues through loss of stability (unstable samples are
kept and flagged); ``stability_boundary`` then refines the points where
the spectral radius crosses 1.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .maps import (
    ControlledMap,
    NearSingularJacobian,
    NoConvergence,
    SteadyState,
    Stability,
    solve_steady_state,
)

__all__ = [
    "ControlPolyline",
    "PathSample",
    "SteadyPath",
    "BoundaryCrossing",
    "PathLost",
    "BoundaryRefinementFailed",
    "trace_path",
    "stability_boundary",
    "state_at",
]


class PathLost(RuntimeError):
    """Continuation could not advance even at the minimum step.

    Carries the partial path traced so far in ``partial``.
    """

    def __init__(self, message: str, partial: "SteadyPath"):
        super().__init__(message)
        self.partial = partial


class BoundaryRefinementFailed(RuntimeError):
    """The steady-state solve failed inside a crossing bracket.

    ``bracket`` holds the (t_lo, t_hi) interval that could not be refined.
    """

    def __init__(self, message: str, bracket: tuple[float, float]):
        super().__init__(message)
        self.bracket = bracket


@dataclass(frozen=True, eq=False)
class ControlPolyline:
    """A piecewise-linear path in control space, parameterized by arclength.

    ``vertices`` is a tuple of control vectors with at least two entries and
    no repeated consecutive vertex; ``alpha_at(t)`` interpolates for
    ``t in [0, length]``.
    """

    vertices: tuple
    cumulative: np.ndarray

    @classmethod
    def from_points(cls, points) -> "ControlPolyline":
        verts = [np.atleast_1d(np.asarray(p, dtype=float)) for p in points]
        if len(verts) < 2:
            raise ValueError("polyline needs at least 2 vertices")
        m = verts[0].shape[0]
        cum = [0.0]
        for i, v in enumerate(verts):
            if v.shape != (m,):
                raise ValueError("polyline vertices must share one control dimension")
            if not np.all(np.isfinite(v)):
                raise ValueError("polyline vertices must be finite")
            if i > 0:
                seg = float(np.linalg.norm(v - verts[i - 1]))
                if seg == 0.0:
                    raise ValueError(
                        f"consecutive polyline vertices {i - 1} and {i} coincide"
                    )
                cum.append(cum[-1] + seg)
        return cls(vertices=tuple(verts), cumulative=np.array(cum))

    @property
    def control_dim(self) -> int:
        return self.vertices[0].shape[0]

    @property
    def length(self) -> float:
        return float(self.cumulative[-1])

    def alpha_at(self, t: float) -> np.ndarray:
        """Control value at arclength ``t`` along the polyline."""
        t = float(t)
        if t < -1e-12 or t > self.length + 1e-12:
            raise ValueError(f"t={t} outside [0, {self.length}]")
        t = min(max(t, 0.0), self.length)
        i = int(np.searchsorted(self.cumulative, t, side="right")) - 1
        i = min(max(i, 0), len(self.vertices) - 2)
        seg = self.cumulative[i + 1] - self.cumulative[i]
        w = (t - self.cumulative[i]) / seg
        return (1.0 - w) * self.vertices[i] + w * self.vertices[i + 1]


@dataclass(frozen=True, eq=False)
class PathSample:
    """One traced point: arclength ``t``, its control value, and the steady state."""

    t: float
    alpha: np.ndarray
    steady: SteadyState


@dataclass(frozen=True, eq=False)
class BoundaryCrossing:
    """A point where the spectral radius crosses 1 along the path.

    ``direction`` is +1 when the radius increases through 1 with t
    (stability is lost) and -1 when it decreases through 1.
    """

    t: float
    alpha: np.ndarray
    direction: int


@dataclass(frozen=True, eq=False)
class SteadyPath:
    """Samples of a steady-state branch along a control polyline.

    ``samples`` have strictly increasing ``t``; ``all_stable`` reports whether
    every sample is asymptotically stable; ``boundary_events`` are coarse
    (sample-resolution) spectral-radius crossings, refinable with
    :func:`stability_boundary`.
    """

    polyline: ControlPolyline
    samples: tuple
    all_stable: bool
    boundary_events: tuple
    newton_tol: float

    @property
    def t_values(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def t_end(self) -> float:
        return self.samples[-1].t


def _coarse_crossings(samples) -> tuple:
    """Linear-interpolated spectral-radius crossings between samples."""
    events = []
    sig = [s.steady.spectral_radius - 1.0 for s in samples]
    for i in range(len(samples) - 1):
        a, b = sig[i], sig[i + 1]
        if a == 0.0:
            # sample sits exactly on the boundary: a crossing only when the
            # neighbors straddle it (a tangential touch is not one)
            lo = sig[i - 1] if i > 0 else -b
            if lo * b < 0:
                events.append(
                    BoundaryCrossing(
                        t=samples[i].t,
                        alpha=samples[i].alpha,
                        direction=1 if b > lo else -1,
                    )
                )
        elif a * b < 0.0:
            w = a / (a - b)
            t = samples[i].t + w * (samples[i + 1].t - samples[i].t)
            events.append(
                BoundaryCrossing(
                    t=float(t),
                    alpha=samples[i].alpha + w * (samples[i + 1].alpha - samples[i].alpha),
                    direction=1 if b > a else -1,
                )
            )
    return tuple(events)


def trace_path(
    m: ControlledMap,
    seed: SteadyState,
    polyline: ControlPolyline,
    initial_step: Optional[float] = None,
    min_step: Optional[float] = None,
    max_step: Optional[float] = None,
    jump_cap: Optional[float] = None,
    newton_tol: float = 1e-10,
    max_iters: int = 50,
) -> SteadyPath:
    """Trace the steady-state branch through ``seed`` along ``polyline``.

    The predictor is the previous solution (secant extrapolation once two
    samples exist) and the corrector is Newton.  The arclength step halves on
    corrector failure or on a jump-cap violation and doubles (up to
    ``max_step``) after two clean accepts.  Unstable stretches are traced and
    flagged rather than aborted.

    Parameters
    ----------
    jump_cap : float, optional
        Maximum allowed ``||x_new - x_prev||`` per accepted step.  By default
        it adapts to ``10 * initial_step * max(1, local slope)``, which blocks
        silent branch switching near folds.

    Raises
    ------
    PathLost
        When the corrector keeps failing below the minimum step; the partial
        path is attached to the exception.
    """
    L = polyline.length
    if initial_step is None:
        initial_step = L / 100.0
    if min_step is None:
        min_step = L * 1e-6
    if max_step is None:
        max_step = L / 20.0
    if not (0 < min_step <= initial_step <= max_step <= L):
        raise ValueError("need 0 < min_step <= initial_step <= max_step <= length")

    alpha0 = polyline.alpha_at(0.0)
    if np.linalg.norm(seed.alpha - alpha0) > 1e-12:
        raise ValueError("seed.alpha must match the polyline start")
    if seed.residual > newton_tol:
        raise ValueError(
            f"seed residual {seed.residual:.3e} exceeds newton_tol {newton_tol:.3e}"
        )

    samples = [PathSample(t=0.0, alpha=alpha0, steady=seed)]
    ts = [0.0]
    step = float(initial_step)
    clean = 0
    cap = jump_cap  # None -> uncapped until a local slope estimate exists

    def partial() -> SteadyPath:
        return _finish(polyline, samples, newton_tol)

    while ts[-1] < L - 1e-14:
        t_next = min(ts[-1] + step, L)
        # predictor: secant extrapolation when possible, else previous point
        if len(samples) >= 2:
            s0, s1 = samples[-2], samples[-1]
            w = (t_next - s1.t) / (s1.t - s0.t)
            pred = s1.steady.x + w * (s1.steady.x - s0.steady.x)
        else:
            pred = samples[-1].steady.x
        ok = True
        try:
            ss = solve_steady_state(
                m, polyline.alpha_at(t_next), pred, newton_tol, max_iters
            )
        except (NearSingularJacobian, NoConvergence):
            ok = False
        if ok:
            dx = float(np.linalg.norm(ss.x - samples[-1].steady.x))
            if cap is not None and dx > cap:
                ok = False
        if not ok:
            step *= 0.5
            clean = 0
            if step < min_step:
                raise PathLost(
                    f"continuation stalled near t={ts[-1]:.6g} "
                    f"(step fell below {min_step:.3g})",
                    partial(),
                )
            continue

        dt = t_next - ts[-1]
        samples.append(PathSample(t=t_next, alpha=polyline.alpha_at(t_next), steady=ss))
        ts.append(t_next)
        if jump_cap is None:
            slope = dx / dt if dt > 0 else 0.0
            cap = 10.0 * initial_step * max(1.0, slope)
        clean += 1
        if clean >= 2 and step < max_step:
            step = min(step * 2.0, max_step)
            clean = 0
        # Where the spectral radius nears 1 two branches may intersect and the
        # corrector could silently switch branch; shrinking the step with
        # |rho - 1| keeps the predictor error below the branch separation.
        near = abs(ss.spectral_radius - 1.0) * L / 10.0
        step = min(step, max(min_step, L / 4000.0, near))

    return _finish(polyline, samples, newton_tol)


def _finish(polyline, samples, newton_tol) -> SteadyPath:
    return SteadyPath(
        polyline=polyline,
        samples=tuple(samples),
        all_stable=all(
            s.steady.stability is Stability.ASYMPTOTICALLY_STABLE for s in samples
        ),
        boundary_events=_coarse_crossings(samples),
        newton_tol=newton_tol,
    )


def state_at(
    m: ControlledMap,
    path: SteadyPath,
    t: float,
    newton_tol: Optional[float] = None,
) -> SteadyState:
    """Steady state at arclength ``t``, seeded from the traced samples.

    The Newton guess interpolates the two bracketing samples, which keeps the
    solve on the traced branch.
    """
    tol = path.newton_tol if newton_tol is None else newton_tol
    ts = path.t_values
    t = float(t)
    if t < ts[0] - 1e-12 or t > ts[-1] + 1e-12:
        raise ValueError(f"t={t} outside traced range [{ts[0]}, {ts[-1]}]")
    i = min(max(bisect.bisect_right(ts, t) - 1, 0), len(ts) - 2)
    lo, hi = path.samples[i], path.samples[i + 1]
    if abs(t - lo.t) <= 1e-12:
        return lo.steady
    if abs(t - hi.t) <= 1e-12:
        return hi.steady
    w = (t - lo.t) / (hi.t - lo.t)
    guess = (1.0 - w) * lo.steady.x + w * hi.steady.x
    return solve_steady_state(m, path.polyline.alpha_at(t), guess, tol)


def stability_boundary(
    m: ControlledMap,
    path: SteadyPath,
    refine_tol: float = 1e-7,
) -> tuple[BoundaryCrossing, ...]:
    """Refine the points along ``path`` where the spectral radius crosses 1.

    Each sign change of ``rho - 1`` between consecutive samples is bisected in
    arclength, re-solving the steady state at every probe, until the bracket
    is narrower than ``refine_tol``.

    Raises
    ------
    BoundaryRefinementFailed
        When a probe solve fails; the offending bracket is attached.
    """
    if refine_tol <= 0:
        raise ValueError("refine_tol must be positive")
    # Near a crossing that coincides with a branch intersection, the solved-x
    # error grows like tol/|t - t*| and blurs the sign of rho - 1; solving the
    # probes tighter than the trace keeps that noise zone below refine_tol.
    probe_tol = min(path.newton_tol, 1e-13)
    crossings = []
    samples = path.samples
    for i in range(len(samples) - 1):
        lo, hi = samples[i], samples[i + 1]
        s_lo = lo.steady.spectral_radius - 1.0
        s_hi = hi.steady.spectral_radius - 1.0
        if s_lo == 0.0:
            # exact boundary sample: already as refined as it gets
            left = samples[i - 1].steady.spectral_radius - 1.0 if i > 0 else -s_hi
            if left * s_hi < 0:
                crossings.append(
                    BoundaryCrossing(
                        t=lo.t, alpha=lo.alpha, direction=1 if s_hi > left else -1
                    )
                )
            continue
        if s_lo * s_hi >= 0.0:
            continue
        t_a, x_a, sg_a = lo.t, lo.steady.x, np.sign(s_lo)
        t_b, x_b = hi.t, hi.steady.x
        while t_b - t_a > refine_tol:
            t_m = 0.5 * (t_a + t_b)
            w = (t_m - t_a) / (t_b - t_a)
            guess = (1.0 - w) * x_a + w * x_b
            a_m = path.polyline.alpha_at(t_m)
            try:
                ss = solve_steady_state(m, a_m, guess, probe_tol)
            except NoConvergence:
                try:
                    ss = solve_steady_state(m, a_m, guess, path.newton_tol)
                except (NearSingularJacobian, NoConvergence) as exc:
                    raise BoundaryRefinementFailed(
                        f"steady-state solve failed at t={t_m:.9g} while "
                        f"refining a stability crossing",
                        (t_a, t_b),
                    ) from exc
            except NearSingularJacobian as exc:
                raise BoundaryRefinementFailed(
                    f"steady-state solve failed at t={t_m:.9g} while refining "
                    f"a stability crossing",
                    (t_a, t_b),
                ) from exc
            s_m = ss.spectral_radius - 1.0
            if s_m == 0.0:
                t_a = t_b = t_m
                break
            if np.sign(s_m) == sg_a:
                t_a, x_a = t_m, ss.x
            else:
                t_b, x_b = t_m, ss.x
        t_star = 0.5 * (t_a + t_b)
        crossings.append(
            BoundaryCrossing(
                t=t_star,
                alpha=path.polyline.alpha_at(t_star),
                direction=1 if s_hi > s_lo else -1,
            )
        )
    return tuple(crossings)
