"""Command-line front end.

Subcommands, each a thin orchestration of the library modules:

- ``steady``   solve one steady state and print it
- ``trace``    continue a steady branch along a control polyline (CSV)
- ``basin``    estimate the basin around a steady state (CSV)
- ``lyapunov`` sample the convergence series on a segment or grid (CSV)
- ``plan``     synthesize a verified maneuver chain (plan document)
- ``verify``   re-run a stored plan document leg by leg

Inputs come from an optional scenario file plus flag overrides.  Exit
status is 0 on success, 1 on a domain failure (e.g. planning stalled,
verification failed), and 2 on usage or configuration errors.  With
``--plot``, matplotlib figures are rendered next to the delimited output.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

import numpy as np

from . import basin as basin_mod
from . import reports, viz
from .continuation import ControlPolyline, stability_boundary, state_at, trace_path
from .maps import ControlledMap, SteadyState, Stability, solve_steady_state
from .planner import Maneuver, ManeuverPlan, PlanStatus, plan_along_path, verify_plan
from .basin import OrbitEvidence
from .scenario import Scenario, ScenarioError, load_scenario, parse_vector
from .systems import available_systems, get_system

__all__ = ["main", "run", "build_parser"]


class UsageError(Exception):
    """Invalid flag/scenario combination; maps to exit status 2."""


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("scenario", nargs="?", help="scenario file (key = value text)")
    p.add_argument("--system", help="registered system name")
    p.add_argument("--alpha", help="control vector, e.g. '2.0' or '0.5,0.5'")
    p.add_argument("--guess", help="state-space guess for the steady-state solve")
    p.add_argument("--from", dest="from_", metavar="VEC", help="start control value")
    p.add_argument("--to", dest="to", metavar="VEC", help="end control value")
    p.add_argument("--newton-tol", type=float, default=None)
    p.add_argument("--conv-tol", type=float, default=None)
    p.add_argument("--tail-tol", type=float, default=None)
    p.add_argument("--bisect-tol", type=float, default=None)
    p.add_argument("--min-step", type=float, default=None)
    p.add_argument("--k-max", type=int, default=100_000)
    p.add_argument("--out", help="output file (default: scenario output path or stdout)")
    p.add_argument("--plot", action="store_true", help="render a figure next to the output")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="steadyctl",
        description=(
            "Steady states of controlled discrete maps: continuation, basin "
            "estimation, and maneuver planning."
        ),
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("steady", help="solve one steady state and print it")
    _add_common(p)
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("trace", help="trace a steady branch along a control polyline")
    _add_common(p)
    p.add_argument("--initial-step", type=float, default=None)
    p.add_argument("--max-step", type=float, default=None)
    p.add_argument("--refine-tol", type=float, default=1e-7,
                   help="arclength tolerance for stability crossings")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("basin", help="estimate the basin of attraction")
    _add_common(p)
    p.add_argument("--rays", type=int, default=16, help="ray count for 2-D and up")
    p.add_argument("--r-max", type=float, default=1e3, help="probe radius limit")
    p.set_defaults(func=cmd_basin)

    p = sub.add_parser("lyapunov", help="sample the convergence series V")
    _add_common(p)
    p.add_argument("--samples", type=int, default=101, help="points along a 1-D segment")
    p.add_argument("--grid", type=int, default=41, help="points per axis for a 2-D grid")
    p.set_defaults(func=cmd_lyapunov)

    p = sub.add_parser("plan", help="plan a verified maneuver chain along a path")
    _add_common(p)
    p.add_argument("--initial-step", type=float, default=None)
    p.add_argument("--max-step", type=float, default=None)
    p.add_argument("--max-leg", type=float, default=None,
                   help="cap on arclength advanced per leg")
    p.add_argument("--max-legs", type=int, default=64)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("verify", help="re-run a stored plan document")
    p.add_argument("plan", help="plan document path")
    p.add_argument("--mode", choices=("nominal", "chained"), default=None,
                   help="verification mode (default: the document's)")
    p.add_argument("--conv-tol", type=float, default=None)
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--out", help="write an updated plan document here")
    p.set_defaults(func=cmd_verify)

    return ap


# ---------------------------------------------------------------------------
# shared resolution helpers


def _load(args) -> Scenario:
    if getattr(args, "scenario", None):
        return load_scenario(args.scenario)
    return Scenario()


def _map_of(args, sc: Scenario) -> ControlledMap:
    name = args.system or sc.system
    if not name:
        raise UsageError("no system given (use --system or a scenario file)")
    try:
        return get_system(name)
    except KeyError:
        raise UsageError(
            f"unknown system {name!r} (known: {', '.join(available_systems())})"
        ) from None


def _vec(text: Optional[str], fallback, what: str, dim: int) -> np.ndarray:
    if text is not None:
        try:
            v = parse_vector(text)
        except ValueError as exc:
            raise UsageError(f"bad {what}: {exc}") from None
    elif fallback is not None:
        v = np.asarray(fallback, dtype=float)
    else:
        raise UsageError(f"no {what} given")
    if v.shape != (dim,):
        raise UsageError(f"{what} needs {dim} component(s), got {v.size}")
    return v


def _tols(args, sc: Scenario):
    return sc.tolerances.override(
        newton_tol=args.newton_tol,
        conv_tol=getattr(args, "conv_tol", None),
        tail_tol=getattr(args, "tail_tol", None),
        bisect_tol=getattr(args, "bisect_tol", None),
        min_step=getattr(args, "min_step", None),
    )


def _polyline_of(args, sc: Scenario, m: ControlledMap) -> ControlPolyline:
    if args.from_ is not None or args.to is not None:
        if args.from_ is None or args.to is None:
            raise UsageError("--from and --to must be given together")
        pts = [
            _vec(args.from_, None, "--from", m.control_dim),
            _vec(args.to, None, "--to", m.control_dim),
        ]
    elif sc.polyline is not None:
        pts = sc.polyline
    else:
        raise UsageError("no control path given (use --from/--to or a scenario polyline)")
    try:
        return ControlPolyline.from_points(pts)
    except ValueError as exc:
        raise UsageError(f"invalid polyline: {exc}") from None


def _solve_seed(m, polyline, args, sc, tols) -> SteadyState:
    alpha0 = polyline.alpha_at(0.0)
    if sc.seed_alpha is not None and np.linalg.norm(sc.seed_alpha - alpha0) > 1e-12:
        raise UsageError("scenario seed.alpha does not match the polyline start")
    guess = _vec(args.guess, sc.seed_guess, "state guess (--guess)", m.state_dim)
    return solve_steady_state(m, alpha0, guess, tols.newton_tol)


def _emit(args, sc: Scenario, kind: str, text: str) -> Optional[str]:
    """Write text to the resolved output path, or stdout; returns the path."""
    out = args.out or sc.outputs.get(kind)
    if out is None:
        sys.stdout.write(text)
        return None
    reports.atomic_write_text(out, text)
    print(f"wrote {out}")
    return out


def _figure_path(args, sc: Scenario, kind: str, out: Optional[str]) -> Optional[str]:
    if not args.plot:
        return sc.outputs.get(f"{kind}_figure")
    fig = sc.outputs.get(f"{kind}_figure")
    if fig is None:
        if out is None:
            raise UsageError("--plot needs --out (or a *_figure output in the scenario)")
        fig = os.path.splitext(out)[0] + ".png"
    return fig


# ---------------------------------------------------------------------------
# commands


def cmd_steady(args) -> int:
    sc = _load(args)
    m = _map_of(args, sc)
    tols = _tols(args, sc)
    alpha = _vec(args.alpha, sc.seed_alpha, "control value (--alpha)", m.control_dim)
    guess = _vec(args.guess, sc.seed_guess, "state guess (--guess)", m.state_dim)
    ss = solve_steady_state(m, alpha, guess, tols.newton_tol)
    lines = [
        f"system = {m.name}",
        "alpha = " + " ".join(reports.fmt(a) for a in ss.alpha),
        "x = " + " ".join(reports.fmt(v) for v in ss.x),
        f"residual = {reports.fmt(ss.residual)}",
        f"spectral_radius = {reports.fmt(ss.spectral_radius)}",
        f"operator_norm = {reports.fmt(ss.operator_norm)}",
        f"stability = {ss.stability.value}",
    ]
    text = "\n".join(lines) + "\n"
    _emit(args, sc, "steady", text)
    return 0


def cmd_trace(args) -> int:
    sc = _load(args)
    m = _map_of(args, sc)
    tols = _tols(args, sc)
    polyline = _polyline_of(args, sc, m)
    seed = _solve_seed(m, polyline, args, sc, tols)
    path = trace_path(
        m,
        seed,
        polyline,
        initial_step=args.initial_step,
        max_step=args.max_step,
        newton_tol=tols.newton_tol,
    )
    crossings = stability_boundary(m, path, refine_tol=args.refine_tol)
    out = _emit(args, sc, "trace", reports.trace_csv(path))
    print(f"samples = {len(path.samples)}  all_stable = {int(path.all_stable)}")
    for c in crossings:
        print(
            f"stability crossing at t = {reports.fmt(c.t)}  alpha = "
            + " ".join(reports.fmt(a) for a in c.alpha)
            + f"  direction = {'+1' if c.direction > 0 else '-1'}"
        )
    fig = _figure_path(args, sc, "trace", out)
    if fig:
        viz.save_trace_figure(path, fig, title=m.name)
        print(f"wrote {fig}")
    return 0


def _target_of(args, sc, m, tols) -> SteadyState:
    alpha = _vec(args.alpha, sc.seed_alpha, "control value (--alpha)", m.control_dim)
    guess = _vec(args.guess, sc.seed_guess, "state guess (--guess)", m.state_dim)
    return solve_steady_state(m, alpha, guess, tols.newton_tol)


def cmd_basin(args) -> int:
    sc = _load(args)
    m = _map_of(args, sc)
    tols = _tols(args, sc)
    target = _target_of(args, sc, m, tols)
    if m.state_dim == 1:
        slice_ = basin_mod.estimate_interval_1d(
            m,
            target,
            r_probe_max=args.r_max,
            bisect_tol=tols.bisect_tol,
            k_max=args.k_max,
            conv_tol=tols.conv_tol,
        )
    else:
        slice_ = basin_mod.estimate_star(
            m,
            target,
            num_rays=args.rays,
            r_max=args.r_max,
            bisect_tol=tols.bisect_tol,
            k_max=args.k_max,
            conv_tol=tols.conv_tol,
        )
    out = _emit(args, sc, "basin", reports.basin_csv(slice_))
    fig = _figure_path(args, sc, "basin", out)
    if fig:
        viz.save_basin_figure(slice_, fig, title=m.name)
        print(f"wrote {fig}")
    return 0


def cmd_lyapunov(args) -> int:
    sc = _load(args)
    m = _map_of(args, sc)
    tols = _tols(args, sc)
    target = _target_of(args, sc, m, tols)
    if args.from_ is None or args.to is None:
        raise UsageError("lyapunov needs --from and --to state points")
    lo = _vec(args.from_, None, "--from", m.state_dim)
    hi = _vec(args.to, None, "--to", m.state_dim)
    if m.state_dim == 1:
        pts = np.linspace(lo[0], hi[0], args.samples)[:, None]
    elif m.state_dim == 2:
        gx = np.linspace(lo[0], hi[0], args.grid)
        gy = np.linspace(lo[1], hi[1], args.grid)
        pts = np.array([[x, y] for x in gx for y in gy])
    else:
        raise UsageError("lyapunov sampling supports 1-D segments and 2-D grids")
    evals = [
        basin_mod.lyapunov_value(m, p, target, k_max=args.k_max, tail_tol=tols.tail_tol)
        for p in pts
    ]
    out = _emit(args, sc, "lyapunov", reports.lyapunov_csv(pts, evals))
    fig = _figure_path(args, sc, "lyapunov", out)
    if fig:
        viz.save_lyapunov_figure(pts, evals, fig, title=m.name)
        print(f"wrote {fig}")
    return 0


def cmd_plan(args) -> int:
    sc = _load(args)
    m = _map_of(args, sc)
    tols = _tols(args, sc)
    polyline = _polyline_of(args, sc, m)
    seed = _solve_seed(m, polyline, args, sc, tols)
    path = trace_path(
        m,
        seed,
        polyline,
        initial_step=args.initial_step,
        max_step=args.max_step,
        newton_tol=tols.newton_tol,
    )
    plan = plan_along_path(
        m,
        path,
        0.0,
        path.t_end,
        min_step=tols.min_step,
        conv_tol=tols.conv_tol,
        k_max=args.k_max,
        max_legs=args.max_legs,
        max_leg=args.max_leg,
    )
    doc = reports.plan_document(
        system=m.name,
        plan=plan,
        polyline=polyline,
        newton_tol=tols.newton_tol,
        conv_tol=tols.conv_tol,
        k_max=args.k_max,
        mode="nominal",
    )
    out = _emit(args, sc, "plan", doc)
    seqs = [" ".join(reports.fmt(a) for a in alpha) for alpha in plan.control_sequence]
    print(f"plan: {len(plan.legs)} leg(s), control sequence " + " -> ".join(seqs))
    return 0


def cmd_verify(args) -> int:
    doc = reports.load_plan_document(args.plan)
    try:
        m = get_system(doc.system)
    except KeyError:
        raise UsageError(f"plan document names unknown system {doc.system!r}") from None
    mode = args.mode or doc.mode
    conv_tol = args.conv_tol if args.conv_tol is not None else doc.conv_tol
    k_max = args.k_max if args.k_max is not None else doc.k_max

    polyline = ControlPolyline.from_points(doc.polyline)
    seed = solve_steady_state(m, polyline.alpha_at(0.0), doc.seed_x, doc.newton_tol)
    path = trace_path(m, seed, polyline, newton_tol=doc.newton_tol)
    plan = _rebuild_plan(m, path, doc)
    report = verify_plan(m, plan, mode, conv_tol=conv_tol, k_max=k_max)

    for leg in report.legs:
        print(
            f"leg {leg.index}: {'ok' if leg.success else 'FAILED'} "
            f"steps={leg.steps} final_distance={reports.fmt(leg.final_distance)} "
            f"cause={leg.cause}"
        )
    print(f"verification ({mode}): {'verified' if report.verified else 'failed'}")
    if args.out:
        updated = reports.plan_document(
            system=m.name,
            plan=plan,
            polyline=polyline,
            newton_tol=doc.newton_tol,
            conv_tol=conv_tol,
            k_max=k_max,
            mode=mode,
            report=report,
        )
        reports.atomic_write_text(args.out, updated)
        print(f"wrote {args.out}")
    return 0 if report.verified else 1


def _locate_t(polyline: ControlPolyline, alpha: np.ndarray) -> float:
    """Arclength of a control value lying on the polyline."""
    tol = 1e-9 * (1.0 + float(np.linalg.norm(alpha)))
    for i in range(len(polyline.vertices) - 1):
        v0 = polyline.vertices[i]
        v1 = polyline.vertices[i + 1]
        seg = v1 - v0
        seg_len = float(np.linalg.norm(seg))
        s = float((alpha - v0) @ seg) / (seg_len * seg_len)
        if -1e-12 <= s <= 1.0 + 1e-12:
            s = min(max(s, 0.0), 1.0)
            if np.linalg.norm(v0 + s * seg - alpha) <= tol:
                return float(polyline.cumulative[i]) + s * seg_len
    raise UsageError(
        "plan document is inconsistent: control value "
        + " ".join(reports.fmt(a) for a in alpha)
        + " does not lie on its polyline"
    )


def _rebuild_plan(m: ControlledMap, path, doc: reports.PlanDocument) -> ManeuverPlan:
    """Reconstruct chained steady states for the document's leg records."""
    for prev, rec in zip(doc.legs, doc.legs[1:]):
        if not np.array_equal(prev["alpha_to"], rec["alpha_from"]):
            raise UsageError(
                f"plan document is inconsistent: leg {rec['index']} does not "
                f"start where leg {prev['index']} ends"
            )
    ts = [_locate_t(path.polyline, doc.legs[0]["alpha_from"])]
    for rec in doc.legs:
        ts.append(_locate_t(path.polyline, rec["alpha_to"]))
    states = [state_at(m, path, t) for t in ts]
    for ss, rec in zip(states[1:], doc.legs):
        if ss.stability is not Stability.ASYMPTOTICALLY_STABLE:
            raise UsageError(
                "plan document is inconsistent: steady state at alpha "
                + " ".join(reports.fmt(a) for a in rec["alpha_to"])
                + " is not asymptotically stable"
            )
    legs = tuple(
        Maneuver(
            source=states[i],
            target=states[i + 1],
            success=rec["success"],
            evidence=OrbitEvidence(rec["steps"], rec["final_distance"], "document"),
        )
        for i, rec in enumerate(doc.legs)
    )
    return ManeuverPlan(legs=legs, status=PlanStatus(verified=all(r["success"] for r in doc.legs)))


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
