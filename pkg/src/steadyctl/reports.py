"""Delimited output files and the plan document format.

All writers produce deterministic text: fixed column orders, shortest
round-trip float formatting, no timestamps.  Files are written atomically
(temp file in the target directory, then rename), so readers never observe
a partial artifact.

The plan document is self-contained: its header carries the system name,
tolerances, verification mode, the seed state, and the control polyline,
so ``verify`` can re-derive every steady state without the original
scenario.  Leg records hold the source and destination control values plus
the simulation evidence.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .basin import BasinSlice, GridMask, Interval, LyapunovStatus, Star
from .continuation import ControlPolyline, SteadyPath
from .maps import Stability
from .planner import ManeuverPlan, VerificationReport
from .scenario import parse_polyline_value, parse_vector

__all__ = [
    "atomic_write_text",
    "fmt",
    "trace_csv",
    "basin_csv",
    "lyapunov_csv",
    "plan_document",
    "PlanDocument",
    "parse_plan_document",
    "load_plan_document",
]

STATUS_LETTER = {
    LyapunovStatus.CONVERGED: "C",
    LyapunovStatus.DIVERGED: "D",
    LyapunovStatus.INCONCLUSIVE: "I",
}


def fmt(v: float) -> str:
    """Shortest round-trip decimal form of a float."""
    return repr(float(v))


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".steadyctl-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_csv(path: SteadyPath) -> str:
    """Traced path as CSV: t, control, state, stability data per sample."""
    m = path.polyline.control_dim
    n = path.samples[0].steady.x.shape[0]
    cols = (
        ["t"]
        + [f"alpha_{i + 1}" for i in range(m)]
        + [f"x_{i + 1}" for i in range(n)]
        + ["spectral_radius", "operator_norm", "stable"]
    )
    lines = [",".join(cols)]
    for s in path.samples:
        st = s.steady
        stable = 1 if st.stability is Stability.ASYMPTOTICALLY_STABLE else 0
        row = (
            [fmt(s.t)]
            + [fmt(a) for a in s.alpha]
            + [fmt(x) for x in st.x]
            + [fmt(st.spectral_radius), fmt(st.operator_norm), str(stable)]
        )
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def basin_csv(slice_: BasinSlice) -> str:
    """Basin geometry as CSV (interval row for 1-D, one row per ray for star)."""
    geom = slice_.geometry
    alpha = slice_.target.alpha
    if isinstance(geom, Interval):
        cols = [f"alpha_{i + 1}" for i in range(alpha.shape[0])] + [
            "lo",
            "hi",
            "lo_open_ended",
            "hi_open_ended",
        ]
        row = (
            [fmt(a) for a in alpha]
            + [fmt(geom.lo), fmt(geom.hi)]
            + [str(int(geom.lo_open_ended)), str(int(geom.hi_open_ended))]
        )
        return ",".join(cols) + "\n" + ",".join(row) + "\n"
    if isinstance(geom, Star):
        n = geom.center.shape[0]
        cols = (
            ["theta_or_dir_index"]
            + [f"d_{i + 1}" for i in range(n)]
            + ["radius", "open_ended"]
        )
        lines = [",".join(cols)]
        for j, d in enumerate(geom.directions):
            label = fmt(float(np.arctan2(d[1], d[0]))) if n == 2 else str(j)
            row = (
                [label]
                + [fmt(c) for c in d]
                + [fmt(geom.radii[j]), str(int(geom.open_ended[j]))]
            )
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"
    if isinstance(geom, GridMask):
        n = len(geom.resolution)
        cols = [f"x_{i + 1}" for i in range(n)] + ["inside"]
        axes = [
            np.linspace(lo, hi, r) for (lo, hi), r in zip(geom.bounds, geom.resolution)
        ]
        lines = [",".join(cols)]
        for idx in np.ndindex(*geom.resolution):
            pt = [axes[i][idx[i]] for i in range(n)]
            lines.append(",".join([fmt(p) for p in pt] + [str(int(geom.cells[idx]))]))
        return "\n".join(lines) + "\n"
    raise TypeError(f"unknown geometry {type(geom).__name__}")


def lyapunov_csv(points: np.ndarray, evaluations) -> str:
    """Sampled series values as CSV rows ``x_1..x_n, V, status``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[1]
    cols = [f"x_{i + 1}" for i in range(n)] + ["V", "status"]
    lines = [",".join(cols)]
    for pt, ev in zip(points, evaluations):
        lines.append(
            ",".join([fmt(x) for x in pt] + [fmt(ev.value), STATUS_LETTER[ev.status]])
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# plan documents


@dataclass
class PlanDocument:
    """Parsed form of a plan document."""

    system: str
    mode: str
    newton_tol: float
    conv_tol: float
    k_max: int
    seed_x: np.ndarray
    polyline: list
    status: str
    legs: list = field(default_factory=list)
    # each leg: dict(index, alpha_from, alpha_to, steps, final_distance, success)


def plan_document(
    system: str,
    plan: ManeuverPlan,
    polyline: ControlPolyline,
    newton_tol: float,
    conv_tol: float,
    k_max: int,
    mode: str = "nominal",
    report: VerificationReport | None = None,
) -> str:
    """Serialize a plan (optionally with a verification report) to text."""
    legs = plan.legs
    m = legs[0].source.alpha.shape[0]
    head = [
        "# steadyctl plan document v1",
        f"system = {system}",
        f"mode = {mode}",
        f"newton_tol = {fmt(newton_tol)}",
        f"conv_tol = {fmt(conv_tol)}",
        f"k_max = {k_max}",
        "seed_x = " + " ".join(fmt(v) for v in legs[0].source.x),
        "polyline = " + " ; ".join(" ".join(fmt(c) for c in v) for v in polyline.vertices),
    ]
    if report is not None:
        verified = report.verified
        per_leg = [(r.steps, r.final_distance, r.success) for r in report.legs]
        per_leg += [(0, float("nan"), False)] * (len(legs) - len(per_leg))
    else:
        verified = plan.status.verified
        per_leg = [(l.evidence.steps, l.evidence.final_distance, l.success) for l in legs]
    head.append(f"status = {'verified' if verified else 'failed'}")
    cols = (
        ["leg_index"]
        + [f"alpha_from_{i + 1}" for i in range(m)]
        + [f"alpha_to_{i + 1}" for i in range(m)]
        + ["steps", "final_distance", "success"]
    )
    lines = head + [",".join(cols)]
    for i, leg in enumerate(legs):
        steps, dist, success = per_leg[i]
        row = (
            [str(i)]
            + [fmt(a) for a in leg.source.alpha]
            + [fmt(a) for a in leg.target.alpha]
            + [str(steps), fmt(dist), str(int(success))]
        )
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def parse_plan_document(text: str, source: str = "<plan>") -> PlanDocument:
    header: dict[str, str] = {}
    legs = []
    in_legs = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not in_legs and line.startswith("leg_index,"):
            in_legs = True
            continue
        if in_legs:
            parts = [p.strip() for p in line.split(",")]
            m = (len(parts) - 4) // 2
            if len(parts) != 4 + 2 * m:
                raise ValueError(f"{source}:{lineno}: malformed leg record")
            legs.append(
                {
                    "index": int(parts[0]),
                    "alpha_from": np.array([float(p) for p in parts[1 : 1 + m]]),
                    "alpha_to": np.array([float(p) for p in parts[1 + m : 1 + 2 * m]]),
                    "steps": int(parts[1 + 2 * m]),
                    "final_distance": float(parts[2 + 2 * m]),
                    "success": parts[3 + 2 * m] == "1",
                }
            )
        else:
            if "=" not in line:
                raise ValueError(f"{source}:{lineno}: expected 'key = value'")
            key, value = (p.strip() for p in line.split("=", 1))
            header[key] = value
    required = ("system", "mode", "newton_tol", "conv_tol", "k_max", "seed_x", "polyline", "status")
    for key in required:
        if key not in header:
            raise ValueError(f"{source}: plan document lacks header key {key!r}")
    if not legs:
        raise ValueError(f"{source}: plan document has no leg records")
    return PlanDocument(
        system=header["system"],
        mode=header["mode"],
        newton_tol=float(header["newton_tol"]),
        conv_tol=float(header["conv_tol"]),
        k_max=int(header["k_max"]),
        seed_x=parse_vector(header["seed_x"]),
        polyline=parse_polyline_value(header["polyline"]),
        status=header["status"],
        legs=legs,
    )


def load_plan_document(path) -> PlanDocument:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_plan_document(fh.read(), source=str(path))
