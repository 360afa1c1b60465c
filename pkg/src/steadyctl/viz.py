"""Matplotlib figures for traces, basin estimates, and series samples.

Rendering is optional at the CLI (``--plot``); matplotlib is imported
lazily with the Agg backend so data-only runs never touch a display.
Figures are written next to the delimited output they illustrate.
"""

from __future__ import annotations

import numpy as np

from .basin import BasinSlice, GridMask, Interval, LyapunovStatus, Star
from .continuation import SteadyPath
from .maps import Stability

__all__ = ["save_trace_figure", "save_basin_figure", "save_lyapunov_figure"]


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def save_trace_figure(path: SteadyPath, outfile, title: str = "") -> None:
    """Steady-state branch and spectral radius along the traced path."""
    plt = _plt()
    t = np.array([s.t for s in path.samples])
    x = np.array([s.steady.x for s in path.samples])
    rho = np.array([s.steady.spectral_radius for s in path.samples])
    stable = np.array(
        [s.steady.stability is Stability.ASYMPTOTICALLY_STABLE for s in path.samples]
    )
    fig, (ax0, ax1) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    for i in range(x.shape[1]):
        ax0.plot(t, x[:, i], "-", color="0.8", lw=1)
        ax0.plot(t[stable], x[stable, i], "k.", ms=4, label=f"x_{i + 1} (stable)" if i == 0 else None)
        ax0.plot(t[~stable], x[~stable, i], ".", color="0.6", ms=4,
                 label=f"x_{i + 1} (unstable)" if i == 0 else None)
    ax0.set_ylabel("steady state")
    ax0.grid(alpha=0.3)
    ax0.legend(loc="best", fontsize=8)
    ax1.plot(t, rho, "b-", lw=1.2)
    ax1.axhline(1.0, color="r", ls="--", lw=0.8)
    for ev in path.boundary_events:
        ax1.axvline(ev.t, color="r", ls=":", lw=0.8)
    ax1.set_xlabel("arclength t along control path")
    ax1.set_ylabel("spectral radius")
    ax1.grid(alpha=0.3)
    if title:
        ax0.set_title(title)
    fig.tight_layout()
    fig.savefig(outfile, dpi=150)
    plt.close(fig)


def save_basin_figure(slice_: BasinSlice, outfile, title: str = "") -> None:
    """Basin estimate: interval segment (1-D) or ray polygon (2-D and up)."""
    plt = _plt()
    geom = slice_.geometry
    fig, ax = plt.subplots(figsize=(6, 5))
    if isinstance(geom, Interval):
        x0 = float(slice_.target.x[0])
        ax.hlines(0.0, geom.lo, geom.hi, color="b", lw=3)
        ax.plot([x0], [0.0], "k*", ms=12)
        for edge, open_ended in ((geom.lo, geom.lo_open_ended), (geom.hi, geom.hi_open_ended)):
            marker = ">" if open_ended and edge == geom.hi else ("<" if open_ended else "|")
            ax.plot([edge], [0.0], marker, color="r", ms=10)
        ax.set_yticks([])
        ax.set_xlabel("x")
    elif isinstance(geom, Star):
        pts = geom.center[None, :2] + geom.radii[:, None] * geom.directions[:, :2]
        closed = np.vstack([pts, pts[:1]])
        ax.plot(closed[:, 0], closed[:, 1], "b-", lw=1.2)
        ax.fill(closed[:, 0], closed[:, 1], alpha=0.15, color="b")
        ax.plot([geom.center[0]], [geom.center[1]], "k*", ms=12)
        ax.set_aspect("equal")
        ax.set_xlabel("x_1")
        ax.set_ylabel("x_2")
    elif isinstance(geom, GridMask):
        (xlo, xhi), (ylo, yhi) = geom.bounds[:2]
        ax.imshow(
            geom.cells.T.astype(float),
            origin="lower",
            extent=(xlo, xhi, ylo, yhi),
            cmap="Blues",
            aspect="auto",
        )
        ax.set_xlabel("x_1")
        ax.set_ylabel("x_2")
    ax.grid(alpha=0.3)
    ax.set_title(title or f"basin estimate ({slice_.method})")
    fig.tight_layout()
    fig.savefig(outfile, dpi=150)
    plt.close(fig)


def save_lyapunov_figure(points, evaluations, outfile, title: str = "") -> None:
    """Series values over the sampled segment (1-D) or grid (2-D)."""
    plt = _plt()
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    vals = np.array(
        [ev.value if ev.status is LyapunovStatus.CONVERGED else np.nan for ev in evaluations]
    )
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    if pts.shape[1] == 1:
        ax.plot(pts[:, 0], vals, "b.-", ms=3, lw=0.8)
        ax.set_xlabel("x")
        ax.set_ylabel("V")
        ax.set_yscale("log")
    else:
        sc = ax.scatter(pts[:, 0], pts[:, 1], c=vals, s=14, cmap="viridis")
        fig.colorbar(sc, ax=ax, label="V")
        ax.set_xlabel("x_1")
        ax.set_ylabel("x_2")
    ax.grid(alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(outfile, dpi=150)
    plt.close(fig)
