"""Scenario files: flat key/value descriptions of a CLI run.

A scenario names a registered system, a seed (initial guess and control
value), a control polyline, tolerance overrides, and output artifacts with
their file paths.  The format is line-oriented ``key = value`` text with
``#`` comments; vector components are whitespace- or comma-separated and
polyline vertices are separated by ``;`` (or ``->``).  Unknown keys are
rejected, naming the key and line.

Example::

    system = cubic-shift
    seed.guess = 0.1
    seed.alpha = 0
    polyline = 0 -> 2
    tolerances.newton_tol = 1e-10
    outputs.plan = out/plan.txt
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .systems import available_systems, get_system

__all__ = ["Scenario", "Tolerances", "ScenarioError", "parse_scenario", "load_scenario"]

OUTPUT_KINDS = (
    "steady",
    "trace",
    "basin",
    "lyapunov",
    "plan",
    "verify",
    "trace_figure",
    "basin_figure",
    "lyapunov_figure",
)


class ScenarioError(ValueError):
    """A scenario file failed to parse or validate."""


@dataclass
class Tolerances:
    newton_tol: float = 1e-10
    conv_tol: float = 1e-8
    tail_tol: float = 1e-12
    bisect_tol: float = 1e-4
    min_step: Optional[float] = None  # default: polyline length / 1000

    def override(self, **kwargs) -> "Tolerances":
        out = Tolerances(**self.__dict__)
        for k, v in kwargs.items():
            if v is not None:
                setattr(out, k, v)
        return out


@dataclass
class Scenario:
    system: Optional[str] = None
    seed_guess: Optional[np.ndarray] = None
    seed_alpha: Optional[np.ndarray] = None
    polyline: Optional[list] = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    outputs: dict = field(default_factory=dict)

    def validate(self) -> None:
        """Check the system resolves and all dimensions agree."""
        if self.system is None:
            return
        try:
            m = get_system(self.system)
        except KeyError:
            known = ", ".join(available_systems())
            raise ScenarioError(
                f"system {self.system!r} is not registered (known: {known})"
            ) from None
        if self.seed_guess is not None and self.seed_guess.shape != (m.state_dim,):
            raise ScenarioError(
                f"seed.guess has {self.seed_guess.size} components; "
                f"system {m.name!r} has state dimension {m.state_dim}"
            )
        if self.seed_alpha is not None and self.seed_alpha.shape != (m.control_dim,):
            raise ScenarioError(
                f"seed.alpha has {self.seed_alpha.size} components; "
                f"system {m.name!r} has control dimension {m.control_dim}"
            )
        if self.polyline is not None:
            for i, v in enumerate(self.polyline):
                if v.shape != (m.control_dim,):
                    raise ScenarioError(
                        f"polyline vertex {i} has {v.size} components; "
                        f"system {m.name!r} has control dimension {m.control_dim}"
                    )


def parse_vector(text: str) -> np.ndarray:
    parts = text.replace(",", " ").split()
    if not parts:
        raise ValueError("empty vector")
    return np.array([float(p) for p in parts])


def parse_polyline_value(text: str) -> list:
    chunks = text.replace("->", ";").split(";")
    return [parse_vector(c) for c in chunks if c.strip()]


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    """Parse scenario text; raise :class:`ScenarioError` naming key and line."""
    sc = Scenario()
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not value:
            raise ScenarioError(f"{source}:{lineno}: key {key!r} has no value")
        if key in seen:
            raise ScenarioError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            _apply(sc, key, value)
        except ScenarioError as exc:
            raise ScenarioError(f"{source}:{lineno}: {exc}") from None
        except ValueError as exc:
            raise ScenarioError(
                f"{source}:{lineno}: bad value for key {key!r}: {exc}"
            ) from None
    sc.validate()
    return sc


def _apply(sc: Scenario, key: str, value: str) -> None:
    if key == "system":
        sc.system = value
    elif key == "seed.guess":
        sc.seed_guess = parse_vector(value)
    elif key == "seed.alpha":
        sc.seed_alpha = parse_vector(value)
    elif key == "polyline":
        verts = parse_polyline_value(value)
        if len(verts) < 2:
            raise ValueError("polyline needs at least 2 vertices")
        sc.polyline = verts
    elif key.startswith("tolerances."):
        name = key[len("tolerances."):]
        if name not in ("newton_tol", "conv_tol", "tail_tol", "bisect_tol", "min_step"):
            raise ScenarioError(f"unknown key {key!r}")
        setattr(sc.tolerances, name, float(value))
    elif key.startswith("outputs."):
        kind = key[len("outputs."):]
        if kind not in OUTPUT_KINDS:
            raise ScenarioError(
                f"unknown key {key!r} (artifacts: {', '.join(OUTPUT_KINDS)})"
            )
        sc.outputs[kind] = value
    else:
        raise ScenarioError(f"unknown key {key!r}")


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_scenario(text, source=str(path))
