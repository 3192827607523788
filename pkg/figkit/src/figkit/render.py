"""Figure regeneration from exported walking traces.

Input is a directory produced by the lab's export step:

* ``continuous.csv`` - per-tick rows ``t, x, dx, ddx, y, dy, theta, dtheta,
  p, q, z_stance, dz_des, Fx, Fy, Tz, mu_req``;
* ``steps.csv`` - per-step rows ``i, L, T, p0, q0, p_star, D1, D2, Vswing,
  Vavg, alpha``;
* ``summary.json`` - run metadata, optionally carrying the cycle point and
  the constraint bounds used for overlays.

Three figure kinds mirror the usual panels: the phase-plane portrait of the
divergent-vs-convergent components (continuous arcs joined by straight
support-transfer segments), the continuous-time state/force panels, and the
per-step command/state series with cycle values and bounds as horizontal
lines.  Rendering is read-only and deterministic.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "RenderError", "render", "load_trace"]

FIGURE_KINDS = ("phase", "continuous", "steps")

CONTINUOUS_COLUMNS = (
    "t", "x", "dx", "ddx", "y", "dy", "theta", "dtheta",
    "p", "q", "z_stance", "dz_des", "Fx", "Fy", "Tz", "mu_req",
)
STEP_COLUMNS = ("i", "L", "T", "p0", "q0", "p_star", "D1", "D2", "Vswing", "Vavg", "alpha")


class RenderError(ValueError):
    """Missing input files or malformed columns."""


@dataclass(frozen=True)
class FigureSpec:
    input_dir: str
    kind: str
    out_path: str
    cycle_overlay: bool = True
    bound_lines: bool = True
    dpi: int = 130

    def __post_init__(self) -> None:
        if self.kind not in FIGURE_KINDS:
            raise RenderError(f"unknown figure kind {self.kind!r}; use one of {FIGURE_KINDS}")


@dataclass
class Trace:
    continuous: dict[str, np.ndarray]
    steps: dict[str, np.ndarray]
    summary: dict = field(default_factory=dict)

    @property
    def cycle(self) -> dict | None:
        return self.summary.get("cycle")

    @property
    def bounds(self) -> dict | None:
        return self.summary.get("bounds")


def _read_csv(path: str, expected: tuple[str, ...]) -> dict[str, np.ndarray]:
    if not os.path.exists(path):
        raise RenderError(f"missing input file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != expected:
            raise RenderError(
                f"{os.path.basename(path)}: expected columns {','.join(expected)}, "
                f"got {','.join(header or [])}"
            )
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.asarray(rows, dtype=float)
    if data.size == 0:
        raise RenderError(f"{os.path.basename(path)}: no data rows")
    return {name: data[:, k] for k, name in enumerate(expected)}


def load_trace(input_dir: str) -> Trace:
    cont = _read_csv(os.path.join(input_dir, "continuous.csv"), CONTINUOUS_COLUMNS)
    steps = _read_csv(os.path.join(input_dir, "steps.csv"), STEP_COLUMNS)
    summary = {}
    spath = os.path.join(input_dir, "summary.json")
    if os.path.exists(spath):
        with open(spath, "r", encoding="utf-8") as fh:
            summary = json.load(fh)
    return Trace(continuous=cont, steps=steps, summary=summary)


def _stance_segments(z_stance: np.ndarray) -> list[slice]:
    """Continuous-phase index ranges, split where the stance point jumps."""
    breaks = np.flatnonzero(np.diff(z_stance) != 0.0)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks + 1, [len(z_stance)]))
    return [slice(a, b) for a, b in zip(starts, ends)]


def _cycle_loop(cycle: dict, n: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Closed reference loop traced by the cycle point over one step."""
    p_c, q_c, T_c = cycle["p_c"], cycle["q_c"], cycle["T_c"]
    w = math.log(-p_c / q_c) / T_c
    t = np.linspace(0.0, T_c, n)
    p = p_c * np.exp(-w * t)
    q = q_c * np.exp(w * t)
    # straight transfer back to the start point
    p = np.concatenate([p, [p_c]])
    q = np.concatenate([q, [q_c]])
    return p, q


def _render_phase(trace: Trace, spec: FigureSpec, ax) -> None:
    p, q, z = trace.continuous["p"], trace.continuous["q"], trace.continuous["z_stance"]
    path_p: list[float] = []
    path_q: list[float] = []
    for seg in _stance_segments(z):
        path_p.extend(p[seg])
        path_q.extend(q[seg])
        # the support transfer continues as a straight segment into the
        # next arc, so appending arcs back to back draws it implicitly;
        # each jump moves both components by the step displacement
    ax.plot(path_p, path_q, lw=0.9, color="tab:blue", label="trajectory")
    ax.plot(path_p[0], path_q[0], "o", color="tab:green", ms=5, label="start")
    ax.plot(path_p[-1], path_q[-1], "s", color="tab:red", ms=5, label="end")
    if spec.cycle_overlay and trace.cycle:
        cp, cq = _cycle_loop(trace.cycle)
        ax.plot(cp, cq, lw=1.6, color="0.55", ls="--", label="cycle")
        ax.plot([trace.cycle["p_c"]], [trace.cycle["q_c"]], "*", color="0.3", ms=9)
    ax.axhline(0.0, color="0.85", lw=0.6)
    ax.axvline(0.0, color="0.85", lw=0.6)
    ax.set_xlabel("convergent component p [m]")
    ax.set_ylabel("divergent component q [m]")
    ax.legend(loc="best", fontsize=8)


def _render_continuous(trace: Trace, spec: FigureSpec, fig) -> None:
    c = trace.continuous
    panels = [
        (("x", "[m]"), ("dx", "[m/s]")),
        (("y", "[m]"), ("theta", "[rad]")),
        (("Fx", "[N]"), ("Fy", "[N]")),
        (("Tz", "[N m]"), ("dz_des", "[m]")),
    ]
    axes = fig.subplots(len(panels), 2)
    for row, pair in zip(axes, panels):
        for ax, (name, unit) in zip(row, pair):
            ax.plot(c["t"], c[name], lw=0.8)
            ax.set_ylabel(f"{name} {unit}", fontsize=8)
            ax.tick_params(labelsize=7)
    for ax in axes[-1]:
        ax.set_xlabel("t [s]", fontsize=8)


def _render_steps(trace: Trace, spec: FigureSpec, fig) -> None:
    s = trace.steps
    cyc = trace.cycle or {}
    bounds = trace.bounds or {}
    panels = [
        ("L", "[m]", cyc.get("L_c"), bounds.get("L_max")),
        ("T", "[s]", cyc.get("T_c"), bounds.get("T_min_cycle")),
        ("p0", "[m]", cyc.get("p_c"), None),
        ("q0", "[m]", cyc.get("q_c"), None),
        ("D1", "[m]", None, bounds.get("half_L_max")),
        ("D2", "[m]", None, bounds.get("half_L_max")),
        ("Vswing", "[m/s]", None, bounds.get("V_max")),
        ("Vavg", "[m/s]", cyc.get("V_c"), None),
    ]
    axes = fig.subplots(4, 2).ravel()
    for ax, (name, unit, cycle_value, bound) in zip(axes, panels):
        ax.plot(s["i"], s[name], "o-", ms=3, lw=0.8)
        if spec.cycle_overlay and cycle_value is not None:
            ax.axhline(cycle_value, color="0.6", lw=1.2, ls="--")
        if spec.bound_lines and bound is not None:
            ax.axhline(bound, color="tab:red", lw=1.0, ls=":")
            if name in ("D1", "D2"):
                ax.axhline(-bound, color="tab:red", lw=1.0, ls=":")
        ax.set_ylabel(f"{name} {unit}", fontsize=8)
        ax.tick_params(labelsize=7)
    for ax in axes[-2:]:
        ax.set_xlabel("step", fontsize=8)


def render(spec: FigureSpec) -> str:
    """Render one figure and return the written path."""
    trace = load_trace(spec.input_dir)
    if spec.kind == "phase":
        fig, ax = plt.subplots(figsize=(5.2, 4.6))
        _render_phase(trace, spec, ax)
    elif spec.kind == "continuous":
        fig = plt.figure(figsize=(8.0, 7.0))
        _render_continuous(trace, spec, fig)
    else:
        fig = plt.figure(figsize=(8.0, 7.5))
        _render_steps(trace, spec, fig)
    fig.suptitle(
        f"{spec.kind} - {trace.summary.get('controller', 'run')}", fontsize=10
    )
    fig.tight_layout()
    out_dir = os.path.dirname(os.path.abspath(spec.out_path))
    os.makedirs(out_dir, exist_ok=True)
    fig.savefig(spec.out_path, dpi=spec.dpi)
    plt.close(fig)
    return spec.out_path
