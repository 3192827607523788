"""Scenario configuration, benchmark orchestration and trace export.

Scenarios are flat ``key = value`` text files with dotted keys (a JSON
mirror with the same keys is accepted interchangeably); absent keys fall
back to the benchmark defaults: a 0.5 m / 0.4 s forward cycle at 1 m CoM
height, the standard start posture, harmonic height/angular references and
a 20-step horizon.  The benchmark applies a scaled standard push
(10 N.s forward, 10 N.s downward, 10 N.m.s pitch) in the middle of step 7
and summarizes recovery, steady walking and constraint violations.
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
import os
from dataclasses import dataclass, field, replace

from .cycles import CycleSpec, simple_cycle_from_speed, simple_cycle_from_step
from .momentum import PQState, WalkerParams
from .simulation import (
    CONTINUOUS_COLUMNS,
    CONTROLLERS,
    STEP_COLUMNS,
    ImpulseEvent,
    ReferenceTrajectories,
    RigidBodyState,
    SimConfig,
    SimTrace,
    run_walk,
)

__all__ = [
    "Scenario",
    "RunSummary",
    "ScenarioError",
    "STANDARD_IMPULSE",
    "BENCHMARK_STARTS",
    "BACKWARD_STARTS",
    "default_scenario",
    "benchmark_scenario",
    "load_scenario",
    "run_scenario",
    "run_benchmark",
    "export_trace",
]

STANDARD_IMPULSE = (10.0, -10.0, -10.0)  # [N.s, N.s, N.m.s]
STANDARD_IMPULSE_STEP = 7
STANDARD_IMPULSE_ONSET = 0.15
STANDARD_IMPULSE_DURATION = 0.05

# boundary start states (p0, q0, x0, z_swing) used in the benchmark runs
BENCHMARK_STARTS = {
    "cop": (-0.5, 0.3),
    "steplen": (-0.49, 0.29),
    "steptime": (-0.705, 0.505),
    "combined": (-0.67, 0.47),
    "optimal": (-0.67, 0.47),
    "openloop": (-0.5, 0.3),
}
BACKWARD_STARTS = {
    "steplen": (0.49, -0.29),
    "combined": (0.57, -0.37),
    "optimal": (0.57, -0.37),
}


class ScenarioError(ValueError):
    """Malformed scenario file or invalid field combination."""


@dataclass
class Scenario:
    params: WalkerParams = field(default_factory=WalkerParams)
    cycle: CycleSpec | None = None
    controller: str = "cop"
    n_steps: int = 20
    start_pq: tuple[float, float] | None = (-0.5, 0.3)
    start_x: float | None = None
    start_xdot: float | None = None
    z_stance: float = 0.0
    z_swing: float = -0.2
    y0: float = 0.95
    ydot0: float = 0.0
    theta0: float = -0.175
    thetadot0: float = 0.0
    refs: ReferenceTrajectories = field(default_factory=ReferenceTrajectories)
    impulses: list[ImpulseEvent] = field(default_factory=list)
    sim: SimConfig = field(default_factory=SimConfig)
    seed: int = 0  # reserved; runs are deterministic

    def __post_init__(self) -> None:
        if self.controller not in CONTROLLERS:
            raise ScenarioError(f"unknown controller {self.controller!r}")
        if self.n_steps < 1:
            raise ScenarioError("n_steps must be >= 1")
        if self.cycle is None:
            self.cycle = simple_cycle_from_step(0.5, 0.4, self.params)
        if self.start_pq is None and (self.start_x is None or self.start_xdot is None):
            raise ScenarioError("start needs either (p, q) or (x, xdot)")

    def start_state(self) -> RigidBodyState:
        w = self.params.omega
        if self.start_pq is not None:
            p0, q0 = self.start_pq
            x = self.z_stance + 0.5 * (p0 + q0)
            xdot = 0.5 * w * (q0 - p0)
        else:
            x, xdot = self.start_x, self.start_xdot
        return RigidBodyState(
            x=x, xdot=xdot, y=self.y0, ydot=self.ydot0,
            theta=self.theta0, thetadot=self.thetadot0,
            z_stance=self.z_stance, z_swing=self.z_swing,
        )


def default_scenario() -> Scenario:
    return Scenario()


def benchmark_scenario(controller: str, backward: bool = False) -> Scenario:
    """Benchmark setup for one controller: its boundary start state (or the
    mirrored backward start) with the standard references."""
    starts = BACKWARD_STARTS if backward else BENCHMARK_STARTS
    if controller not in starts:
        raise ScenarioError(
            f"no {'backward ' if backward else ''}benchmark start for {controller!r}"
        )
    p0, q0 = starts[controller]
    sc = Scenario(controller=controller, start_pq=(p0, q0))
    if backward:
        sc.z_swing = 0.2
        sc.theta0 = -0.175
    return sc


# ---------------------------------------------------------------------------
# scenario files


_SCHEMA_HELP = (
    "params.{h,g,M,I,L_max,V_max,T_0,dz_min,dz_max}, cycle.{L,T|V}, "
    "controller, n_steps, start.{p,q|x,xdot}, start.{z_stance,z_swing,y,ydot,theta,thetadot}, "
    "refs.{A_y,phi_y,A_H,phi_H}, impulse.{dLx,dLy,dHz,step,onset,duration}, "
    "sim.{dt,cop_gain,replan_interval}, seed"
)


def _parse_flat(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if not key or not val:
            raise ScenarioError(f"line {lineno}: empty key or value in {raw!r}")
        values[key] = val
    return values


def _flatten_json(obj, prefix="") -> dict[str, str]:
    flat: dict[str, str] = {}
    for key, val in obj.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            flat.update(_flatten_json(val, prefix=f"{name}."))
        else:
            flat[name] = str(val)
    return flat


def load_scenario(path: str) -> Scenario:
    """Parse a scenario file; unknown keys and bad values are reported with
    their key names."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        flat = _flatten_json(json.loads(text))
    else:
        flat = _parse_flat(text)
    return scenario_from_mapping(flat)


def _pop_float(flat: dict[str, str], key: str) -> float | None:
    if key not in flat:
        return None
    val = flat.pop(key)
    try:
        return float(val)
    except ValueError as err:
        raise ScenarioError(f"key {key!r}: expected a number, got {val!r}") from err


def scenario_from_mapping(flat: dict[str, str]) -> Scenario:
    flat = dict(flat)
    pkw = {}
    for name in ("h", "g", "M", "I", "L_max", "V_max", "T_0", "dz_min", "dz_max"):
        v = _pop_float(flat, f"params.{name}")
        if v is not None:
            pkw[name] = v
    try:
        params = WalkerParams(**pkw)
    except ValueError as err:
        raise ScenarioError(str(err)) from err

    L = _pop_float(flat, "cycle.L")
    T = _pop_float(flat, "cycle.T")
    V = _pop_float(flat, "cycle.V")
    if T is not None and V is not None:
        raise ScenarioError("give cycle.T or cycle.V, not both")
    if L is None:
        L = 0.5
    if V is not None:
        cycle = simple_cycle_from_speed(V, L, params)
    else:
        cycle = simple_cycle_from_step(L, T if T is not None else 0.4, params)

    start_p = _pop_float(flat, "start.p")
    start_q = _pop_float(flat, "start.q")
    start_x = _pop_float(flat, "start.x")
    start_xdot = _pop_float(flat, "start.xdot")
    if (start_p is None) != (start_q is None):
        raise ScenarioError("start.p and start.q must be given together")
    start_pq = (start_p, start_q) if start_p is not None else None
    if start_pq is None and start_x is None:
        start_pq = (-0.5, 0.3)

    refs_kw = {}
    for src, dst in (("refs.A_y", "A_y"), ("refs.phi_y", "phi_y"),
                     ("refs.A_H", "A_H"), ("refs.phi_H", "phi_H")):
        v = _pop_float(flat, src)
        if v is not None:
            refs_kw[dst] = v
    refs = ReferenceTrajectories(**refs_kw)

    impulses = []
    imp = {name: _pop_float(flat, f"impulse.{name}")
           for name in ("dLx", "dLy", "dHz", "step", "onset", "duration")}
    if any(v is not None for v in imp.values()):
        impulses.append(ImpulseEvent(
            dLx=imp["dLx"] or 0.0,
            dLy=imp["dLy"] or 0.0,
            dHz=imp["dHz"] or 0.0,
            step_index=int(imp["step"] if imp["step"] is not None else STANDARD_IMPULSE_STEP),
            onset_in_step=imp["onset"] if imp["onset"] is not None else STANDARD_IMPULSE_ONSET,
            duration=imp["duration"] if imp["duration"] is not None else STANDARD_IMPULSE_DURATION,
        ))

    sim_kw = {}
    for src, dst in (("sim.dt", "dt"), ("sim.cop_gain", "cop_gain"),
                     ("sim.replan_interval", "replan_interval")):
        v = _pop_float(flat, src)
        if v is not None:
            sim_kw[dst] = v
    sim = SimConfig(**sim_kw)

    controller = flat.pop("controller", "cop").strip()
    n_steps_v = _pop_float(flat, "n_steps")
    n_steps = int(n_steps_v) if n_steps_v is not None else 20
    seed_v = _pop_float(flat, "seed")

    kwargs = dict(
        params=params, cycle=cycle, controller=controller, n_steps=n_steps,
        start_pq=start_pq, start_x=start_x, start_xdot=start_xdot,
        refs=refs, impulses=impulses, sim=sim,
        seed=int(seed_v) if seed_v is not None else 0,
    )
    for src, dst in (("start.z_stance", "z_stance"), ("start.z_swing", "z_swing"),
                     ("start.y", "y0"), ("start.ydot", "ydot0"),
                     ("start.theta", "theta0"), ("start.thetadot", "thetadot0")):
        v = _pop_float(flat, src)
        if v is not None:
            kwargs[dst] = v
    if flat:
        raise ScenarioError(
            f"unknown scenario keys: {sorted(flat)}; known keys: {_SCHEMA_HELP}"
        )
    try:
        return Scenario(**kwargs)
    except ValueError as err:
        raise ScenarioError(str(err)) from err


# ---------------------------------------------------------------------------
# benchmark orchestration


@dataclass
class RunSummary:
    converged: bool
    steps_to_converge: int | None
    post_impulse_steps: int | None
    violations: list[str]
    impulse_scale: float
    fell: bool
    settled: bool
    trace: SimTrace


def run_scenario(scenario: Scenario) -> SimTrace:
    return run_walk(
        scenario.start_state(),
        scenario.cycle,
        scenario.controller,
        scenario.params,
        n_steps=scenario.n_steps,
        refs=scenario.refs,
        impulses=scenario.impulses,
        cfg=scenario.sim,
    )


def _convergence_bands(trace: SimTrace, impulse_step: int | None):
    """Latching convergence detection: the first step index from which two
    consecutive step-initial states sit within 5 percent of the cycle point
    (per component, relative to the cycle magnitude)."""
    c = trace.cycle
    band = 0.05 * math.hypot(c.p_c, c.q_c)
    flags = [
        abs(s.p0 - c.p_c) <= band and abs(s.q0 - c.q_c) <= band for s in trace.steps
    ]

    def first_latch(start: int) -> int | None:
        # convergence is confirmed by the second of two consecutive
        # in-band step starts
        for i in range(start, len(flags) - 1):
            if flags[i] and flags[i + 1]:
                return trace.steps[i + 1].i
        return None

    pre = first_latch(0)
    post = None
    if impulse_step is not None:
        idx = next(
            (k for k, s in enumerate(trace.steps) if s.i == impulse_step + 1), None
        )
        if idx is not None:
            latched = first_latch(idx)
            if latched is not None:
                post = latched - impulse_step
    return pre, post


def _settled(trace: SimTrace) -> bool:
    """Steady gait over the last steps: the step-initial states repeat with
    some short period (steady point or a small limit cycle), to within 3
    percent of the cycle magnitude."""
    if trace.fell or len(trace.steps) < 7:
        return False
    c = trace.cycle
    tol = 0.04 * math.hypot(c.p_c, c.q_c)
    # steady point: the last four step starts agree; short limit cycle:
    # the last six repeat with period two or three
    for period, span in ((1, 4), (2, 6), (3, 6)):
        tail = trace.steps[-span:]
        if all(
            math.hypot(tail[j].p0 - tail[j + period].p0, tail[j].q0 - tail[j + period].q0) <= tol
            for j in range(len(tail) - period)
        ):
            return True
    return False


def run_benchmark(scenario: Scenario, impulse_scale: float = 0.0) -> RunSummary:
    """Run a scenario with the scaled standard push and summarize it.

    ``impulse_scale=0`` runs the undisturbed scenario.  A fall is reported
    as a non-converged summary, never as an exception.
    """
    sc = replace(scenario)
    sc.impulses = list(scenario.impulses)
    impulse_step = None
    if impulse_scale != 0.0:
        sc.impulses.append(ImpulseEvent(
            dLx=STANDARD_IMPULSE[0] * impulse_scale,
            dLy=STANDARD_IMPULSE[1] * impulse_scale,
            dHz=STANDARD_IMPULSE[2] * impulse_scale,
            step_index=STANDARD_IMPULSE_STEP,
            onset_in_step=STANDARD_IMPULSE_ONSET,
            duration=STANDARD_IMPULSE_DURATION,
        ))
        impulse_step = STANDARD_IMPULSE_STEP
    trace = run_scenario(sc)
    pre, post = _convergence_bands(trace, impulse_step)
    converged = (not trace.fell) and pre is not None
    if impulse_step is not None:
        converged = converged and post is not None
    return RunSummary(
        converged=converged,
        steps_to_converge=pre,
        post_impulse_steps=post,
        violations=trace.report.violated,
        impulse_scale=impulse_scale,
        fell=trace.fell,
        settled=_settled(trace),
        trace=trace,
    )


# ---------------------------------------------------------------------------
# export


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return f"{x:.9g}"


def export_trace(trace: SimTrace, outdir: str, summary: RunSummary | None = None) -> list[str]:
    """Write continuous.csv, steps.csv and summary.json; float fields use 9
    significant digits, so identical runs export byte-identical files."""
    os.makedirs(outdir, exist_ok=True)
    written = []

    cont = os.path.join(outdir, "continuous.csv")
    buf = io.StringIO()
    buf.write(",".join(CONTINUOUS_COLUMNS) + "\n")
    for row in trace.rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    with open(cont, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())
    written.append(cont)

    stepsf = os.path.join(outdir, "steps.csv")
    buf = io.StringIO()
    buf.write(",".join(STEP_COLUMNS) + "\n")
    for s in trace.steps:
        buf.write(",".join([
            str(s.i), _fmt(s.L), _fmt(s.T), _fmt(s.p0), _fmt(s.q0), _fmt(s.p_star),
            _fmt(s.d1), _fmt(s.d2), _fmt(s.vswing), _fmt(s.vavg), _fmt(s.alpha),
        ]) + "\n")
    with open(stepsf, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())
    written.append(stepsf)

    c = trace.cycle
    payload = {
        "converged": summary.converged if summary else not trace.fell,
        "steps_to_converge": summary.steps_to_converge if summary else None,
        "post_impulse_steps": summary.post_impulse_steps if summary else None,
        "violations": summary.violations if summary else trace.report.violated,
        "impulse_scale": summary.impulse_scale if summary else 0.0,
        "fell": trace.fell,
        "settled": summary.settled if summary else None,
        "controller": trace.controller,
        "cycle": {"p_c": c.p_c, "q_c": c.q_c, "L_c": c.L_c, "T_c": c.T_c, "V_c": c.V_c},
        "bounds": {
            "L_max": trace.params.L_max,
            "half_L_max": 0.5 * trace.params.L_max,
            "V_max": trace.params.V_max,
            "T_min_cycle": trace.params.t_min(c.L_c),
        },
    }
    summaryf = os.path.join(outdir, "summary.json")
    with open(summaryf, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(summaryf)
    return written
