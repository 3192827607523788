"""Command-line entry points.

Exit codes: 0 when the run converged with no constraint violations,
2 when the walker fell, 1 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys

from .cycles import cycle_feasible, open_loop_rollout, simple_cycle_from_speed, simple_cycle_from_step
from .momentum import PQState, WalkerParams
from .scenario import (
    BACKWARD_STARTS,
    BENCHMARK_STARTS,
    Scenario,
    ScenarioError,
    benchmark_scenario,
    default_scenario,
    export_trace,
    load_scenario,
    run_benchmark,
    run_scenario,
)
from .simulation import CONTROLLERS, cwm_deviation_rollout

THESIS_SCALES = {
    "cop": 0.9,
    "steplen": 0.5,
    "steptime": 1.3,
    "combined": 1.4,
    "optimal": 1.2,
}


def _cycle_from_args(args, params: WalkerParams):
    if getattr(args, "V", None) is not None:
        return simple_cycle_from_speed(args.V, args.L, params)
    return simple_cycle_from_step(args.L, args.T, params)


def cmd_cycle(args) -> int:
    params = WalkerParams()
    c = _cycle_from_args(args, params)
    if args.cycle_cmd == "solve":
        print(f"p_c = {c.p_c:.6f} m   q_c = {c.q_c:.6f} m")
        print(f"L_c = {c.L_c:.6f} m   T_c = {c.T_c:.6f} s   V_c = {c.V_c:.6f} m/s")
        print(f"direction: {c.direction}")
        return 0
    report = cycle_feasible(c, params)
    print(f"step length |L| < L_max : {'ok' if report.length_ok else 'VIOLATED'}")
    print(f"step time T > T_min     : {'ok' if report.time_ok else 'VIOLATED'}"
          f"   (T_min = {report.t_min:.5f} s)")
    print(f"q-space boundary        : {report.lambert_q_bound:.5f} m"
          f" ({'inside' if report.lambert_ok else 'outside'})")
    print(f"feasible: {report.feasible}")
    return 0 if report.feasible else 1


def cmd_rollout(args) -> int:
    params = WalkerParams()
    c = simple_cycle_from_step(args.L, args.T, params)
    states = open_loop_rollout(PQState(args.p0, args.q0), c, args.steps, params)
    print("  k        p0           q0")
    for k, s in enumerate(states, start=1):
        print(f"{k:3d}  {s.p:11.6f}  {s.q:11.6f}")
    return 0


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario) if args.scenario else default_scenario()
        if args.controller:
            scenario.controller = args.controller
    except (ScenarioError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    summary = run_benchmark(scenario, args.impulse_scale)
    if args.out:
        export_trace(summary.trace, args.out, summary)
        print(f"exported trace to {args.out}")
    _print_summary(scenario.controller, summary)
    if summary.fell:
        return 2
    return 0 if summary.converged and not summary.violations else 1


def _print_summary(controller: str, summary) -> None:
    status = "FELL" if summary.fell else ("converged" if summary.converged else "not converged")
    line = f"{controller:9s} scale {summary.impulse_scale:4.2f}  {status}"
    if summary.steps_to_converge is not None:
        line += f"  latched at step {summary.steps_to_converge}"
    if summary.post_impulse_steps is not None:
        line += f"  recovery {summary.post_impulse_steps} steps"
    line += f"  settled={summary.settled}"
    line += f"  violations={summary.violations or 'none'}"
    print(line)


def cmd_benchmark(args) -> int:
    controllers = list(THESIS_SCALES) if args.all else [args.controller]
    worst = 0
    print("== standard-impulse benchmark (boundary starts, scaled push at step 7) ==")
    for ctrl in controllers:
        scale = args.impulse_scale if args.impulse_scale is not None else THESIS_SCALES[ctrl]
        summary = run_benchmark(benchmark_scenario(ctrl), scale)
        _print_summary(ctrl, summary)
        if args.out:
            export_trace(summary.trace, f"{args.out}/{ctrl}", summary)
        worst = max(worst, 2 if summary.fell else 0)
    if args.all:
        print("== backward starts ==")
        for ctrl in BACKWARD_STARTS:
            summary = run_benchmark(benchmark_scenario(ctrl, backward=True), 0.0)
            _print_summary(ctrl, summary)
            if args.out:
                export_trace(summary.trace, f"{args.out}/{ctrl}_backward", summary)
    return worst


def cmd_deviation(args) -> int:
    params = WalkerParams()
    c = simple_cycle_from_step(0.5, 0.4, params)
    dev = cwm_deviation_rollout(args.case, c, params)
    print(f"case {args.case}: end of step (p, q) = ({dev.pq_end.p:.6f}, {dev.pq_end.q:.6f})")
    print(f"pure exponential flow    = ({dev.swm_end.p:.6f}, {dev.swm_end.q:.6f})")
    print(f"deviation                = ({dev.deviation[0]:+.6f}, {dev.deviation[1]:+.6f})")
    print(f"max |p q| product drift  = {dev.product_drift:.6f}")
    return 0


def _sweep_one(job: tuple[str, str, float]):
    path, controller, scale = job
    scenario = load_scenario(path) if path else default_scenario()
    scenario.controller = controller
    summary = run_benchmark(scenario, scale)
    return controller, scale, summary.converged, summary.settled, summary.fell, summary.violations


def cmd_sweep(args) -> int:
    try:
        with open(args.grid, "r", encoding="utf-8") as fh:
            grid = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    scenario_path = grid.get("scenario", "")
    controllers = grid.get("controllers", ["cop"])
    scales = grid.get("impulse_scales", [0.0])
    jobs = [(scenario_path, c, s) for c in controllers for s in scales]
    with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
        for ctrl, scale, conv, settled, fell, viols in pool.map(_sweep_one, jobs):
            status = "FELL" if fell else ("converged" if conv else "not converged")
            print(f"{ctrl:9s} scale {scale:4.2f}  {status}  settled={settled}"
                  f"  violations={viols or 'none'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gaitlab", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    cyc = sub.add_parser("cycle", help="solve or check a simple walking cycle")
    cyc_sub = cyc.add_subparsers(dest="cycle_cmd", required=True)
    for name in ("solve", "feasible"):
        p = cyc_sub.add_parser(name)
        p.add_argument("--L", type=float, required=True, help="step displacement [m]")
        p.add_argument("--T", type=float, default=0.4, help="step period [s]")
        p.add_argument("--V", type=float, default=None, help="mean speed [m/s] (overrides --T)")
        p.set_defaults(func=cmd_cycle)

    ro = sub.add_parser("rollout", help="open-loop step-map rollout")
    ro.add_argument("--openloop", action="store_true")
    ro.add_argument("--p0", type=float, required=True)
    ro.add_argument("--q0", type=float, required=True)
    ro.add_argument("--L", type=float, default=0.5)
    ro.add_argument("--T", type=float, default=0.4)
    ro.add_argument("--steps", type=int, default=10)
    ro.set_defaults(func=cmd_rollout)

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("--scenario", default=None, help="scenario file (flat text or JSON)")
    run.add_argument("--controller", choices=CONTROLLERS, default=None)
    run.add_argument("--impulse-scale", type=float, default=0.0, dest="impulse_scale")
    run.add_argument("--out", default=None, help="directory for CSV/JSON export")
    run.set_defaults(func=cmd_run)

    bm = sub.add_parser("benchmark", help="reproduce the push-recovery table")
    bm.add_argument("--all", action="store_true")
    bm.add_argument("--controller", choices=list(THESIS_SCALES), default="cop")
    bm.add_argument("--impulse-scale", type=float, default=None, dest="impulse_scale")
    bm.add_argument("--out", default=None)
    bm.set_defaults(func=cmd_benchmark)

    dev = sub.add_parser("deviation", help="complete-vs-simplified deviation study")
    dev.add_argument("--case", type=int, choices=(1, 2, 3, 4), required=True)
    dev.set_defaults(func=cmd_deviation)

    sw = sub.add_parser("sweep", help="fan a grid of runs over a worker pool")
    sw.add_argument("--grid", required=True, help="JSON grid file")
    sw.add_argument("--jobs", type=int, default=None)
    sw.set_defaults(func=cmd_sweep)
    return ap


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; fold those into exit code 1
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ScenarioError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
