"""Scenario parsing, benchmark summaries, export determinism, CLI codes."""

import hashlib
import json
import math
import os

import pytest

from gaitlab.cli import main
from gaitlab.momentum import WalkerParams
from gaitlab.scenario import (
    ScenarioError,
    Scenario,
    benchmark_scenario,
    default_scenario,
    export_trace,
    load_scenario,
    run_benchmark,
    run_scenario,
)
from gaitlab.simulation import ReferenceTrajectories, SimConfig


def test_default_scenario_matches_benchmark_setup():
    sc = default_scenario()
    assert sc.params.h == 1.0 and sc.params.g == 9.8
    assert sc.cycle.L_c == 0.5 and sc.cycle.T_c == 0.4
    assert sc.start_pq == (-0.5, 0.3)
    assert sc.y0 == 0.95 and sc.theta0 == pytest.approx(-0.175)
    st = sc.start_state()
    assert st.x == pytest.approx(-0.1)
    assert st.xdot == pytest.approx(1.2522, abs=1e-4)


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.scn"
    path.write_text("# nothing here\n")
    sc = load_scenario(str(path))
    assert sc.params.h == 1.0
    assert sc.controller == "cop"
    assert sc.n_steps == 20


def test_gravity_override_recomputes_omega(tmp_path):
    path = tmp_path / "g.scn"
    path.write_text("params.g = 9.81\n")
    sc = load_scenario(str(path))
    assert sc.params.omega == pytest.approx(math.sqrt(9.81))


def test_invalid_values_are_reported(tmp_path):
    path = tmp_path / "bad.scn"
    path.write_text("n_steps = 0\n")
    with pytest.raises(ScenarioError):
        load_scenario(str(path))
    path.write_text("params.h = -1\n")
    with pytest.raises(ScenarioError):
        load_scenario(str(path))
    path.write_text("no_such_key = 3\n")
    with pytest.raises(ScenarioError, match="no_such_key"):
        load_scenario(str(path))
    path.write_text("just a line without equals\n")
    with pytest.raises(ScenarioError, match="line 1"):
        load_scenario(str(path))


def test_json_mirror_equivalent(tmp_path):
    flat = tmp_path / "a.scn"
    flat.write_text("params.g = 9.81\ncontroller = steplen\nstart.p = -0.49\nstart.q = 0.29\n")
    js = tmp_path / "a.json"
    js.write_text(json.dumps({
        "params": {"g": 9.81},
        "controller": "steplen",
        "start": {"p": -0.49, "q": 0.29},
    }))
    a, b = load_scenario(str(flat)), load_scenario(str(js))
    assert a.params == b.params
    assert a.controller == b.controller
    assert a.start_pq == b.start_pq


def test_scenario_start_requires_full_pair(tmp_path):
    path = tmp_path / "p.scn"
    path.write_text("start.p = -0.5\n")
    with pytest.raises(ScenarioError):
        load_scenario(str(path))


def test_cycle_speed_form(tmp_path):
    path = tmp_path / "v.scn"
    path.write_text("cycle.V = 1.25\ncycle.L = 0.5\n")
    sc = load_scenario(str(path))
    assert sc.cycle.T_c == pytest.approx(0.4)
    path.write_text("cycle.V = 1.25\ncycle.T = 0.4\n")
    with pytest.raises(ScenarioError):
        load_scenario(str(path))


def _small_scenario(**kw):
    sc = Scenario(
        start_pq=kw.pop("start_pq", (-0.5, 0.3)),
        n_steps=kw.pop("n_steps", 4),
        sim=SimConfig(dt=1e-3),
        **kw,
    )
    return sc


def test_run_summary_counts_rows(tmp_path):
    c = default_scenario().cycle
    sc = _small_scenario(controller="openloop", refs=ReferenceTrajectories.flat(),
                         start_pq=(c.p_c, c.q_c), y0=1.0, theta0=0.0)
    tr = run_scenario(sc)
    want = sc.n_steps * CYCLE_T / 1e-3
    assert len(tr.rows) == pytest.approx(want, abs=sc.n_steps + 1)


CYCLE_T = 0.4


def test_export_determinism_and_schemas(tmp_path):
    sc = _small_scenario(controller="cop")
    summary = run_benchmark(sc, impulse_scale=0.5)
    d1 = tmp_path / "one"
    d2 = tmp_path / "two"
    export_trace(summary.trace, str(d1), summary)
    summary2 = run_benchmark(sc, impulse_scale=0.5)
    export_trace(summary2.trace, str(d2), summary2)
    for name in ("continuous.csv", "steps.csv", "summary.json"):
        h1 = hashlib.sha256((d1 / name).read_bytes()).hexdigest()
        h2 = hashlib.sha256((d2 / name).read_bytes()).hexdigest()
        assert h1 == h2, name
    header = (d1 / "continuous.csv").read_text().splitlines()[0]
    assert header == ("t,x,dx,ddx,y,dy,theta,dtheta,p,q,z_stance,dz_des,Fx,Fy,Tz,mu_req")
    header = (d1 / "steps.csv").read_text().splitlines()[0]
    assert header == "i,L,T,p0,q0,p_star,D1,D2,Vswing,Vavg,alpha"
    payload = json.loads((d1 / "summary.json").read_text())
    for key in ("converged", "steps_to_converge", "post_impulse_steps",
                "violations", "impulse_scale"):
        assert key in payload


def test_export_oncycle_constant_step_column(tmp_path):
    c = default_scenario().cycle
    sc = Scenario(
        start_pq=(c.p_c, c.q_c), controller="openloop", n_steps=4,
        refs=ReferenceTrajectories.flat(), y0=1.0, theta0=0.0,
        sim=SimConfig(dt=1e-3),
    )
    tr = run_scenario(sc)
    out = tmp_path / "cycle"
    export_trace(tr, str(out))
    lines = (out / "steps.csv").read_text().splitlines()[1:]
    for line in lines:
        assert line.split(",")[1] == "0.5"


def test_benchmark_scenario_starts():
    assert benchmark_scenario("cop").start_pq == (-0.5, 0.3)
    assert benchmark_scenario("steplen").start_pq == (-0.49, 0.29)
    assert benchmark_scenario("steptime").start_pq == (-0.705, 0.505)
    assert benchmark_scenario("combined").start_pq == (-0.67, 0.47)
    assert benchmark_scenario("optimal", backward=True).start_pq == (0.57, -0.37)
    with pytest.raises(ScenarioError):
        benchmark_scenario("steptime", backward=True)


def test_run_benchmark_zero_scale_has_no_impulse():
    sc = _small_scenario(controller="openloop", refs=ReferenceTrajectories.flat(),
                         start_pq=(default_scenario().cycle.p_c, default_scenario().cycle.q_c),
                         y0=1.0, theta0=0.0)
    summary = run_benchmark(sc, impulse_scale=0.0)
    assert summary.post_impulse_steps is None
    assert summary.converged


# ---------------------------------------------------------------------------
# CLI


def test_cli_cycle_solve(capsys):
    rc = main(["cycle", "solve", "--L", "0.5", "--T", "0.4"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "-0.700158" in out and "0.200158" in out


def test_cli_cycle_feasible(capsys):
    assert main(["cycle", "feasible", "--L", "0.5", "--T", "0.4"]) == 0
    assert main(["cycle", "feasible", "--L", "0.8", "--T", "0.4"]) == 1


def test_cli_rollout(capsys):
    rc = main(["rollout", "--openloop", "--p0", "-0.5", "--q0", "0.3", "--steps", "3"])
    assert rc == 0
    assert len(capsys.readouterr().out.splitlines()) == 4


def test_cli_usage_error_is_exit_1(capsys):
    assert main(["cycle", "solve"]) == 1  # missing --L
    assert main(["definitely-not-a-command"]) == 1


def test_cli_deviation(capsys):
    assert main(["deviation", "--case", "1"]) == 0
    assert "deviation" in capsys.readouterr().out


def test_cli_run_fall_is_exit_2(tmp_path, capsys):
    scn = tmp_path / "fall.scn"
    scn.write_text(
        "controller = steplen\nstart.p = -0.49\nstart.q = 0.29\n"
        "sim.dt = 0.001\nn_steps = 10\n"
    )
    rc = main(["run", "--scenario", str(scn), "--impulse-scale", "2.0"])
    assert rc == 2


def test_cli_run_config_error_is_exit_1(tmp_path, capsys):
    scn = tmp_path / "bad.scn"
    scn.write_text("controller = bogus\n")
    assert main(["run", "--scenario", str(scn)]) == 1
