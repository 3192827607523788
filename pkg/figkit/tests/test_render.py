"""Rendering tests over committed trace exports and synthetic inputs."""

import math
import os

import numpy as np
import pytest

from figkit.cli import main
from figkit.render import FigureSpec, RenderError, load_trace, render, _stance_segments

DATA = os.path.join(os.path.dirname(__file__), "data")
ONCYCLE = os.path.join(DATA, "oncycle")
BENCHMARK = os.path.join(DATA, "benchmark")


@pytest.mark.parametrize("kind", ["phase", "continuous", "steps"])
@pytest.mark.parametrize("src", [ONCYCLE, BENCHMARK])
def test_render_all_kinds(tmp_path, kind, src):
    out = tmp_path / f"{os.path.basename(src)}_{kind}.png"
    spec = FigureSpec(input_dir=src, kind=kind, out_path=str(out))
    assert render(spec) == str(out)
    assert out.exists() and out.stat().st_size > 5000


def test_render_is_idempotent(tmp_path):
    out = tmp_path / "a.png"
    spec = FigureSpec(input_dir=ONCYCLE, kind="phase", out_path=str(out))
    render(spec)
    first = out.read_bytes()
    render(spec)
    assert out.read_bytes() == first


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(RenderError):
        FigureSpec(input_dir=ONCYCLE, kind="pie", out_path=str(tmp_path / "x.png"))


def test_missing_inputs_reported(tmp_path):
    spec = FigureSpec(input_dir=str(tmp_path), kind="phase", out_path=str(tmp_path / "x.png"))
    with pytest.raises(RenderError, match="continuous.csv"):
        render(spec)


def test_bad_columns_reported(tmp_path):
    (tmp_path / "continuous.csv").write_text("a,b\n1,2\n")
    spec = FigureSpec(input_dir=str(tmp_path), kind="phase", out_path=str(tmp_path / "x.png"))
    with pytest.raises(RenderError, match="expected columns"):
        render(spec)


def test_oncycle_phase_is_single_closed_loop():
    # vertex-count heuristic: the repeated traversals of one loop collapse
    # onto a single ring of distinct vertices, and the per-step rings agree
    trace = load_trace(ONCYCLE)
    p, q = trace.continuous["p"], trace.continuous["q"]
    segments = _stance_segments(trace.continuous["z_stance"])
    n_steps = len(trace.steps["i"])
    assert len(segments) == n_steps

    rounded = {(round(a, 3), round(b, 3)) for a, b in zip(p, q)}
    per_loop = len(p) / n_steps
    assert len(rounded) <= 1.2 * per_loop  # one loop's worth of vertices

    first = segments[0]
    for seg in segments[1:]:
        pa, qa = p[first], q[first]
        pb, qb = p[seg], q[seg]
        m = min(len(pa), len(pb))
        assert np.max(np.hypot(pa[:m] - pb[:m], qa[:m] - qb[:m])) < 1e-3

    # the loop closes: each arc's landing point transfers onto the next
    # arc's start, which coincides with the first arc's start
    assert math.hypot(p[segments[1].start] - p[0], q[segments[1].start] - q[0]) < 1e-3


def test_benchmark_phase_spirals_toward_cycle():
    trace = load_trace(BENCHMARK)
    cyc = trace.cycle
    p, q = trace.steps["p0"], trace.steps["q0"]
    d_first = math.hypot(p[0] - cyc["p_c"], q[0] - cyc["q_c"])
    d_last = math.hypot(p[-1] - cyc["p_c"], q[-1] - cyc["q_c"])
    assert d_last < 0.5 * d_first


def test_cli_roundtrip(tmp_path, capsys):
    out = tmp_path / "phase.png"
    assert main(["--input", ONCYCLE, "--kind", "phase", "--out", str(out)]) == 0
    assert out.exists()
    assert main(["--input", str(tmp_path), "--kind", "phase", "--out", str(out)]) == 1
    assert main(["--kind", "phase"]) == 1  # usage error
