"""Stabilizer laws, gain windows and simplified-model closed loops."""

import math
import random

import pytest

from gaitlab.cycles import CycleSpec, simple_cycle_from_step
from gaitlab.momentum import PQState, WalkerParams, step_to_step
from gaitlab.stabilizers import (
    GainWindowError,
    admissible_q_window,
    cop_contraction,
    p_bounds,
    p_star,
    stabilizer1_cop,
    stabilizer1_gain_window,
    stabilizer2_step_length,
    stabilizer3_step_time,
    stabilizer4_combined,
    swm_closed_loop,
)

P = WalkerParams()
W = P.omega
CYCLE = simple_cycle_from_step(0.5, 0.4, P)
ROUNDED = CycleSpec(p_c=-0.7, q_c=0.2, L_c=0.5, T_c=0.4, V_c=1.25)
E = math.exp(W * 0.4)


def test_p_star_values():
    T_rep = math.log(3.5) / W
    assert p_star(0.5, T_rep, 0.0, P) == pytest.approx(-0.7, abs=1e-4)
    assert p_star(0.5, 0.4, 0.1, P) == pytest.approx(-0.56013, abs=1e-5)
    assert p_star(-0.5, 0.4, 0.0, P) == pytest.approx(0.70016, abs=1e-5)
    with pytest.raises(ValueError):
        p_star(0.5, 0.0, 0.0, P)


def test_p_bounds_degenerate():
    lo, hi = p_bounds(0.0, 0.3, 0.0, 0.0, -0.4, P)
    assert lo == pytest.approx(min(0.0, -0.4))
    assert hi == pytest.approx(max(0.0, -0.4))


def test_p_bounds_symmetric_case():
    lo, hi = p_bounds(0.75, 0.21667, 0.0, 0.0, -0.7, P)
    den = 1.0 - math.exp(-W * 0.21667)
    assert lo == pytest.approx(-0.75 / den, rel=1e-12)
    assert hi == pytest.approx(0.75 / den, rel=1e-12)


def test_p_bounds_enclose_random_rollouts():
    rng = random.Random(7)
    for _ in range(20):
        pq = PQState(rng.uniform(-0.8, 0.8), rng.uniform(-0.5, 0.5))
        lo, hi = p_bounds(P.L_max, 0.21667, 0.0, 0.0, pq.p, P)
        for _ in range(20):
            L = rng.uniform(-P.L_max, P.L_max)
            T = rng.uniform(0.21667, 0.8)
            pq = step_to_step(pq, L, T, P)
            assert lo - 1e-9 <= pq.p <= hi + 1e-9


# ---------------------------------------------------------------------------
# CoP stabilizer


def test_cop_zero_on_reference():
    t = 0.23
    q_ref = ROUNDED.q_c * math.exp(W * t)
    assert stabilizer1_cop(q_ref, t, ROUNDED, 5.0, P) == 0.0


def test_cop_boundary_gain_example():
    # q0 at the window edge with the smallest contracting gain exactly
    # saturates the support foot
    dz = stabilizer1_cop(0.3, 0.0, ROUNDED, 1.1, P)
    assert dz == pytest.approx(0.11, rel=1e-12)
    assert cop_contraction(1.1, 0.4, P) == pytest.approx(0.8823, abs=1e-4)


def test_cop_saturates():
    dz = stabilizer1_cop(0.5, 0.0, ROUNDED, 5.0, P)
    assert dz == P.dz_max
    dz = stabilizer1_cop(-0.3, 0.0, ROUNDED, 5.0, P)
    assert dz == P.dz_min


def test_cop_gain_window():
    win = stabilizer1_gain_window(0.3, ROUNDED, P)
    assert win.feasible and win.hi == pytest.approx(1.1)
    win = stabilizer1_gain_window(0.32, ROUNDED, P)
    assert not win.feasible


# ---------------------------------------------------------------------------
# step-planning stabilizers


def test_steplen_deadbeat():
    plan = stabilizer2_step_length(CYCLE.q_c, CYCLE, P)
    assert plan.L == CYCLE.L_c and plan.T == CYCLE.T_c and plan.alpha == 0.0


def test_steplen_clamped_example():
    plan = stabilizer2_step_length(0.29, ROUNDED, P)
    assert plan.L == pytest.approx(0.75, rel=1e-12)
    assert plan.alpha == pytest.approx(0.7202, abs=1e-3)
    # per the contraction relation, the predicted next divergent component
    q_next = ROUNDED.q_c + plan.alpha * (0.29 - ROUNDED.q_c)
    assert q_next == pytest.approx(0.26482, abs=1e-3)


def test_steplen_window_and_error():
    lo, hi = admissible_q_window("steplen", CYCLE, P)
    assert hi == pytest.approx(0.30024, abs=1e-5)
    assert lo == pytest.approx(-hi)
    with pytest.raises(GainWindowError):
        stabilizer2_step_length(hi + 0.01, CYCLE, P)
    clamped = stabilizer2_step_length(hi + 0.01, CYCLE, P, clamp=True)
    assert clamped.alpha >= 1.0


def test_steptime_deadbeat_example():
    plan = stabilizer3_step_time(0.25, ROUNDED, P)
    assert plan.L == ROUNDED.L_c
    assert plan.T == pytest.approx(0.32872, abs=1e-5)
    nxt = step_to_step(PQState(-0.7, 0.25), plan.L, plan.T, P)
    assert nxt.q == pytest.approx(0.1996, abs=1e-4)


def test_steptime_at_cycle_point():
    plan = stabilizer3_step_time(ROUNDED.q_c, ROUNDED, P)
    assert plan.T == ROUNDED.T_c and plan.alpha == 0.0


def test_steptime_window():
    lo, hi = admissible_q_window("steptime", CYCLE, P)
    assert lo == 0.0
    assert hi == pytest.approx(0.51521, abs=1e-5)
    with pytest.raises(GainWindowError):
        stabilizer3_step_time(-0.1, CYCLE, P)  # opposite direction
    with pytest.raises(GainWindowError):
        stabilizer3_step_time(0.53, CYCLE, P)


def test_steptime_respects_minimum_period():
    t_min = P.t_min(CYCLE.L_c)
    for q0 in (0.3, 0.4, 0.5, 0.51):
        plan = stabilizer3_step_time(q0, CYCLE, P)
        assert plan.T >= t_min - 1e-12


def test_steptime_matches_steplen_contraction():
    # both families contract by |growth - gain|: with the deadbeat gain
    # feasible for both, their next divergent components coincide
    for q0 in (0.22, 0.25, 0.26):
        a = stabilizer2_step_length(q0, CYCLE, P)
        b = stabilizer3_step_time(q0, CYCLE, P)
        na = step_to_step(PQState(CYCLE.p_c, q0), a.L, a.T, P)
        nb = step_to_step(PQState(CYCLE.p_c, q0), b.L, b.T, P)
        assert na.q == pytest.approx(nb.q, abs=1e-12)
        assert a.alpha == pytest.approx(b.alpha, abs=1e-12)


def test_combined_deadbeat_split():
    plan = stabilizer4_combined(CYCLE.q_c, CYCLE, P)
    assert (plan.L, plan.T, plan.alpha) == (CYCLE.L_c, CYCLE.T_c, 0.0)
    # mild error: the length gain should carry the whole correction
    plan = stabilizer4_combined(CYCLE.q_c + 0.02, CYCLE, P)
    assert plan.alpha == pytest.approx(0.0, abs=1e-12)
    assert plan.T == pytest.approx(CYCLE.T_c, rel=1e-12)
    assert plan.L == pytest.approx(CYCLE.L_c + E * 0.02, rel=1e-9)


def test_combined_window_and_boundary_start():
    lo, hi = admissible_q_window("combined", CYCLE, P)
    assert hi == pytest.approx(0.48145, abs=1e-5)
    plan = stabilizer4_combined(0.47, CYCLE, P)
    assert plan.alpha < 1.0
    # convergent rollout from the boundary start
    states, alphas = swm_closed_loop("combined", PQState(-0.67, 0.47), CYCLE, P, 12)
    assert abs(states[-1].q - CYCLE.q_c) < 1e-9
    assert all(a < 1.0 + 1e-12 for a in alphas)


def test_combined_respects_both_bounds():
    t_min = P.t_min(P.L_max)
    for q0 in (-0.46, -0.2, 0.3, 0.46):
        plan = stabilizer4_combined(q0, CYCLE, P, clamp=True)
        assert abs(plan.L) <= P.L_max + 1e-9
        assert plan.T >= t_min - 1e-9


def test_admissible_window_cop_and_errors():
    lo, hi = admissible_q_window("cop", CYCLE, P)
    assert lo == pytest.approx(CYCLE.q_c + P.dz_min)
    assert hi == pytest.approx(CYCLE.q_c + P.dz_max)
    assert hi == pytest.approx(0.31, abs=1e-3)
    with pytest.raises(ValueError):
        admissible_q_window("nope", CYCLE, P)


# ---------------------------------------------------------------------------
# simplified-model closed loops


@pytest.mark.parametrize("which", ["cop", "steplen", "steptime", "combined"])
def test_closed_loop_converges_from_random_starts(which):
    rng = random.Random(hash(which) & 0xFFFF)
    lo, hi = admissible_q_window(which, CYCLE, P)
    span = hi - lo
    for _ in range(40):
        q0 = rng.uniform(lo + 1e-3 * span, hi - 1e-3 * span)
        states, alphas = swm_closed_loop(which, PQState(CYCLE.p_c, q0), CYCLE, P, 30)
        assert abs(states[-1].q - CYCLE.q_c) < 1e-6, (which, q0)
        assert abs(states[-1].p - CYCLE.p_c) < 1e-6, (which, q0)
        # telescoped product of per-step ratios equals the realized ratio
        prod = 1.0
        for a in alphas:
            prod *= a
        realized = abs(states[-1].q - CYCLE.q_c)
        assert realized == pytest.approx(abs(q0 - CYCLE.q_c) * prod, rel=1e-8, abs=1e-12)


def test_am_gm_bound_on_realized_gains():
    states, alphas = swm_closed_loop("steplen", PQState(-0.5, 0.29), CYCLE, P, 8)
    pos = [a for a in alphas if a > 0]
    prod = math.prod(pos)
    mean = sum(pos) / len(pos)
    assert prod <= mean ** len(pos) + 1e-12


def test_closed_loop_respects_p_bounds():
    lo, hi = p_bounds(P.L_max, P.t_min(P.L_max), 0.0, 0.0, -0.5, P)
    for which in ("steplen", "combined"):
        states, _ = swm_closed_loop(which, PQState(-0.5, 0.29), CYCLE, P, 20)
        for s in states:
            assert lo - 1e-9 <= s.p <= hi + 1e-9
