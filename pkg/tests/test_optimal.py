"""Penalty objective, Newton machinery and the optimal step planner."""

import math
import random

import pytest

from gaitlab.cycles import simple_cycle_from_step
from gaitlab.momentum import PQState, WalkerParams, step_to_step
from gaitlab.newton import (
    OptimizerConfig,
    backtracking_search,
    minimize_newton,
    newton_step_modified,
    steepest_descent_step,
    wolfe_check,
)
from gaitlab.optimal import (
    GoalSpec,
    PenaltySpec,
    assemble_objective,
    direct_target_solve,
    goal_value_grad_hess,
    guided_target_sequence,
    penalty_value_grad_hess,
    plan_optimal_step,
)

P = WalkerParams()
W = P.omega
CYCLE = simple_cycle_from_step(0.5, 0.4, P)
CFG = OptimizerConfig()


# ---------------------------------------------------------------------------
# goal / penalty composition


def test_goal_at_optimum():
    spec = GoalSpec("step_time", g_opt=0.4, dg_max=0.1)
    v, g, H = goal_value_grad_hess(spec, 0.4, (1.0, 0.0), (0.0, 0.0, 0.0))
    assert v == 0.0
    assert g == (0.0, 0.0)
    assert H[0] == pytest.approx(1.0 / 0.1**2)


def test_goal_at_margin():
    spec = GoalSpec("step_time", g_opt=0.4, dg_max=0.1)
    v, _, _ = goal_value_grad_hess(spec, 0.5, (1.0, 0.0), (0.0, 0.0, 0.0))
    assert v == pytest.approx(0.5)


def test_penalty_inactive_inside():
    spec = PenaltySpec("len_sq_max", h_ext=1.0, dh_min=0.1, dir=-1)
    v, g, H = penalty_value_grad_hess(spec, 0.8, (0.0, 1.0), (0.0, 0.0, 0.0))
    assert v == 0.0 and g == (0.0, 0.0) and H == (0.0, 0.0, 0.0)


def test_penalty_half_at_limit():
    spec = PenaltySpec("len_sq_max", h_ext=1.0, dh_min=0.1, dir=-1)
    v, _, _ = penalty_value_grad_hess(spec, 1.0, (0.0, 1.0), (0.0, 0.0, 0.0))
    assert v == pytest.approx(0.5)
    # lower-sided penalty mirrors
    spec = PenaltySpec("len_sq_min", h_ext=1.0, dh_min=0.1, dir=1)
    v, _, _ = penalty_value_grad_hess(spec, 1.0, (0.0, 1.0), (0.0, 0.0, 0.0))
    assert v == pytest.approx(0.5)
    v, _, _ = penalty_value_grad_hess(spec, 1.2, (0.0, 1.0), (0.0, 0.0, 0.0))
    assert v == 0.0


def test_penalty_gradient_fd():
    spec = PenaltySpec("d1_sq", h_ext=0.14, dh_min=0.014, dir=-1)

    def val(h):
        return penalty_value_grad_hess(spec, h, (1.0, 0.0), (0.0, 0.0, 0.0))[0]

    for h in (0.135, 0.14, 0.15, 0.2):  # active region
        v, g, _ = penalty_value_grad_hess(spec, h, (1.0, 0.0), (0.0, 0.0, 0.0))
        fd = (val(h + 1e-7) - val(h - 1e-7)) / 2e-7
        assert g[0] == pytest.approx(fd, rel=1e-6, abs=1e-9)


# ---------------------------------------------------------------------------
# assembled objective


def test_objective_minimum_on_cycle():
    obj = assemble_objective(CYCLE.pq, CYCLE.L_c, CYCLE, CFG, P, r2=0.2, r3=0.2)
    x = (CYCLE.T_c, CYCLE.L_c)
    assert obj.value(x) == pytest.approx(0.0, abs=1e-20)
    g = obj.grad(x)
    assert math.hypot(*g) < 1e-12
    assert obj.penalty_total(x) == 0.0


def test_objective_fd_random_points():
    rng = random.Random(42)
    starts = [CYCLE.pq, PQState(-0.6, 0.35), PQState(-0.67, 0.47), PQState(0.3, -0.2)]
    worst_g = worst_h = 0.0
    for pq0 in starts:
        obj = assemble_objective(pq0, 0.3, CYCLE, CFG, P, r2=0.2, r3=0.2)
        for _ in range(25):
            x = (rng.uniform(0.12, 0.9), rng.uniform(-0.74, 0.74))
            g = obj.grad(x)
            H = obj.hess(x)
            h0 = 1e-6
            for i, e in enumerate(((h0, 0.0), (0.0, h0))):
                up = (x[0] + e[0], x[1] + e[1])
                dn = (x[0] - e[0], x[1] - e[1])
                fd_g = (obj.value(up) - obj.value(dn)) / (2 * h0)
                den = max(1.0, abs(fd_g))
                worst_g = max(worst_g, abs(fd_g - g[i]) / den)
                gu, gd = obj.grad(up), obj.grad(dn)
                full = (H[0], H[1], H[1], H[2])
                for j in range(2):
                    fd_h = (gu[j] - gd[j]) / (2 * h0)
                    worst_h = max(worst_h, abs(fd_h - full[2 * i + j]) / max(1.0, abs(fd_h)))
    assert worst_g < 1e-5
    assert worst_h < 1e-5


def test_objective_far_state_grid_crosscheck():
    # with the step-command goals off, the minimizer must beat a dense grid
    pq0 = PQState(-0.67, 0.47)
    obj = assemble_objective(pq0, 0.2, CYCLE, CFG, P, r2=0.0, r3=0.0)
    best = math.inf
    for i in range(86):
        T = 0.15 + 0.01 * i
        for j in range(151):
            L = -0.75 + 0.01 * j
            best = min(best, obj.value((T, L)))
    plan = plan_optimal_step(pq0, 0.2, CYCLE, CFG, P, near_count=0)
    assert obj.value((plan.plan.T, plan.plan.L)) <= best + 1e-9


def test_objective_domain_guard():
    obj = assemble_objective(CYCLE.pq, 0.5, CYCLE, CFG, P)
    assert obj.value((P.T_0, 0.5)) == math.inf
    with pytest.raises(ValueError):
        obj.grad((P.T_0, 0.5))


# ---------------------------------------------------------------------------
# Newton machinery


def _quad(A, b):
    # U = 1/2 x^T A x + b^T x with A = (a, c) diagonal or (a, bb, c)
    a, bb, c = A

    def value(x):
        return 0.5 * (a * x[0] ** 2 + 2 * bb * x[0] * x[1] + c * x[1] ** 2) + b[0] * x[0] + b[1] * x[1]

    def grad(x):
        return (a * x[0] + bb * x[1] + b[0], bb * x[0] + c * x[1] + b[1])

    def hess(x):
        return (a, bb, c)

    return value, grad, hess


def test_newton_one_step_on_quadratic():
    value, grad, hess = _quad((1.0, 0.0, 1.0), (0.3, -0.2))
    res = minimize_newton(value, grad, hess, (5.0, -7.0), CFG)
    assert res.converged
    assert res.iterations == 1


def test_newton_direction_indefinite_flooring():
    step = newton_step_modified((1.0, 1.0), (1.0, 0.0, -2.0), 1e-8)
    lam = sorted(step.eigenvalues)
    assert lam[0] == pytest.approx(-2.0)
    assert lam[1] == pytest.approx(1.0)
    assert step.floored
    assert step.cos_theta > 0.0
    # direction solves against diag(1, lambda_min)
    assert step.direction[0] == pytest.approx(-1.0)
    assert step.direction[1] == pytest.approx(-1.0 / 1e-8, rel=1e-9)


def test_newton_zero_gradient_signal():
    step = newton_step_modified((0.0, 0.0), (1.0, 0.0, 1.0), 1e-8)
    assert step.converged and step.direction is None


def test_descent_angle_always_positive_on_random_hessians():
    rng = random.Random(3)
    for _ in range(200):
        H = (rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2))
        g = (rng.uniform(-1, 1), rng.uniform(-1, 1))
        if g == (0.0, 0.0):
            continue
        step = newton_step_modified(g, H, 1e-8)
        assert step.grad_dot_dir < 0.0
        assert step.cos_theta > 0.0


def test_backtracking_quadratic_accepts_unit_step():
    value, grad, hess = _quad((1.0, 0.0, 1.0), (0.0, 0.0))
    x = (2.0, 1.0)
    g = grad(x)
    Pdir = newton_step_modified(g, hess(x), 1e-8).direction
    alpha = backtracking_search(value, x, Pdir, value(x), g[0] * Pdir[0] + g[1] * Pdir[1], CFG)
    assert alpha == 1.0


def test_backtracking_quartic_example():
    def value(x):
        return x[0] ** 4

    alpha = backtracking_search(value, (1.0, 0.0), (-1.0, 0.0), 1.0, -4.0, CFG)
    assert alpha == 1.0  # (1-1)^4 = 0 <= 1 - 4e-4


def test_backtracking_rejects_ascent():
    def value(x):
        return x[0] ** 2

    with pytest.raises(ValueError):
        backtracking_search(value, (1.0, 0.0), (1.0, 0.0), 1.0, 2.0, CFG)


def test_wolfe_exact_line_minimum():
    value, grad, hess = _quad((1.0, 0.0, 1.0), (0.0, 0.0))
    x = (1.0, 0.0)
    rep = wolfe_check(value, grad, x, (-1.0, 0.0), 1.0, CFG, strong=True)
    assert rep.sufficient_decrease and rep.curvature


def test_wolfe_tiny_step_fails_curvature():
    value, grad, hess = _quad((1.0, 0.0, 1.0), (0.0, 0.0))
    x = (1.0, 0.0)
    rep = wolfe_check(value, grad, x, (-1.0, 0.0), 1e-6, CFG)
    assert rep.sufficient_decrease and not rep.curvature


def test_steepest_descent_isotropic_one_step():
    value, grad, hess = _quad((1.0, 0.0, 1.0), (0.0, 0.0))
    x = steepest_descent_step(value, grad, (1.0, 0.0), CFG)
    assert x == pytest.approx((0.0, 0.0))


def test_steepest_descent_zigzags_when_ill_conditioned():
    value, grad, hess = _quad((1.0, 0.0, 100.0), (0.0, 0.0))
    x = (10.0, 1.0)
    n = 0
    while math.hypot(*grad(x)) > 1e-3 and n < 500:
        x = steepest_descent_step(value, grad, x, CFG)
        n += 1
    assert n > 20  # documents why the curvature-aware method is primary
    res = minimize_newton(value, grad, hess, (10.0, 1.0), CFG)
    assert res.iterations == 1


# ---------------------------------------------------------------------------
# planner, direct solve, guided sequence


def test_plan_on_cycle_returns_cycle_command():
    plan = plan_optimal_step(CYCLE.pq, CYCLE.L_c, CYCLE, CFG, P)
    assert plan.plan.T == pytest.approx(CYCLE.T_c, abs=1e-6)
    assert plan.plan.L == pytest.approx(CYCLE.L_c, abs=1e-6)
    assert not plan.flagged


def test_plan_agrees_with_direct_solve_near_cycle():
    pq0 = PQState(CYCLE.p_c + 1e-4, CYCLE.q_c + 1e-4)
    cands = direct_target_solve(pq0, CYCLE.pq, P)
    assert cands
    T_d, L_d = max(cands, key=lambda c: c[0])
    plan = plan_optimal_step(pq0, CYCLE.L_c, CYCLE, CFG, P)
    assert plan.plan.T == pytest.approx(T_d, abs=2e-3)
    assert plan.plan.L == pytest.approx(L_d, abs=2e-3)


def test_plan_far_state_converges_with_zero_penalties():
    plan = plan_optimal_step(PQState(-0.67, 0.47), 0.2, CYCLE, CFG, P, near_count=0)
    assert plan.result.grad_norm < 1e-8
    assert plan.plan.alpha < 1.0
    assert abs(plan.plan.L) <= P.L_max
    # every constraint stays inside its hard bound
    obj = assemble_objective(PQState(-0.67, 0.47), 0.2, CYCLE, CFG, P, r2=0, r3=0)
    cons = obj.constraint_values((plan.plan.T, plan.plan.L))
    assert cons["len_sq_max"] <= P.L_max**2
    assert cons["d1_sq"] <= (P.L_max / 2) ** 2
    assert cons["d2_sq"] <= (P.L_max / 2) ** 2
    assert cons["vswing_sq"] <= P.V_max**2


def test_plan_newton_iteration_budget():
    # cold solves stay within a small iteration budget at tight tolerance;
    # prev_L matches the walking direction of each start
    cases = [
        (PQState(-0.67, 0.47), 0.2),
        (PQState(0.57, -0.37), -0.2),
        (PQState(-0.71, 0.21), 0.5),
    ]
    for pq0, prev_L in cases:
        plan = plan_optimal_step(pq0, prev_L, CYCLE, CFG, P, near_count=0)
        assert plan.result.grad_norm < 1e-8
        assert plan.result.iterations <= 20
        assert all(d < 0.0 for d in plan.result.grad_dot_dirs)


def test_direct_solve_on_rounded_cycle():
    cands = direct_target_solve(PQState(-0.7, 0.2), PQState(-0.7, 0.2), P)
    assert len(cands) == 1  # the zero-time root is filtered out
    T, L = cands[0]
    assert T == pytest.approx(0.40018, abs=1e-6)
    assert L == pytest.approx(0.5, abs=1e-12)


def test_direct_solve_unreachable_target():
    cands = direct_target_solve(PQState(-0.5, 0.5), PQState(-0.1, 0.1), P)
    assert cands == []


def test_direct_solve_candidates_reproduce_target():
    rng = random.Random(11)
    checked = 0
    for _ in range(200):
        pq0 = PQState(rng.uniform(-1, 1), rng.uniform(-1, 1))
        tgt = PQState(rng.uniform(-1, 1), rng.uniform(-1, 1))
        for T, L in direct_target_solve(pq0, tgt, P):
            out = step_to_step(pq0, L, T, P)
            assert out.p == pytest.approx(tgt.p, abs=1e-10)
            assert out.q == pytest.approx(tgt.q, abs=1e-10)
            checked += 1
    assert checked > 50


def test_guided_unit_gain_single_step():
    res = guided_target_sequence(CYCLE.pq, CYCLE, [1.0 - 1e-12], [1.0 - 1e-12], P)
    assert res.succeeded
    T, L = res.steps[0]
    assert T == pytest.approx(CYCLE.T_c, abs=1e-6)
    assert L == pytest.approx(CYCLE.L_c, abs=1e-6)


def test_guided_half_gain_geometric():
    pq0 = PQState(-0.5, 0.3)
    res = guided_target_sequence(pq0, CYCLE, [0.5] * 6, [0.5] * 6, P)
    assert res.succeeded
    gap = pq0.q - CYCLE.q_c
    for i, tgt in enumerate(res.targets):
        assert tgt.q - CYCLE.q_c == pytest.approx(gap * 0.5**i, rel=1e-9)


def test_guided_reports_first_infeasible_step():
    res = guided_target_sequence(PQState(-1.5, 1.5), CYCLE, [0.9], [0.9], P)
    assert not res.succeeded
    assert res.failed_at == 0


def test_guided_rejects_bad_gains():
    with pytest.raises(ValueError):
        guided_target_sequence(CYCLE.pq, CYCLE, [2.5], [0.5], P)
