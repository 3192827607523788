"""Optimal stability control: penalty-method step planning over (T, L).

The next step is chosen by minimizing a composite of quadratic *goal*
functions (drive the predicted next divergent component to its cycle value,
and, near the cycle, keep the step close to the cycle command) and one-sided
quadratic *penalty* functions (step length, CoM-to-foot offsets before and
after landing, mean swing-foot speed).  The composite is smooth with an
analytic gradient and Hessian, so an eigenvalue-floored Newton iteration
with backtracking solves it in a handful of steps.

Also provided: the direct quadratic solve for a one-step target, and the
guided sequence of interpolated targets it enables - the incomplete methods
whose failure modes motivate the penalty formulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .cycles import CycleSpec
from .momentum import PQState, WalkerParams, step_to_step
from .newton import Mat2, MinimizeResult, OptimizerConfig, Vec2, minimize_newton
from .stabilizers import StepPlan

__all__ = [
    "GoalSpec",
    "PenaltySpec",
    "Objective",
    "OptimalPlan",
    "goal_value_grad_hess",
    "penalty_value_grad_hess",
    "assemble_objective",
    "plan_optimal_step",
    "direct_target_solve",
    "guided_target_sequence",
    "GuidedSequenceResult",
]


@dataclass(frozen=True)
class GoalSpec:
    """Quadratic goal: value 1/2 ((g - g_opt)/dg_max)^2, weighted by R."""

    kind: str  # next_divergent | step_time | step_length
    g_opt: float
    dg_max: float
    weight: float = 1.0

    def __post_init__(self) -> None:
        if self.dg_max <= 0.0:
            raise ValueError("GoalSpec.dg_max must be > 0")
        if self.weight < 0.0:
            raise ValueError("GoalSpec.weight must be >= 0")


@dataclass(frozen=True)
class PenaltySpec:
    """One-sided quadratic penalty on a constraint function ``h``.

    ``dir=-1`` keeps ``h`` below ``h_ext``; ``dir=+1`` keeps it above.  The
    penalty turns on a margin ``dh_min`` before the limit and reaches 1/2 at
    the limit itself.
    """

    kind: str  # len_sq_max | len_sq_min | d1_sq | d2_sq | vswing_sq
    h_ext: float
    dh_min: float
    dir: int = -1

    def __post_init__(self) -> None:
        if self.dh_min <= 0.0:
            raise ValueError("PenaltySpec.dh_min must be > 0")
        if self.dir not in (-1, 1):
            raise ValueError("PenaltySpec.dir must be +1 or -1")


def goal_value_grad_hess(
    spec: GoalSpec, g: float, dg: Vec2, d2g: Mat2
) -> tuple[float, Vec2, Mat2]:
    """Compose the quadratic goal with an inner function's value/grad/Hess."""
    r = (g - spec.g_opt) / (spec.dg_max * spec.dg_max)
    curv = 1.0 / (spec.dg_max * spec.dg_max)
    value = 0.5 * (g - spec.g_opt) * r
    grad = (r * dg[0], r * dg[1])
    hess = (
        r * d2g[0] + curv * dg[0] * dg[0],
        r * d2g[1] + curv * dg[0] * dg[1],
        r * d2g[2] + curv * dg[1] * dg[1],
    )
    return value, grad, hess


def penalty_value_grad_hess(
    spec: PenaltySpec, h: float, dh: Vec2, d2h: Mat2
) -> tuple[float, Vec2, Mat2]:
    """Compose the one-sided penalty with an inner function's value/grad/Hess.

    The ramp is zero once ``h`` is a margin inside its limit, reaches 1/2 at
    the limit and grows quadratically with the violation; ``dir`` selects
    which side of ``h_ext`` is feasible (-1: below, +1: above).
    """
    slope = -spec.dir / spec.dh_min
    m = 1.0 + slope * (h - spec.h_ext)
    a = max(0.0, m)
    pf1 = slope * a
    # second derivative switches with the active side: slope^2 (1+sign(m))/2
    sgn = 1.0 if m > 0.0 else (-1.0 if m < 0.0 else 0.0)
    pf2 = 0.5 * slope * slope * (1.0 + sgn)
    value = 0.5 * a * a
    grad = (pf1 * dh[0], pf1 * dh[1])
    hess = (
        pf1 * d2h[0] + pf2 * dh[0] * dh[0],
        pf1 * d2h[1] + pf2 * dh[0] * dh[1],
        pf1 * d2h[2] + pf2 * dh[1] * dh[1],
    )
    return value, grad, hess


class Objective:
    """Composite objective U(T, L) with analytic gradient and Hessian.

    Evaluation is undefined at ``T <= T_0`` (swing-speed singularity):
    ``value`` returns +inf there so line searches retreat, while ``grad``
    and ``hess`` raise.
    """

    def __init__(
        self,
        pq0: PQState,
        prev_L: float,
        cycle: CycleSpec,
        goals: list[GoalSpec],
        penalties: list[PenaltySpec],
        cfg: OptimizerConfig,
        params: WalkerParams,
    ) -> None:
        self.pq0 = pq0
        self.prev_L = prev_L
        self.cycle = cycle
        self.goals = goals
        self.penalties = penalties
        self.cfg = cfg
        self.params = params
        self._cache_x: Vec2 | None = None
        self._cache: tuple[float, Vec2, Mat2, float] | None = None

    # -- inner constraint/goal functions and their (T, L) derivatives ------

    def _terms(self, x: Vec2) -> dict[str, tuple[float, Vec2, Mat2]]:
        T, L = x
        w = self.params.omega
        p0, q0 = self.pq0
        E = math.exp(w * T)
        Ei = 1.0 / E
        D1 = 0.5 * (p0 * Ei + q0 * E)
        D1_T = 0.5 * w * (q0 * E - p0 * Ei)
        D1_TT = w * w * D1
        terms: dict[str, tuple[float, Vec2, Mat2]] = {}
        terms["next_divergent"] = (
            q0 * E - L,
            (w * q0 * E, -1.0),
            (w * w * q0 * E, 0.0, 0.0),
        )
        terms["step_time"] = (T, (1.0, 0.0), (0.0, 0.0, 0.0))
        terms["step_length"] = (L, (0.0, 1.0), (0.0, 0.0, 0.0))
        terms["len_sq_max"] = (L * L, (0.0, 2.0 * L), (0.0, 0.0, 2.0))
        terms["len_sq_min"] = terms["len_sq_max"]
        terms["d1_sq"] = (
            D1 * D1,
            (2.0 * D1 * D1_T, 0.0),
            (2.0 * (D1_T * D1_T + D1 * D1_TT), 0.0, 0.0),
        )
        D2 = L - D1
        terms["d2_sq"] = (
            D2 * D2,
            (-2.0 * D2 * D1_T, 2.0 * D2),
            (2.0 * (D1_T * D1_T - D2 * D1_TT), -2.0 * D1_T, 2.0),
        )
        tau = T - self.params.T_0
        N = self.prev_L + L - D1 + 0.5 * (p0 + q0)
        Vs = N / tau
        Vs_T = -D1_T / tau - N / (tau * tau)
        Vs_L = 1.0 / tau
        Vs_TT = -D1_TT / tau + 2.0 * D1_T / (tau * tau) + 2.0 * N / tau**3
        Vs_TL = -1.0 / (tau * tau)
        terms["vswing_sq"] = (
            Vs * Vs,
            (2.0 * Vs * Vs_T, 2.0 * Vs * Vs_L),
            (
                2.0 * (Vs_T * Vs_T + Vs * Vs_TT),
                2.0 * (Vs_T * Vs_L + Vs * Vs_TL),
                2.0 * (Vs_L * Vs_L),
            ),
        )
        return terms

    def _evaluate(self, x: Vec2) -> tuple[float, Vec2, Mat2, float]:
        if x == self._cache_x and self._cache is not None:
            return self._cache
        terms = self._terms(x)
        U = 0.0
        gx = gy = 0.0
        ha = hb = hc = 0.0
        penalty_total = 0.0
        for gl in self.goals:
            v, g, H = goal_value_grad_hess(gl, *terms[gl.kind])
            U += gl.weight * v
            gx += gl.weight * g[0]
            gy += gl.weight * g[1]
            ha += gl.weight * H[0]
            hb += gl.weight * H[1]
            hc += gl.weight * H[2]
        C = self.cfg.C
        for pn in self.penalties:
            v, g, H = penalty_value_grad_hess(pn, *terms[pn.kind])
            penalty_total += v
            U += C * v
            gx += C * g[0]
            gy += C * g[1]
            ha += C * H[0]
            hb += C * H[1]
            hc += C * H[2]
        out = (U, (gx, gy), (ha, hb, hc), penalty_total)
        self._cache_x, self._cache = x, out
        return out

    T_CAP = 10.0  # keeps exp(omega*T) finite if a line search wanders far

    def in_domain(self, x: Vec2) -> bool:
        return self.params.T_0 + 1e-9 < x[0] < self.T_CAP

    def value(self, x: Vec2) -> float:
        if not self.in_domain(x):
            return math.inf
        return self._evaluate(x)[0]

    def grad(self, x: Vec2) -> Vec2:
        if not self.in_domain(x):
            raise ValueError(f"objective gradient undefined at T={x[0]} <= T_0")
        return self._evaluate(x)[1]

    def hess(self, x: Vec2) -> Mat2:
        if not self.in_domain(x):
            raise ValueError(f"objective Hessian undefined at T={x[0]} <= T_0")
        return self._evaluate(x)[2]

    def penalty_total(self, x: Vec2) -> float:
        if not self.in_domain(x):
            return math.inf
        return self._evaluate(x)[3]

    def constraint_values(self, x: Vec2) -> dict[str, float]:
        terms = self._terms(x)
        return {pn.kind: terms[pn.kind][0] for pn in self.penalties}


def default_goals(
    cycle: CycleSpec, cfg: OptimizerConfig, r2: float, r3: float
) -> list[GoalSpec]:
    g = [
        GoalSpec("next_divergent", cycle.q_c, cfg.dg_max[0], cfg.r_goal[0]),
    ]
    if r3 > 0.0:
        g.append(GoalSpec("step_time", cycle.T_c, cfg.dg_max[1], r3))
    if r2 > 0.0:
        g.append(GoalSpec("step_length", cycle.L_c, cfg.dg_max[2], r2))
    return g


def default_penalties(cfg: OptimizerConfig, params: WalkerParams) -> list[PenaltySpec]:
    frac = cfg.dh_min_frac
    half = 0.5 * params.L_max
    pens = [
        PenaltySpec("len_sq_max", params.L_max**2, frac * params.L_max**2, -1),
        PenaltySpec("d1_sq", half**2, frac * half**2, -1),
        PenaltySpec("d2_sq", half**2, frac * half**2, -1),
        PenaltySpec("vswing_sq", params.V_max**2, frac * params.V_max**2, -1),
    ]
    if cfg.enable_min_step_penalty:
        pens.insert(1, PenaltySpec("len_sq_min", cfg.L_min**2, frac * cfg.L_min**2, +1))
    return pens


def assemble_objective(
    pq0: PQState,
    prev_L: float,
    cycle: CycleSpec,
    cfg: OptimizerConfig,
    params: WalkerParams,
    r2: float | None = None,
    r3: float | None = None,
    goals: list[GoalSpec] | None = None,
    penalties: list[PenaltySpec] | None = None,
) -> Objective:
    """Build the composite objective for one step decision.

    When ``r2``/``r3`` are not given they follow the scheduler rule: the
    step-command goals engage only when the state is near the cycle in both
    components.
    """
    if r2 is None or r3 is None:
        near = (
            abs(pq0.q - cycle.q_c) < cfg.eps_q and abs(pq0.p - cycle.p_c) < cfg.eps_p
        )
        r2 = cfg.r_goal[1] if near else 0.0
        r3 = cfg.r_goal[2] if near else 0.0
    if goals is None:
        goals = default_goals(cycle, cfg, r2, r3)
    if penalties is None:
        penalties = default_penalties(cfg, params)
    return Objective(pq0, prev_L, cycle, goals, penalties, cfg, params)


@dataclass(frozen=True)
class OptimalPlan:
    """Planner output: the step plan plus solver diagnostics."""

    plan: StepPlan
    q_next: float
    flagged: bool
    penalty_total: float
    result: MinimizeResult
    r2: float
    r3: float


def plan_optimal_step(
    pq0: PQState,
    prev_L: float,
    cycle: CycleSpec,
    cfg: OptimizerConfig,
    params: WalkerParams,
    near_count: int = 1,
    x0: Vec2 | None = None,
) -> OptimalPlan:
    """Plan the next step by minimizing the composite objective.

    ``near_count`` is the number of consecutive preceding step starts that
    were already near the cycle; the step-command goals switch on only once
    the state has been near for this step and at least one before it
    (a small debounce against chattering around the thresholds).  ``x0``
    warm-starts the solver, e.g. with the previous plan when re-planning
    within a step.
    """
    near_now = (
        abs(pq0.q - cycle.q_c) < cfg.eps_q and abs(pq0.p - cycle.p_c) < cfg.eps_p
    )
    engage = near_now and near_count >= 1
    r2 = cfg.r_goal[1] if engage else 0.0
    r3 = cfg.r_goal[2] if engage else 0.0
    obj = assemble_objective(pq0, prev_L, cycle, cfg, params, r2=r2, r3=r3)

    guesses = [
        (cycle.T_c, cycle.L_c),
        (params.t_min(params.L_max) + 0.05, math.copysign(cycle.L_c, pq0.q or cycle.L_c)),
    ]
    if x0 is not None:
        guesses.insert(0, x0)
    best: MinimizeResult | None = None
    for guess in guesses:
        res = minimize_newton(obj.value, obj.grad, obj.hess, guess, cfg)
        if best is None or res.value < best.value:
            best = res
        if res.converged:
            best = res
            break
    assert best is not None
    T, L = best.x
    penalty_total = obj.penalty_total(best.x)
    flagged = (not best.converged) or penalty_total > 0.0
    q_next = pq0.q * math.exp(params.omega * T) - L
    e0 = pq0.q - cycle.q_c
    alpha = abs((q_next - cycle.q_c) / e0) if e0 != 0.0 else 0.0
    return OptimalPlan(
        plan=StepPlan(L=L, T=T, alpha=alpha),
        q_next=q_next,
        flagged=flagged,
        penalty_total=penalty_total,
        result=best,
        r2=r2,
        r3=r3,
    )


def direct_target_solve(
    pq0: PQState, target: PQState, params: WalkerParams
) -> list[tuple[float, float]]:
    """Exact (T, L) candidates reaching ``target`` in a single step.

    The step map reduces to a quadratic in ``exp(omega*T)`` paired with a
    quadratic in ``L``; only real roots with positive step time survive.
    An empty list is a valid outcome (the target is unreachable in one step).
    """
    w = params.omega
    p0, q0 = pq0
    pd, qd = target
    out: list[tuple[float, float]] = []
    if q0 == 0.0:
        # degenerate linear case: growth factor fixed by the convergent row
        L = -qd
        if p0 != 0.0 and (pd - qd) / p0 > 0.0:
            e_wT = p0 / (pd - qd)
            if e_wT > 1.0:
                out.append((math.log(e_wT) / w, L))
        return out
    disc = (qd - pd) ** 2 + 4.0 * p0 * q0
    if disc < 0.0:
        return out
    root = math.sqrt(disc)
    for sgn in (-1.0, 1.0):
        e_wT = ((qd - pd) + sgn * root) / (2.0 * q0)
        L = (-(qd + pd) + sgn * root) / 2.0
        if e_wT > 1.0:
            out.append((math.log(e_wT) / w, L))
    return out


@dataclass(frozen=True)
class GuidedSequenceResult:
    steps: list[tuple[float, float]]
    targets: list[PQState]
    failed_at: int | None

    @property
    def succeeded(self) -> bool:
        return self.failed_at is None


def guided_target_sequence(
    pq0: PQState,
    cycle: CycleSpec,
    K1: list[float],
    K2: list[float],
    params: WalkerParams,
) -> GuidedSequenceResult:
    """Walk a sequence of interpolated targets toward the cycle.

    Each target moves a fraction ``K`` of the remaining gap to the cycle
    point and is reached by the direct solve; gains in (0, 2) make the
    target sequence converge.  The first step whose solve is empty is
    reported, demonstrating the method's incompleteness.
    """
    if len(K1) != len(K2):
        raise ValueError("K1 and K2 must have equal length")
    for k in (*K1, *K2):
        if not (0.0 < k < 2.0):
            raise ValueError(f"guidance gains must lie in (0, 2), got {k}")
    targets = [PQState(pq0.p, pq0.q)]
    steps: list[tuple[float, float]] = []
    cur = targets[0]
    for i, (k1, k2) in enumerate(zip(K1, K2)):
        nxt = PQState(
            cur.p + k1 * (cycle.p_c - cur.p),
            cur.q + k2 * (cycle.q_c - cur.q),
        )
        targets.append(nxt)
        candidates = direct_target_solve(cur, nxt, params)
        if not candidates:
            return GuidedSequenceResult(steps=steps, targets=targets, failed_at=i)
        T, L = max(candidates, key=lambda c: c[0])
        # exact map: the realized state is the target itself
        realized = step_to_step(cur, L, T, params)
        steps.append((T, L))
        cur = realized
    return GuidedSequenceResult(steps=steps, targets=targets, failed_at=None)
