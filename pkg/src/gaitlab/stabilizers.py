"""Motion-cycle stabilizers.

Four feedback laws make a chosen cycle asymptotically stable, all acting on
the divergent-component error ``e = q - q_c``:

1. ``cop``      - continuous CoP shift inside the support foot, fixed (L, T);
2. ``steplen``  - step displacement ``L = L_c + k e`` at fixed period;
3. ``steptime`` - step period modulation at fixed displacement;
4. ``combined`` - both, with the correction split over two gains.

Each law contracts the step-initial error by a ratio ``alpha``; gains are
clamped to the window allowed by the CoP range, the maximum step length or
the minimum step time, and the set of start states for which some gain
achieves ``alpha < 1`` is the controller's admissible window.  The
convergent component needs no feedback: it tracks an index value set by the
executed (L, T) and stays inside an explicit enclosure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .cycles import CycleSpec
from .momentum import PQState, WalkerParams

__all__ = [
    "StepPlan",
    "GainWindow",
    "GainWindowError",
    "p_star",
    "p_bounds",
    "stabilizer1_cop",
    "stabilizer1_gain_window",
    "stabilizer2_step_length",
    "stabilizer3_step_time",
    "stabilizer4_combined",
    "admissible_q_window",
    "plan_step",
    "swm_closed_loop",
    "CopStepResult",
    "cop_swm_step",
]

CONTROLLER_IDS = ("cop", "steplen", "steptime", "combined")


class GainWindowError(ValueError):
    """No gain in the admissible window can contract the error."""


@dataclass(frozen=True)
class StepPlan:
    """One step's control decision.

    ``cop_gain`` is nonzero only for the CoP stabilizer.  ``alpha`` is the
    predicted contraction ratio of the divergent-component error over the
    step; ``alpha < 1`` means the plan is convergent.
    """

    L: float
    T: float
    cop_gain: float = 0.0
    alpha: float = 0.0


@dataclass(frozen=True)
class GainWindow:
    lo: float
    hi: float
    feasible: bool


def p_star(L: float, T: float, delta_p: float, params: WalkerParams) -> float:
    """Index value tracked by the convergent component for a step of
    displacement ``L``, period ``T`` and aggregate disturbance ``delta_p``."""
    if T <= 0.0:
        raise ValueError(f"step period must be > 0, got {T}")
    return (-L + delta_p) / (1.0 - math.exp(-params.omega * T))


def p_bounds(
    L_max: float,
    T_min: float,
    dp_min: float,
    dp_max: float,
    p_first: float,
    params: WalkerParams,
) -> tuple[float, float]:
    """Enclosure of the convergent component under arbitrary admissible
    steps: it can never leave the interval spanned by its initial value and
    the extreme index values."""
    if T_min <= 0.0:
        raise ValueError(f"T_min must be > 0, got {T_min}")
    den = 1.0 - math.exp(-params.omega * T_min)
    return (
        min((-L_max + dp_min) / den, p_first),
        max((L_max + dp_max) / den, p_first),
    )


# ---------------------------------------------------------------------------
# stabilizer 1: continuous CoP shift


def stabilizer1_cop(
    q_t: float, t: float, c: CycleSpec, k: float, params: WalkerParams
) -> float:
    """CoP shift command at time ``t`` into the step.

    Proportional feedback of the divergent component onto its cycle-exponent
    reference ``q_c * exp(omega*t)``, saturated to the support-foot range.
    Any ``k > 1`` contracts the within-step error while unsaturated.
    """
    e = q_t - c.q_c * math.exp(params.omega * t)
    dz = k * e
    return min(max(dz, params.dz_min), params.dz_max)


def stabilizer1_gain_window(q0: float, c: CycleSpec, params: WalkerParams) -> GainWindow:
    """Gains that both contract (k > 1) and keep the initial CoP command
    inside the support foot."""
    e = q0 - c.q_c
    if e == 0.0:
        return GainWindow(1.0, math.inf, True)
    hi = params.dz_max / e if e > 0 else params.dz_min / e
    return GainWindow(1.0, hi, hi > 1.0)


def cop_contraction(k: float, T: float, params: WalkerParams) -> float:
    """Per-step error ratio of the CoP stabilizer while unsaturated."""
    return math.exp(-params.omega * (k - 1.0) * T)


# ---------------------------------------------------------------------------
# stabilizers 2-4: step planning


def _contraction_interval(E: float) -> tuple[float, float]:
    # gains whose combined effect leaves |E - k| < 1
    return (E - 1.0, E + 1.0)


def _length_gain_limits(e: float, c: CycleSpec, params: WalkerParams) -> tuple[float, float]:
    # |L_c + k e| <= L_max
    lo = -params.L_max / abs(e) - c.L_c / e
    hi = params.L_max / abs(e) - c.L_c / e
    return (lo, hi) if lo <= hi else (hi, lo)


def _pick_gain(lo: float, hi: float, deadbeat: float) -> float:
    if lo <= deadbeat <= hi:
        return deadbeat
    return hi if deadbeat > hi else lo


def stabilizer2_step_length(
    q0: float, c: CycleSpec, params: WalkerParams, clamp: bool = False
) -> StepPlan:
    """Step-length stabilizer: ``L = L_c + k e`` at the cycle period.

    The gain minimizing the contraction ratio is the deadbeat value
    ``exp(omega*T_c)`` when the step-length bound admits it, else the nearest
    bound endpoint.  Outside the admissible start window no contracting gain
    exists; with ``clamp=True`` a saturated plan (``alpha >= 1``) is returned
    instead of raising.
    """
    w = params.omega
    E = math.exp(w * c.T_c)
    e = q0 - c.q_c
    if e == 0.0:
        return StepPlan(L=c.L_c, T=c.T_c, alpha=0.0)
    lo, hi = _length_gain_limits(e, c, params)
    k = _pick_gain(lo, hi, E)
    alpha = abs(E - k)
    if alpha >= 1.0 and not clamp:
        raise GainWindowError(
            f"step-length stabilizer: q0={q0} outside admissible window"
        )
    return StepPlan(L=c.L_c + k * e, T=c.T_c, alpha=alpha)


def stabilizer3_step_time(
    q0: float, c: CycleSpec, params: WalkerParams, clamp: bool = False
) -> StepPlan:
    """Step-time stabilizer: period modulation at the cycle displacement.

    Requires ``q0`` on the same side as ``q_c`` (a time change alone cannot
    reverse the walking direction).  The period is bounded below by the
    minimum step time for ``L_c``.
    """
    if q0 * c.q_c <= 0.0:
        raise GainWindowError(
            f"step-time stabilizer cannot act across directions (q0={q0}, q_c={c.q_c})"
        )
    w = params.omega
    E = math.exp(w * c.T_c)
    E_min = math.exp(w * params.t_min(c.L_c))
    e = q0 - c.q_c
    if e == 0.0:
        return StepPlan(L=c.L_c, T=c.T_c, alpha=0.0)
    lo, hi = _contraction_interval(E)
    # T >= T_min translates to a one-sided gain bound whose side depends on
    # whether q0 overshoots or undershoots q_c
    bound = q0 * (E - E_min) / e
    if e / q0 > 0:
        hi = min(hi, bound)
    else:
        lo = max(lo, bound)
    k = _pick_gain(lo, hi, E)
    alpha = abs(E - k)
    if alpha >= 1.0 and not clamp:
        raise GainWindowError(
            f"step-time stabilizer: q0={q0} outside admissible window"
        )
    arg = 1.0 - k * e / (q0 * E)
    T = c.T_c + math.log(arg) / w
    return StepPlan(L=c.L_c, T=T, alpha=alpha)


def stabilizer4_combined(
    q0: float, c: CycleSpec, params: WalkerParams, clamp: bool = False
) -> StepPlan:
    """Combined stabilizer: length and time corrections share the error.

    The total gain ``k_L + k_T`` plays the single-gain role; the length gain
    takes as much of the correction as its bound allows before timing is
    touched.  The step-time bound is taken at ``t_min(L_max)`` so it stays
    valid for every admissible length.
    """
    w = params.omega
    E = math.exp(w * c.T_c)
    E_min = math.exp(w * params.t_min(params.L_max))
    e = q0 - c.q_c
    if e == 0.0:
        return StepPlan(L=c.L_c, T=c.T_c, alpha=0.0)
    loS, hiS = _contraction_interval(E)
    loL, hiL = _length_gain_limits(e, c, params)
    t_bound = q0 * (E - E_min) / e
    if e / q0 > 0:
        loT, hiT = -math.inf, t_bound
    else:
        loT, hiT = t_bound, math.inf
    lo = max(loS, loL + loT)
    hi = min(hiS, hiL + hiT)
    if lo <= hi:
        s = _pick_gain(lo, hi, E)
    else:
        s = min(max(E, loL + loT), hiL + hiT)  # best reachable total gain
    if abs(E - s) >= 1.0 and not clamp:
        raise GainWindowError(
            f"combined stabilizer: q0={q0} outside admissible window"
        )
    # length takes as much of the total as its bound allows, timing the rest
    k_L = min(max(s, loL), hiL)
    k_T = s - k_L
    if not (loT <= k_T <= hiT):
        k_T = min(max(k_T, loT), hiT)
        k_L = min(max(s - k_T, loL), hiL)
    alpha = abs(E - (k_L + k_T))
    arg = 1.0 - k_T * e / (q0 * E)
    T = c.T_c + math.log(arg) / w if arg > 0 else params.t_min(params.L_max)
    return StepPlan(L=c.L_c + k_L * e, T=T, alpha=alpha)


def admissible_q_window(
    which: str, c: CycleSpec, params: WalkerParams
) -> tuple[float, float]:
    """Start-state window of the divergent component for each controller.

    Inside the window some admissible gain contracts the error; outside,
    none does.  The CoP window is centered on ``q_c`` with the (signed) CoP
    range; note the lower CoP bound is negative, so the window is
    ``(q_c + dz_min, q_c + dz_max)``.
    """
    w = params.omega
    if which == "cop":
        return (c.q_c + params.dz_min, c.q_c + params.dz_max)
    if which == "steplen":
        b = params.L_max / (math.exp(w * c.T_c) - 1.0)
        return (-b, b)
    if which == "steptime":
        b = c.L_c / (math.exp(w * params.t_min(c.L_c)) - 1.0)
        return (min(0.0, b), max(0.0, b))
    if which == "combined":
        b = params.L_max / (math.exp(w * params.t_min(params.L_max)) - 1.0)
        return (-b, b)
    raise ValueError(f"unknown controller id {which!r}")


def plan_step(
    which: str, q0: float, c: CycleSpec, params: WalkerParams, clamp: bool = False
) -> StepPlan:
    """Dispatch to one of the step-planning stabilizers (2-4)."""
    if which == "steplen":
        return stabilizer2_step_length(q0, c, params, clamp)
    if which == "steptime":
        return stabilizer3_step_time(q0, c, params, clamp)
    if which == "combined":
        return stabilizer4_combined(q0, c, params, clamp)
    raise ValueError(f"unknown step-planning controller {which!r}")


# ---------------------------------------------------------------------------
# simplified-model closed loops (exact, no physics testbed involved)


@dataclass(frozen=True)
class CopStepResult:
    """Outcome of one CoP-stabilized step on the simplified model."""

    pq_next: PQState
    alpha: float
    saturated: bool


def _cop_error_flow(e0: float, k: float, T: float, params: WalkerParams) -> tuple[float, float]:
    """Advance the within-step divergent error under the saturated CoP law.

    Piecewise-exact: in saturation the error obeys a first-order unstable
    flow toward the saturation equilibrium; once ``|k e| <= dz`` it decays
    with exponent ``omega (k - 1)``.  Returns (e(T), time spent saturated).
    """
    w = params.omega
    if e0 == 0.0:
        return 0.0, 0.0
    dz = params.dz_max if e0 > 0 else params.dz_min
    e_sat_exit = dz / k  # same sign as e0
    if abs(e0) <= abs(e_sat_exit):
        return e0 * math.exp(-w * (k - 1.0) * T), 0.0
    # saturated segment: e(t) = dz + (e0 - dz) e^{w t}
    if abs(e0) >= abs(dz):
        # at or beyond the unstable equilibrium: never unsaturates
        return dz + (e0 - dz) * math.exp(w * T), T
    t_exit = math.log((dz - e_sat_exit) / (dz - e0)) / w
    if t_exit >= T:
        return dz + (e0 - dz) * math.exp(w * T), T
    return e_sat_exit * math.exp(-w * (k - 1.0) * (T - t_exit)), t_exit


def cop_swm_step(
    pq0: PQState, c: CycleSpec, k: float, params: WalkerParams, quad_nodes: int = 48
) -> CopStepResult:
    """One full step of the CoP stabilizer on the simplified model.

    The divergent component uses the piecewise-exact error flow; the
    convergent component integrates its CoP forcing by Gauss-Legendre
    quadrature over the analytic within-step command.
    """
    import numpy as np

    w = params.omega
    T = c.T_c
    e0 = pq0.q - c.q_c
    eT, t_exit = _cop_error_flow(e0, k, T, params)
    q_next = c.q_c + eT  # transfer subtracts L_c from both q and its reference

    def dz_of(t: float) -> float:
        if e0 == 0.0:
            return 0.0
        dz = params.dz_max if e0 > 0 else params.dz_min
        if t < t_exit:
            e = dz + (e0 - dz) * math.exp(w * t)
        else:
            e_at_exit = e0 if t_exit == 0.0 else dz / k
            e = e_at_exit * math.exp(-w * (k - 1.0) * (t - t_exit))
        return min(max(k * e, params.dz_min), params.dz_max)

    # forced convergent flow: p(T) = p0 e^{-wT} + w \int dz(tau) e^{-w(T-tau)} dtau
    nodes, weights = np.polynomial.legendre.leggauss(quad_nodes)
    total = 0.0
    for a, b in ((0.0, t_exit), (t_exit, T)):
        if b - a <= 0.0:
            continue
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        for xi, wt in zip(nodes, weights):
            tau = mid + half * xi
            total += wt * half * dz_of(tau) * math.exp(-w * (T - tau))
    p_T = pq0.p * math.exp(-w * T) + w * total
    p_next = p_T - c.L_c
    alpha = abs(eT / e0) if e0 != 0.0 else 0.0
    return CopStepResult(PQState(p_next, q_next), alpha, t_exit > 0.0)


def swm_closed_loop(
    which: str,
    pq0: PQState,
    c: CycleSpec,
    params: WalkerParams,
    n_steps: int,
    cop_gain: float = 5.0,
    clamp: bool = True,
) -> tuple[list[PQState], list[float]]:
    """Closed-loop rollout on the simplified model.

    Returns the step-initial states (length ``n_steps + 1``) and the
    realized per-step contraction ratios of the divergent error.
    """
    from .momentum import step_to_step

    states = [pq0]
    alphas: list[float] = []
    for _ in range(n_steps):
        cur = states[-1]
        e_before = cur.q - c.q_c
        if which == "cop":
            res = cop_swm_step(cur, c, cop_gain, params)
            nxt = res.pq_next
        else:
            plan = plan_step(which, cur.q, c, params, clamp=clamp)
            nxt = step_to_step(cur, plan.L, plan.T, params)
        e_after = nxt.q - c.q_c
        alphas.append(abs(e_after / e_before) if e_before != 0.0 else 0.0)
        states.append(nxt)
    return states, alphas
