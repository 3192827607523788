"""Complete-model walking testbed.

A rigid torso with massless legs walks in the sagittal plane: three degrees
of freedom (horizontal, vertical, pitch) driven by a momentum-tracking force
controller.  The vertical force tracks a reference height profile with
gravity feedforward, the torque tracks a reference angular-momentum profile,
and the horizontal force is slaved to both so that the center of pressure
sits exactly at its commanded point.  Steps are hybrid events: the stance
point jumps by the planned displacement at the planned landing time, which
is exactly the step-transition of the momentum-space model.

The stabilizers plug in as step planners (or, for the CoP law, as a
continuous command); the optimal planner may additionally re-plan during
the step from instant-estimated step-initial components.  Impulse pushes
are injected as constant forces over their duration, with integration
segments aligned to their boundaries so the transferred momentum is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .cycles import CycleSpec
from .momentum import PQState, PendulumState, WalkerParams, to_pq
from .newton import OptimizerConfig
from .optimal import plan_optimal_step
from .stabilizers import GainWindowError, StepPlan, _cop_error_flow, plan_step

__all__ = [
    "RigidBodyState",
    "ImpulseEvent",
    "ReferenceTrajectories",
    "MomentumGains",
    "SimConfig",
    "StepRecord",
    "ConstraintReport",
    "SimTrace",
    "momentum_tracking_forces",
    "integrate_torso",
    "joint_torques",
    "leg_joint_angles",
    "swing_foot_position",
    "predicted_step_metrics",
    "constraint_metrics",
    "run_walk",
    "cwm_deviation_rollout",
    "CwmDeviation",
    "CONTROLLERS",
]

CONTROLLERS = ("openloop", "cop", "steplen", "steptime", "combined", "optimal")

CONTINUOUS_COLUMNS = (
    "t", "x", "dx", "ddx", "y", "dy", "theta", "dtheta",
    "p", "q", "z_stance", "dz_des", "Fx", "Fy", "Tz", "mu_req",
)

STEP_COLUMNS = (
    "i", "L", "T", "p0", "q0", "p_star", "D1", "D2", "Vswing", "Vavg", "alpha",
)


@dataclass
class RigidBodyState:
    """Torso state plus foot bookkeeping for the hybrid walk."""

    x: float
    xdot: float
    y: float
    ydot: float
    theta: float
    thetadot: float
    z_stance: float
    z_swing: float
    t_in_step: float = 0.0
    step_index: int = 1

    def pq(self, params: WalkerParams) -> PQState:
        return to_pq(PendulumState(self.x - self.z_stance, self.xdot), params)


@dataclass(frozen=True)
class ImpulseEvent:
    """Constant-force push: impulse/duration applied over the window
    starting ``onset_in_step`` seconds into step ``step_index``."""

    dLx: float
    dLy: float
    dHz: float
    step_index: int
    onset_in_step: float = 0.15
    duration: float = 0.05

    def __post_init__(self) -> None:
        if self.duration <= 0.0:
            raise ValueError("impulse duration must be > 0")

    def forces(self) -> tuple[float, float, float]:
        return (self.dLx / self.duration, self.dLy / self.duration, self.dHz / self.duration)


@dataclass(frozen=True)
class ReferenceTrajectories:
    """Harmonic height / angular-momentum references, one period per step.

    ``y_des = h + A_y sin(2 pi t/T_c + phi_y)`` and
    ``H_des = A_H sin(2 pi t/T_c + phi_H)``; the pitch reference integrates
    ``H_des / I`` from zero.
    """

    A_y: float = 0.025
    phi_y: float = -math.pi / 2
    A_H: float | None = None  # default 0.05 M V_c h, resolved against the cycle
    phi_H: float = 0.0

    def __post_init__(self) -> None:
        if self.A_y < 0.0 or (self.A_H is not None and self.A_H < 0.0):
            raise ValueError("reference amplitudes must be >= 0")

    @staticmethod
    def flat() -> "ReferenceTrajectories":
        return ReferenceTrajectories(A_y=0.0, A_H=0.0)

    def resolved_A_H(self, cycle: CycleSpec, params: WalkerParams) -> float:
        if self.A_H is not None:
            return self.A_H
        return 0.05 * params.M * abs(cycle.V_c) * params.h

    def vertical(self, t: float, cycle: CycleSpec, params: WalkerParams) -> tuple[float, float, float]:
        om = 2.0 * math.pi / cycle.T_c
        ph = om * t + self.phi_y
        y = params.h + self.A_y * math.sin(ph)
        yd = self.A_y * om * math.cos(ph)
        ydd = -self.A_y * om * om * math.sin(ph)
        return y, yd, ydd

    def angular(self, t: float, cycle: CycleSpec, params: WalkerParams) -> tuple[float, float, float]:
        om = 2.0 * math.pi / cycle.T_c
        A = self.resolved_A_H(cycle, params) / params.I
        ph = om * t + self.phi_H
        th = (A / om) * (math.cos(self.phi_H) - math.cos(ph))
        thd = A * math.sin(ph)
        thdd = A * om * math.cos(ph)
        return th, thd, thdd


@dataclass(frozen=True)
class MomentumGains:
    """Critically damped tracking gains, bandwidth well above omega."""

    kp1: float = 100.0
    kv1: float = 20.0
    kp2: float = 100.0
    kv2: float = 20.0


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-4
    gains: MomentumGains = field(default_factory=MomentumGains)
    cop_gain: float = 5.0
    replan_interval: float = 0.01     # optimal controller only
    fall_height_frac: float = 0.5
    fall_component: float = 10.0
    leg_l1: float = 0.534
    leg_l2: float = 0.534
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)


@dataclass
class StepRecord:
    i: int
    L: float
    T: float
    p0: float
    q0: float
    p_star: float
    d1: float
    d2: float
    vswing: float
    vavg: float
    alpha: float
    d1_planned: float = 0.0
    d2_planned: float = 0.0
    vswing_planned: float = 0.0
    flagged: bool = False


@dataclass
class ConstraintReport:
    """Worst realized constraint metrics over a run."""

    D1: float
    D2: float
    V_swing_mean: float
    mu_required: float
    violated: list[str] = field(default_factory=list)


@dataclass
class SimTrace:
    params: WalkerParams
    cycle: CycleSpec
    controller: str
    rows: list[tuple] = field(default_factory=list)
    steps: list[StepRecord] = field(default_factory=list)
    fell: bool = False
    fall_time: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def report(self) -> ConstraintReport:
        mu = [r[15] for r in self.rows]
        return constraint_metrics(self.steps, mu, self.params)


# ---------------------------------------------------------------------------
# force controller, integrator, joint torques


def momentum_tracking_forces(
    st: RigidBodyState,
    refs: ReferenceTrajectories,
    z_des: float,
    gains: MomentumGains,
    cycle: CycleSpec,
    params: WalkerParams,
) -> tuple[float, float, float]:
    """Control forces/torque on the torso at the current instant.

    Vertical: PD on the height reference with gravity and acceleration
    feedforward.  Angular: PD on the integrated angular-momentum reference.
    Horizontal: slaved so the resulting center of pressure is ``z_des``.
    """
    if st.y <= 0.0:
        raise ValueError("CoM height must be positive")
    t = st.t_in_step
    y_des, yd_des, ydd_des = refs.vertical(t, cycle, params)
    th_des, thd_des, thdd_des = refs.angular(t, cycle, params)
    Fy = params.M * (
        params.g + ydd_des + gains.kv1 * (yd_des - st.ydot) + gains.kp1 * (y_des - st.y)
    )
    Tz = params.I * (
        thdd_des + gains.kv2 * (thd_des - st.thetadot) + gains.kp2 * (th_des - st.theta)
    )
    Fx = (Tz + (st.x - z_des) * Fy) / st.y
    return Fx, Fy, Tz


def integrate_torso(st: RigidBodyState, force_law, disturbance, h: float) -> RigidBodyState:
    """One RK4 step of the torso dynamics.

    ``force_law(t_in_step, x, xdot, y, ydot, theta, thetadot)`` is evaluated
    at every stage so the closed loop integrates at full fourth order;
    ``disturbance`` is a constant (Fx, Fy, Tz) over the substep.
    """
    if h <= 0.0:
        raise ValueError("integration step must be > 0")
    M = force_law.params.M
    I = force_law.params.I
    g = force_law.params.g
    dFx, dFy, dTz = disturbance

    def deriv(t, s):
        x, xd, y, yd, th, thd = s
        Fx, Fy, Tz = force_law(t, x, xd, y, yd, th, thd)
        return (
            xd,
            (Fx + dFx) / M,
            yd,
            (Fy + dFy) / M - g,
            thd,
            (Tz + dTz) / I,
        )

    s0 = (st.x, st.xdot, st.y, st.ydot, st.theta, st.thetadot)
    t0 = st.t_in_step
    k1 = deriv(t0, s0)
    s1 = tuple(a + 0.5 * h * b for a, b in zip(s0, k1))
    k2 = deriv(t0 + 0.5 * h, s1)
    s2 = tuple(a + 0.5 * h * b for a, b in zip(s0, k2))
    k3 = deriv(t0 + 0.5 * h, s2)
    s3 = tuple(a + h * b for a, b in zip(s0, k3))
    k4 = deriv(t0 + h, s3)
    out = tuple(
        a + (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        for a, b1, b2, b3, b4 in zip(s0, k1, k2, k3, k4)
    )
    return replace(
        st,
        x=out[0], xdot=out[1], y=out[2], ydot=out[3], theta=out[4], thetadot=out[5],
        t_in_step=st.t_in_step + h,
    )


def leg_joint_angles(
    st: RigidBodyState, l1: float, l2: float
) -> tuple[float, float, float]:
    """Stance-leg joint angles (ankle, knee, hip) placing the hip at the CoM."""
    dx = st.x - st.z_stance
    dy = st.y
    d2 = dx * dx + dy * dy
    d = math.sqrt(d2)
    if d > l1 + l2 or d < abs(l1 - l2):
        raise ValueError(f"leg configuration unreachable: CoM distance {d:.3f}")
    cos_knee = (d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    cos_knee = min(1.0, max(-1.0, cos_knee))
    q2 = math.acos(cos_knee)  # knee-forward branch
    base = math.atan2(dy, dx)
    q1 = base - math.atan2(l2 * math.sin(q2), l1 + l2 * math.cos(q2))
    q3 = st.theta - q1 - q2
    return q1, q2, q3


def joint_torques(
    st: RigidBodyState,
    forces: tuple[float, float, float],
    l1: float,
    l2: float,
    dz_des: float,
) -> tuple[float, float, float]:
    """Stance-leg joint torques via the transposed leg Jacobian.

    With the horizontal force slaved to the CoP command, the ankle torque
    collapses to ``dz_des * Fy`` - zero CoP shift needs no foot at all.
    """
    Fx, Fy, Tz = forces
    q1, q2, _ = leg_joint_angles(st, l1, l2)
    s1, c1 = math.sin(q1), math.cos(q1)
    s12, c12 = math.sin(q1 + q2), math.cos(q1 + q2)
    tau1 = (-l1 * s1 - l2 * s12) * Fx + (l1 * c1 + l2 * c12) * Fy + Tz
    tau2 = -l2 * s12 * Fx + l2 * c12 * Fy + Tz
    tau3 = Tz
    # the analytic reduction of tau1; kept for callers that want the
    # identity without trigonometric round-off
    tau1_identity = dz_des * Fy
    if abs(tau1 - tau1_identity) < 1e-6 * max(1.0, abs(Fy)):
        tau1 = tau1_identity
    return tau1, tau2, tau3


def swing_foot_position(
    t: float, T: float, z_from: float, z_to: float
) -> float:
    """Quintic interpolation of the swing foot between footholds (legs are
    massless, so this is purely for metrics and visualization)."""
    if T <= 0.0:
        raise ValueError("step period must be > 0")
    u = min(1.0, max(0.0, t / T))
    blend = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
    return z_from + (z_to - z_from) * blend


# ---------------------------------------------------------------------------
# constraint metrics


def predicted_step_metrics(
    pq0: PQState, prev_L: float, L: float, T: float, params: WalkerParams
) -> tuple[float, float, float]:
    """Planning estimates of (D1, D2, V_swing) for a step command."""
    w = params.omega
    p_T = pq0.p * math.exp(-w * T)
    q_T = pq0.q * math.exp(w * T)
    d1 = 0.5 * (p_T + q_T)
    d2 = L - d1
    vs = (prev_L + L - 0.5 * ((p_T + q_T) - (pq0.p + pq0.q))) / (T - params.T_0)
    return d1, d2, vs


def constraint_metrics(
    steps: list[StepRecord], mu_series: list[float], params: WalkerParams
) -> ConstraintReport:
    """Aggregate worst-case realized constraint metrics over a run."""
    half = 0.5 * params.L_max
    d1 = max((abs(s.d1) for s in steps), default=0.0)
    d2 = max((abs(s.d2) for s in steps), default=0.0)
    vs = max((abs(s.vswing) for s in steps), default=0.0)
    mu = max(mu_series, default=0.0)
    violated = []
    if d1 > half:
        violated.append("D1")
    if d2 > half:
        violated.append("D2")
    if vs > params.V_max:
        violated.append("V_swing")
    return ConstraintReport(D1=d1, D2=d2, V_swing_mean=vs, mu_required=mu, violated=violated)


# ---------------------------------------------------------------------------
# step controllers


class _ForceLaw:
    """Callable force law bound to the current step's stance point and CoP
    command; evaluated inside every integrator stage.

    References are keyed to the within-step time, so the height/angular bob
    re-synchronizes to every step; at off-nominal landings this re-phasing
    is a small reference jump that the second-order tracking absorbs.
    """

    def __init__(self, refs, cycle, params, gains, z_stance, cop_gain):
        self.refs = refs
        self.cycle = cycle
        self.params = params
        self.gains = gains
        self.z_stance = z_stance
        self.cop_gain = cop_gain  # None for every controller but the CoP law
        self.last_dz = 0.0

    def dz_des(self, t, x, xd):
        if self.cop_gain is None:
            return 0.0
        w = self.params.omega
        q_inst = (x - self.z_stance) + xd / w
        e = q_inst - self.cycle.q_c * math.exp(w * t)
        dz = self.cop_gain * e
        return min(max(dz, self.params.dz_min), self.params.dz_max)

    def __call__(self, t, x, xd, y, yd, th, thd):
        p = self.params
        y_des, yd_des, ydd_des = self.refs.vertical(t, self.cycle, p)
        th_des, thd_des, thdd_des = self.refs.angular(t, self.cycle, p)
        g = self.gains
        Fy = p.M * (p.g + ydd_des + g.kv1 * (yd_des - yd) + g.kp1 * (y_des - y))
        Tz = p.I * (thdd_des + g.kv2 * (thd_des - thd) + g.kp2 * (th_des - th))
        dz = self.dz_des(t, x, xd)
        self.last_dz = dz
        Fx = (Tz + (x - (self.z_stance + dz)) * Fy) / y
        return Fx, Fy, Tz


class _StepPlanner:
    """Per-controller planning policy used by :func:`run_walk`."""

    def __init__(self, which: str, cycle: CycleSpec, params: WalkerParams, cfg: SimConfig):
        if which not in CONTROLLERS:
            raise ValueError(f"unknown controller {which!r}")
        self.which = which
        self.cycle = cycle
        self.params = params
        self.cfg = cfg
        self.near_count = 0
        self.replans = which == "optimal"
        self.notes: list[str] = []

    def plan(self, pq0: PQState, prev_L: float, step_index: int) -> tuple[StepPlan, bool]:
        c, p = self.cycle, self.params
        if self.which in ("openloop", "cop"):
            e0 = pq0.q - c.q_c
            if self.which == "cop":
                eT, _ = _cop_error_flow(e0, self.cfg.cop_gain, c.T_c, p)
                alpha = abs(eT / e0) if e0 else 0.0
                return StepPlan(c.L_c, c.T_c, self.cfg.cop_gain, alpha), False
            q_next = pq0.q * math.exp(p.omega * c.T_c) - c.L_c
            alpha = abs((q_next - c.q_c) / e0) if e0 else 0.0
            return StepPlan(c.L_c, c.T_c, 0.0, alpha), False
        if self.which == "optimal":
            near = abs(pq0.q - c.q_c) < self.cfg.optimizer.eps_q and abs(
                pq0.p - c.p_c
            ) < self.cfg.optimizer.eps_p
            opt = plan_optimal_step(
                pq0, prev_L, c, self.cfg.optimizer, p, near_count=self.near_count
            )
            self.near_count = self.near_count + 1 if near else 0
            return opt.plan, opt.flagged
        try:
            plan = plan_step(self.which, pq0.q, c, p, clamp=True)
            return plan, plan.alpha >= 1.0
        except GainWindowError as err:
            self.notes.append(f"step {step_index}: {err}")
            e0 = pq0.q - c.q_c
            q_next = pq0.q * math.exp(p.omega * c.T_c) - c.L_c
            alpha = abs((q_next - c.q_c) / e0) if e0 else 0.0
            return StepPlan(c.L_c, c.T_c, 0.0, alpha), True

    def replan(
        self, pq_est: PQState, prev_L: float, warm: tuple[float, float] | None = None
    ) -> tuple[StepPlan, bool]:
        opt = plan_optimal_step(
            pq_est, prev_L, self.cycle, self.cfg.optimizer, self.params,
            near_count=self.near_count, x0=warm,
        )
        return opt.plan, opt.flagged


# ---------------------------------------------------------------------------
# the hybrid walk


def run_walk(
    start: RigidBodyState,
    cycle: CycleSpec,
    controller: str,
    params: WalkerParams,
    n_steps: int = 20,
    refs: ReferenceTrajectories | None = None,
    impulses: list[ImpulseEvent] | None = None,
    cfg: SimConfig | None = None,
) -> SimTrace:
    """Hybrid simulation of ``n_steps`` steps under the chosen controller.

    Continuous phases integrate the torso dynamics at fixed step ``cfg.dt``
    with segment boundaries aligned to impulse onsets/offsets; landings are
    time-triggered at the planned period and apply the support transfer.  A
    fall (height collapse or runaway components) terminates the run and is
    reported on the trace, never raised.
    """
    cfg = cfg or SimConfig()
    refs = refs if refs is not None else ReferenceTrajectories()
    impulses = impulses or []
    planner = _StepPlanner(controller, cycle, params, cfg)
    trace = SimTrace(params=params, cycle=cycle, controller=controller)

    st = replace(start)
    t_global = 0.0
    prev_L = st.z_stance - st.z_swing
    pending = list(impulses)
    active_windows: list[tuple[float, float, tuple[float, float, float]]] = []
    fall_y = cfg.fall_height_frac * params.h

    consecutive_nonconv = 0
    for _ in range(n_steps):
        pq0 = st.pq(params)
        plan, flagged = planner.plan(pq0, prev_L, st.step_index)
        T_cur, L_cur = plan.T, plan.L
        # impulses scheduled for this step get absolute windows now
        for ev in [e for e in pending if e.step_index == st.step_index]:
            t_on = t_global + ev.onset_in_step
            active_windows.append((t_on, t_on + ev.duration, ev.forces()))
            pending.remove(ev)

        law = _ForceLaw(
            refs, cycle, params, cfg.gains, st.z_stance,
            cfg.cop_gain if controller == "cop" else None,
        )
        x_start = st.x
        next_replan = cfg.replan_interval
        while st.t_in_step < T_cur - 1e-12:
            t_cell = t_global + st.t_in_step
            boundaries = [t_global + T_cur]
            dist = (0.0, 0.0, 0.0)
            for (a, b, f) in active_windows:
                if a - 1e-12 <= t_cell < b - 1e-12:
                    dist = (dist[0] + f[0], dist[1] + f[1], dist[2] + f[2])
                if a > t_cell + 1e-12:
                    boundaries.append(a)
                if b > t_cell + 1e-12:
                    boundaries.append(b)
            h = min(cfg.dt, min(boundaries) - t_cell)
            if h <= 0.0:
                h = cfg.dt

            Fx, Fy, Tz = law(st.t_in_step, st.x, st.xdot, st.y, st.ydot, st.theta, st.thetadot)
            pq = st.pq(params)
            mu = abs(Fx / Fy) if Fy > 0.0 else math.inf
            trace.rows.append((
                t_cell, st.x, st.xdot, (Fx + dist[0]) / params.M, st.y, st.ydot,
                st.theta, st.thetadot, pq.p, pq.q, st.z_stance, law.last_dz,
                Fx, Fy, Tz, mu,
            ))

            st = integrate_torso(st, law, dist, h)
            if st.y < fall_y:
                trace.fell = True
                trace.fall_time = t_global + st.t_in_step
                trace.notes.append(
                    f"fall at t={trace.fall_time:.3f}s (step {st.step_index})"
                )
                return trace
            pq_now = st.pq(params)
            if abs(pq_now.p) > cfg.fall_component or abs(pq_now.q) > cfg.fall_component:
                trace.fell = True
                trace.fall_time = t_global + st.t_in_step
                trace.notes.append(
                    f"component runaway at t={trace.fall_time:.3f}s (step {st.step_index})"
                )
                return trace

            if planner.replans and st.t_in_step + 1e-12 >= next_replan:
                next_replan += cfg.replan_interval
                w = params.omega
                e = math.exp(w * st.t_in_step)
                pq_est = PQState(pq_now.p * e, pq_now.q / e)
                new_plan, new_flag = planner.replan(pq_est, prev_L, warm=(T_cur, L_cur))
                T_cur = max(new_plan.T, st.t_in_step)
                L_cur = new_plan.L
                flagged = flagged or new_flag
                plan = new_plan

        # landing: realized metrics, then the support transfer
        pq_T = st.pq(params)
        T_real = st.t_in_step
        d1 = 0.5 * (pq_T.p + pq_T.q)
        d2 = L_cur - d1
        denom = max(T_real - params.T_0, 1e-9)
        vswing = (prev_L + L_cur - (st.x - x_start)) / denom
        vavg = (st.x - x_start) / T_real if T_real > 0 else 0.0
        d1p, d2p, vsp = predicted_step_metrics(pq0, prev_L, L_cur, T_real, params)
        pstar = (-L_cur) / (1.0 - math.exp(-params.omega * T_real))
        trace.steps.append(StepRecord(
            i=st.step_index, L=L_cur, T=T_real, p0=pq0.p, q0=pq0.q, p_star=pstar,
            d1=d1, d2=d2, vswing=vswing, vavg=vavg, alpha=plan.alpha,
            d1_planned=d1p, d2_planned=d2p, vswing_planned=vsp, flagged=flagged,
        ))
        if plan.alpha >= 1.0:
            consecutive_nonconv += 1
            if consecutive_nonconv == 5:
                trace.notes.append(
                    f"no contracting gain for 5 consecutive steps (through step {st.step_index})"
                )
        else:
            consecutive_nonconv = 0

        t_global += T_real
        new_swing = st.z_stance
        st.z_stance += L_cur
        st.z_swing = new_swing
        st.step_index += 1
        st.t_in_step = 0.0
        prev_L = L_cur

    trace.notes.extend(planner.notes)
    return trace


# ---------------------------------------------------------------------------
# complete-vs-simplified deviation study


_CWM_CASES = {
    1: dict(A_y=0.025, phi_y=-math.pi / 2, A_H_frac=0.0, phi_H=0.0),
    2: dict(A_y=0.025, phi_y=math.pi / 2, A_H_frac=0.0, phi_H=0.0),
    3: dict(A_y=0.0, phi_y=0.0, A_H_frac=0.2, phi_H=0.0),
    4: dict(A_y=0.0, phi_y=0.0, A_H_frac=0.2, phi_H=math.pi),
}


@dataclass
class CwmDeviation:
    case: int
    times: list[float]
    p: list[float]
    q: list[float]
    pq_end: PQState
    swm_end: PQState
    deviation: tuple[float, float]
    product_drift: float


def cwm_deviation_rollout(
    case: int,
    cycle: CycleSpec,
    params: WalkerParams,
    amplitude_scale: float = 1.0,
    dt: float = 1e-4,
) -> CwmDeviation:
    """Integrate the coupled component dynamics over one step and compare
    with the pure exponential flow.

    The complete model adds a vertical coupling ``f1 = ydd/y`` (through the
    effective stiffness ``(g + ydd)/y``) and a rotational forcing
    ``f2 = Hdot/(M y)`` to the component dynamics; the four cases exercise
    harmonic height/angular-momentum candidates in both human-like and
    reversed phases.  With ``amplitude_scale=0`` both couplings vanish and
    the flow must reproduce the simplified model exactly.
    """
    if case not in _CWM_CASES:
        raise ValueError(f"deviation case must be one of 1..4, got {case}")
    spec = _CWM_CASES[case]
    w0 = params.omega
    Om = 2.0 * math.pi / cycle.T_c
    A_y = spec["A_y"] * amplitude_scale
    A_H = spec["A_H_frac"] * params.M * abs(cycle.V_c) * params.h * amplitude_scale
    phi_y, phi_H = spec["phi_y"], spec["phi_H"]

    def rhs(t: float, p: float, q: float) -> tuple[float, float]:
        y = params.h + A_y * math.sin(Om * t + phi_y)
        ydd = -A_y * Om * Om * math.sin(Om * t + phi_y)
        Hdot = A_H * Om * math.cos(Om * t + phi_H)
        c = (params.g + ydd) / y
        f2 = Hdot / (params.M * y)
        a = 0.5 * w0 + 0.5 * c / w0
        b = 0.5 * w0 - 0.5 * c / w0
        u = f2 / w0
        return (-a * p + b * q - u, -b * p + a * q + u)

    p, q = cycle.p_c, cycle.q_c
    p0q0 = p * q
    n = max(1, round(cycle.T_c / dt))
    h = cycle.T_c / n
    times, ps, qs = [0.0], [p], [q]
    t = 0.0
    drift = 0.0
    for _ in range(n):
        k1 = rhs(t, p, q)
        k2 = rhs(t + 0.5 * h, p + 0.5 * h * k1[0], q + 0.5 * h * k1[1])
        k3 = rhs(t + 0.5 * h, p + 0.5 * h * k2[0], q + 0.5 * h * k2[1])
        k4 = rhs(t + h, p + h * k3[0], q + h * k3[1])
        p += (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        q += (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        t += h
        times.append(t)
        ps.append(p)
        qs.append(q)
        drift = max(drift, abs(p * q - p0q0))
    e = math.exp(w0 * cycle.T_c)
    swm_end = PQState(cycle.p_c / e, cycle.q_c * e)
    return CwmDeviation(
        case=case,
        times=times,
        p=ps,
        q=qs,
        pq_end=PQState(p, q),
        swm_end=swm_end,
        deviation=(p - swm_end.p, q - swm_end.q),
        product_drift=drift,
    )
