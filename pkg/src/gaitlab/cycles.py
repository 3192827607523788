"""Periodic walking solutions of the step-to-step map.

A *motion cycle* is a periodic orbit of the step-to-step map: simple cycles
repeat every step, compound cycles every two steps, and the idle cycle is
the antisymmetric in-place two-step orbit.  All of them are only marginally
stable: the convergent component is attracted to its cycle value while any
divergent-component offset is multiplied by ``exp(omega*T_c)`` per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .momentum import PQState, WalkerParams, lambert_w0, step_to_step

__all__ = [
    "CycleSpec",
    "CompoundCycle",
    "FeasibilityReport",
    "simple_cycle_from_step",
    "simple_cycle_from_speed",
    "cycle_feasible",
    "lambert_q_boundary",
    "compound_two_step",
    "idle_cycle",
    "open_loop_rollout",
]


@dataclass(frozen=True)
class CycleSpec:
    """A simple (one-step-periodic) walking solution.

    ``(p_c, q_c)`` are the step-initial components, ``L_c``/``T_c`` the step
    displacement and period, ``V_c = L_c/T_c`` the mean speed.  Forward
    cycles have ``p_c < 0 < q_c`` and ``L_c > 0``; backward cycles mirror
    all signs.  Use the factory functions; fields are not revalidated here
    so rounded literals can be carried through tests and reports.
    """

    p_c: float
    q_c: float
    L_c: float
    T_c: float
    V_c: float
    direction: str = "forward"

    @property
    def pq(self) -> PQState:
        return PQState(self.p_c, self.q_c)


@dataclass(frozen=True)
class CompoundCycle:
    """A two-step-periodic walking solution: one record per step phase,
    each ``(p, q, L, T)``."""

    steps: tuple[tuple[float, float, float, float], tuple[float, float, float, float]]


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of the admissibility checks for a simple cycle."""

    length_ok: bool
    time_ok: bool
    t_min: float
    lambert_q_bound: float
    lambert_ok: bool
    violations: tuple[str, ...] = field(default=())

    @property
    def feasible(self) -> bool:
        return not self.violations


def simple_cycle_from_step(L_c: float, T_c: float, params: WalkerParams) -> CycleSpec:
    """Solve the repetition condition for a simple cycle of given step
    displacement and period."""
    if T_c <= 0.0:
        raise ValueError(f"cycle period must be > 0, got {T_c}")
    if L_c == 0.0:
        raise ValueError("cycle step displacement must be nonzero")
    w = params.omega
    p_c = -L_c / (1.0 - math.exp(-w * T_c))
    q_c = L_c / (math.exp(w * T_c) - 1.0)
    return CycleSpec(
        p_c=p_c,
        q_c=q_c,
        L_c=L_c,
        T_c=T_c,
        V_c=L_c / T_c,
        direction="forward" if L_c > 0 else "backward",
    )


def simple_cycle_from_speed(V_c: float, L_c: float, params: WalkerParams) -> CycleSpec:
    """Same as :func:`simple_cycle_from_step` but parameterized by the mean
    speed ``V_c``; the period follows from ``T_c = L_c / V_c``."""
    if V_c == 0.0 or L_c == 0.0:
        raise ValueError("cycle speed and step displacement must be nonzero")
    if (V_c > 0) != (L_c > 0):
        raise ValueError("cycle speed and step displacement must share a sign")
    return simple_cycle_from_step(L_c, L_c / V_c, params)


def lambert_q_boundary(p_c: float, direction: str, params: WalkerParams) -> float:
    """Divergent-component bound of the minimum-step-time constraint.

    For a given ``p_c`` the set of simple cycles respecting
    ``T_c > |L_c|/V_max + T_0`` is bounded in ``q_c`` by a Lambert-W curve;
    forward cycles must stay below it, backward cycles above it.
    """
    w, V, T0 = params.omega, params.V_max, params.T_0
    if direction == "forward":
        arg = (w * p_c / V) * math.exp(w * (p_c / V - T0))
        return -(V / w) * lambert_w0(arg)
    if direction == "backward":
        arg = -(w * p_c / V) * math.exp(-w * (p_c / V + T0))
        return (V / w) * lambert_w0(arg)
    raise ValueError(f"unknown direction {direction!r}")


def cycle_feasible(c: CycleSpec, params: WalkerParams) -> FeasibilityReport:
    """Check a simple cycle against the step-length and step-time limits.

    Reports every violated bound (not just the first) plus the equivalent
    Lambert-W boundary value in q-space.
    """
    t_min = params.t_min(c.L_c)
    length_ok = abs(c.L_c) < params.L_max
    time_ok = c.T_c > t_min
    q_bound = lambert_q_boundary(c.p_c, c.direction, params)
    lambert_ok = c.q_c < q_bound if c.direction == "forward" else c.q_c > q_bound
    violations = []
    if not length_ok:
        violations.append("step_length")
    if not time_ok:
        violations.append("step_time")
    return FeasibilityReport(
        length_ok=length_ok,
        time_ok=time_ok,
        t_min=t_min,
        lambert_q_bound=q_bound,
        lambert_ok=lambert_ok,
        violations=tuple(violations),
    )


def compound_two_step(
    L1: float, T1: float, L2: float, T2: float, params: WalkerParams
) -> CompoundCycle:
    """Two-step-periodic solution for alternating step commands
    ``(L1, T1)`` and ``(L2, T2)``."""
    if T1 <= 0.0 or T2 <= 0.0:
        raise ValueError("compound cycle periods must be > 0")
    w = params.omega
    den_p = 1.0 - math.exp(-w * (T1 + T2))
    den_q = math.exp(w * (T1 + T2)) - 1.0
    if den_p == 0.0 or den_q == 0.0:
        raise ValueError("degenerate compound cycle: total period too small")
    p1 = -(L1 * math.exp(-w * T2) + L2) / den_p
    q1 = (L1 * math.exp(w * T2) + L2) / den_q
    p2 = -(L2 * math.exp(-w * T1) + L1) / den_p
    q2 = (L2 * math.exp(w * T1) + L1) / den_q
    return CompoundCycle(steps=((p1, q1, L1, T1), (p2, q2, L2, T2)))


def idle_cycle(L: float, T: float, params: WalkerParams) -> CompoundCycle:
    """Symmetric in-place cycle: equal and opposite steps of size ``L``
    every ``T`` seconds; the state negates at each transfer."""
    if L <= 0.0 or T <= 0.0:
        raise ValueError("idle cycle requires L > 0 and T > 0")
    w = params.omega
    e = math.exp(w * T)
    q_c = L / (1.0 + e)
    p_c = L * e / (1.0 + e)
    return CompoundCycle(steps=((p_c, q_c, L, T), (-p_c, -q_c, -L, T)))


def open_loop_rollout(
    pq0: PQState, c: CycleSpec, k_steps: int, params: WalkerParams
) -> list[PQState]:
    """Iterate the step map ``k_steps`` times with the fixed cycle command.

    Returns the step-initial states, starting with ``pq0`` itself.  The
    convergent component is attracted to ``p_c``; any divergent offset grows
    geometrically, which is the marginal instability that the stabilizers
    exist to fix.
    """
    if k_steps < 1:
        raise ValueError("k_steps must be >= 1")
    states = [pq0]
    for _ in range(k_steps - 1):
        states.append(step_to_step(states[-1], c.L_c, c.T_c, params))
    return states
