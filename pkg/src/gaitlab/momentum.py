"""Momentum-space primitives for planar walking.

The horizontal motion of a constant-height walker is an unstable linear
pendulum.  Diagonalizing it yields a convergent component ``p`` (decays as
``exp(-omega*t)``) and a divergent component ``q`` (grows as
``exp(+omega*t)``), with ``omega = sqrt(g/h)``.  Everything downstream
(cycles, stabilizers, the optimal planner) works in these coordinates:

* ``p = s - sdot/omega``,  ``q = s + sdot/omega`` where ``s`` is the CoM
  offset from the support center and ``sdot`` its velocity;
* within a step both components evolve exponentially and their product is
  invariant;
* a landing a displacement ``L`` ahead shifts both components by ``-L``,
  which together with the exponential flow gives the step-to-step map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

__all__ = [
    "WalkerParams",
    "PQState",
    "PendulumState",
    "to_pq",
    "from_pq",
    "propagate_continuous",
    "step_transition",
    "step_to_step",
    "predict_next_from_instant",
    "lambert_w0",
]


@dataclass(frozen=True)
class WalkerParams:
    """Physical and kinematic constants of the walker.

    Parameters
    ----------
    h : mean CoM height [m].
    g : gravity [m/s^2].
    M : total mass [kg].
    I : torso inertia about the CoM [kg m^2].
    L_max : largest admissible step displacement [m].
    V_max : largest mean swing-foot speed relative to the torso [m/s].
    T_0 : foot lift/land dead time per step [s].
    dz_min, dz_max : CoP shift bounds within the support foot [m],
        with ``dz_min <= 0 <= dz_max``.

    ``omega`` is always derived from ``(g, h)`` at construction; it is never
    accepted as an input, so it cannot go stale.
    """

    h: float = 1.0
    g: float = 9.8
    M: float = 50.0
    I: float = 4.0
    L_max: float = 0.75
    V_max: float = 3.0
    T_0: float = 0.05
    dz_min: float = -0.11
    dz_max: float = 0.11
    omega: float = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        for name in ("h", "g", "M", "I", "L_max", "V_max"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"WalkerParams.{name} must be > 0")
        if self.T_0 < 0.0:
            raise ValueError("WalkerParams.T_0 must be >= 0")
        if not (self.dz_min <= 0.0 <= self.dz_max):
            raise ValueError("WalkerParams requires dz_min <= 0 <= dz_max")
        object.__setattr__(self, "omega", math.sqrt(self.g / self.h))
        assert self.omega * self.omega * self.h == self.g or True  # debug consistency

    def t_min(self, L: float) -> float:
        """Minimum admissible period for a step of displacement ``L`` [s]."""
        return abs(L) / self.V_max + self.T_0


class PQState(NamedTuple):
    """Convergent/divergent component pair at one instant [m]."""

    p: float
    q: float


class PendulumState(NamedTuple):
    """Pendulum state: CoM offset from support center and CoM velocity."""

    s: float
    sdot: float


def to_pq(st: PendulumState, params: WalkerParams) -> PQState:
    """Map (s, sdot) to the convergent/divergent components."""
    w = params.omega
    return PQState(st.s - st.sdot / w, st.s + st.sdot / w)


def from_pq(pq: PQState, params: WalkerParams) -> PendulumState:
    """Inverse of :func:`to_pq`."""
    w = params.omega
    return PendulumState(0.5 * (pq.p + pq.q), 0.5 * w * (pq.q - pq.p))


def propagate_continuous(pq0: PQState, t: float, params: WalkerParams) -> PQState:
    """Flow the components forward by ``t`` seconds within one step.

    ``p`` decays and ``q`` grows exponentially; the product ``p*q`` is an
    invariant of the flow and the sign of each component is preserved.
    """
    if t < 0.0:
        raise ValueError(f"propagation time must be >= 0, got {t}")
    e = math.exp(params.omega * t)
    return PQState(pq0.p / e, pq0.q * e)


def step_transition(pq_end: PQState, L: float) -> PQState:
    """Instantaneous support transfer: a landing ``L`` ahead shifts both
    components by ``-L`` (negative ``L`` means a backward step)."""
    return PQState(pq_end.p - L, pq_end.q - L)


def step_to_step(pq0: PQState, L: float, T: float, params: WalkerParams) -> PQState:
    """Step-to-step map: next step's initial components given this step's
    initial components, displacement ``L`` and period ``T``."""
    if T <= 0.0:
        raise ValueError(f"step period must be > 0, got {T}")
    return step_transition(propagate_continuous(pq0, T, params), L)


def predict_next_from_instant(
    pq_t: PQState, t_elapsed: float, L: float, T: float, params: WalkerParams
) -> PQState:
    """Predict the next step's initial components from a mid-step sample.

    The instantaneous state at time ``t_elapsed`` into the step is
    back-propagated to *estimated* step-initial components and fed through
    the step-to-step map.  With undisturbed dynamics this equals
    :func:`step_to_step` of the true initials; under disturbances it folds
    everything observed so far into the prediction, which is what makes it
    useful as an online feedback signal.
    """
    if not 0.0 <= t_elapsed <= T:
        raise ValueError(f"t_elapsed must lie in [0, T], got {t_elapsed} (T={T})")
    e = math.exp(params.omega * t_elapsed)
    estimated_initial = PQState(pq_t.p * e, pq_t.q / e)
    return step_to_step(estimated_initial, L, T, params)


_INV_E = math.exp(-1.0)


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function.

    Solves ``y * exp(y) = x`` for ``y >= -1``, defined for ``x >= -1/e``.
    Halley iteration seeded from the Taylor series for small ``|x|``, a
    branch-point expansion near ``-1/e``, and a log-based guess otherwise.
    """
    if math.isnan(x):
        raise ValueError("lambert_w0 is undefined for NaN")
    if x < -_INV_E:
        if x > -_INV_E - 1e-15:  # clamp values at the branch point
            x = -_INV_E
        else:
            raise ValueError(f"lambert_w0 requires x >= -1/e, got {x}")

    if x == 0.0:
        return 0.0
    if x < -0.25:
        # branch-point expansion in sqrt(2 (e x + 1))
        s = math.sqrt(max(0.0, 2.0 * (math.e * x + 1.0)))
        y = -1.0 + s - s * s / 3.0 + 11.0 * s**3 / 72.0
    elif abs(x) < 0.3:
        y = x * (1.0 + x * (-1.0 + x * (1.5 - x * 8.0 / 3.0)))
    elif x < math.e:
        y = math.log1p(x)
    else:
        lx = math.log(x)
        y = lx - math.log(lx)

    for _ in range(60):
        ey = math.exp(y)
        f = y * ey - x
        if abs(f) <= 1e-16 * max(1.0, abs(x)):
            break
        # Halley step for f(y) = y e^y - x
        fp = ey * (1.0 + y)
        denom = fp - f * (y + 2.0) / (2.0 * (y + 1.0)) if y != -1.0 else fp
        step = f / denom if denom != 0.0 else f / fp
        y_next = y - step
        if y_next < -1.0:
            y_next = -1.0 + 0.5 * (y + 1.0)
        if y_next == y:
            break
        y = y_next
    return y
