"""Unconstrained 2-D minimization: modified Newton with backtracking.

The step planner's objective lives on (T, L), so everything here is
specialized to symmetric 2x2 Hessians with closed-form eigendecomposition.
Indefinite Hessians are repaired by flooring their eigenvalues, which keeps
every search direction strictly descending; a backtracking line search
enforces the sufficient-decrease condition, and both Wolfe conditions can
be evaluated as a diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

Vec2 = tuple[float, float]
Mat2 = tuple[float, float, float]  # (a, b, c) for [[a, b], [b, c]]

__all__ = [
    "OptimizerConfig",
    "NewtonDirection",
    "WolfeReport",
    "MinimizeResult",
    "LineSearchError",
    "eigh2",
    "newton_step_modified",
    "backtracking_search",
    "wolfe_check",
    "steepest_descent_step",
    "minimize_newton",
]


@dataclass(frozen=True)
class OptimizerConfig:
    """Penalty/goal weights and solver knobs for the optimal step planner."""

    C: float = 1000.0            # penalty weight
    lambda_min: float = 1e-8     # Hessian eigenvalue floor
    rho: float = 0.9             # backtracking shrink factor
    c1: float = 1e-4             # sufficient-decrease constant
    c2: float = 0.9              # curvature constant (diagnostic only)
    max_newton_iters: int = 60
    grad_tol: float = 1e-8
    backtrack_cap: int = 200
    step_cap: float = 1e3         # direction-norm safeguard in the driver
    eps_q: float = 0.05          # near-cycle threshold on |q0 - q_c|
    eps_p: float = 0.35          # near-cycle threshold on |p0 - p_c|
    r_goal: tuple[float, float, float] = (1.0, 0.1, 0.1)
    dg_max: tuple[float, float, float] = (0.05, 0.1, 0.1)
    dh_min_frac: float = 0.10    # penalty margin as a fraction of each limit
    L_min: float = 0.1           # optional minimum step length
    enable_min_step_penalty: bool = False

    def __post_init__(self) -> None:
        if not (0.0 < self.c1 < self.c2 < 1.0):
            raise ValueError("need 0 < c1 < c2 < 1")
        if not (0.0 < self.rho < 1.0):
            raise ValueError("need 0 < rho < 1")
        if self.lambda_min <= 0.0:
            raise ValueError("need lambda_min > 0")


class LineSearchError(RuntimeError):
    """Backtracking exhausted its iteration cap."""


@dataclass(frozen=True)
class NewtonDirection:
    direction: Vec2 | None
    converged: bool
    eigenvalues: Vec2 = (0.0, 0.0)
    floored: bool = False
    cos_theta: float = 1.0
    grad_dot_dir: float = 0.0


@dataclass(frozen=True)
class WolfeReport:
    sufficient_decrease: bool
    curvature: bool
    strong: bool

    @property
    def satisfied(self) -> bool:
        return self.sufficient_decrease and self.curvature


@dataclass
class MinimizeResult:
    x: Vec2
    value: float
    grad_norm: float
    iterations: int
    converged: bool
    cos_thetas: list[float] = field(default_factory=list)
    grad_dot_dirs: list[float] = field(default_factory=list)


def eigh2(H: Mat2) -> tuple[Vec2, tuple[Vec2, Vec2]]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric
    2x2 matrix given as (a, b, c) for [[a, b], [b, c]]."""
    a, b, c = H
    half_tr = 0.5 * (a + c)
    disc = math.hypot(0.5 * (a - c), b)
    lam1, lam2 = half_tr - disc, half_tr + disc
    if b == 0.0:
        if a <= c:
            return (a, c), ((1.0, 0.0), (0.0, 1.0))
        return (c, a), ((0.0, 1.0), (1.0, 0.0))
    v1 = (lam1 - c, b)
    n1 = math.hypot(*v1)
    v1 = (v1[0] / n1, v1[1] / n1)
    v2 = (-v1[1], v1[0])
    return (lam1, lam2), (v1, v2)


def newton_step_modified(grad: Vec2, hess: Mat2, lambda_min: float = 1e-8) -> NewtonDirection:
    """Descent direction from an eigenvalue-floored Newton step.

    The Hessian's eigenvalues are floored at ``lambda_min`` before the solve,
    so the direction always makes an acute angle with the negative gradient.
    A zero gradient is a convergence signal, not an error.
    """
    gnorm = math.hypot(*grad)
    if gnorm == 0.0:
        return NewtonDirection(direction=None, converged=True)
    (lam1, lam2), (v1, v2) = eigh2(hess)
    floored = lam1 < lambda_min or lam2 < lambda_min
    l1 = max(lam1, lambda_min)
    l2 = max(lam2, lambda_min)
    g1 = grad[0] * v1[0] + grad[1] * v1[1]
    g2 = grad[0] * v2[0] + grad[1] * v2[1]
    P = (
        -(g1 / l1) * v1[0] - (g2 / l2) * v2[0],
        -(g1 / l1) * v1[1] - (g2 / l2) * v2[1],
    )
    dot = grad[0] * P[0] + grad[1] * P[1]
    pnorm = math.hypot(*P)
    cos_theta = -dot / (gnorm * pnorm) if pnorm > 0.0 else 0.0
    return NewtonDirection(
        direction=P,
        converged=False,
        eigenvalues=(lam1, lam2),
        floored=floored,
        cos_theta=cos_theta,
        grad_dot_dir=dot,
    )


def backtracking_search(
    value: Callable[[Vec2], float],
    x: Vec2,
    P: Vec2,
    U0: float,
    grad_dot_dir: float,
    cfg: OptimizerConfig,
) -> float:
    """Largest step in {1, rho, rho^2, ...} with sufficient decrease."""
    if grad_dot_dir >= 0.0:
        raise ValueError("backtracking requires a descent direction")
    alpha = 1.0
    for _ in range(cfg.backtrack_cap):
        trial = (x[0] + alpha * P[0], x[1] + alpha * P[1])
        if value(trial) <= U0 + cfg.c1 * alpha * grad_dot_dir:
            return alpha
        alpha *= cfg.rho
    raise LineSearchError(
        f"no sufficient decrease within {cfg.backtrack_cap} backtracking steps"
    )


def wolfe_check(
    value: Callable[[Vec2], float],
    grad: Callable[[Vec2], Vec2],
    x: Vec2,
    P: Vec2,
    alpha: float,
    cfg: OptimizerConfig,
    strong: bool = False,
) -> WolfeReport:
    """Evaluate the (optionally strong) Wolfe conditions at a trial step.

    Diagnostic only: the line search itself enforces just the
    sufficient-decrease condition, which backtracking from a unit step makes
    adequate for Newton directions.
    """
    g0 = grad(x)
    d0 = g0[0] * P[0] + g0[1] * P[1]
    xt = (x[0] + alpha * P[0], x[1] + alpha * P[1])
    dec = value(xt) <= value(x) + cfg.c1 * alpha * d0
    gt = grad(xt)
    dt = gt[0] * P[0] + gt[1] * P[1]
    if strong:
        curv = abs(dt) <= cfg.c2 * abs(d0)
    else:
        curv = dt >= cfg.c2 * d0
    return WolfeReport(sufficient_decrease=dec, curvature=curv, strong=strong)


def steepest_descent_step(
    value: Callable[[Vec2], float],
    grad: Callable[[Vec2], Vec2],
    x: Vec2,
    cfg: OptimizerConfig,
) -> Vec2:
    """One gradient step with backtracking; reference method only."""
    g = grad(x)
    if g == (0.0, 0.0):
        return x
    P = (-g[0], -g[1])
    alpha = backtracking_search(value, x, P, value(x), g[0] * P[0] + g[1] * P[1], cfg)
    return (x[0] + alpha * P[0], x[1] + alpha * P[1])


def minimize_newton(
    value: Callable[[Vec2], float],
    grad: Callable[[Vec2], Vec2],
    hess: Callable[[Vec2], Mat2],
    x0: Vec2,
    cfg: OptimizerConfig,
) -> MinimizeResult:
    """Modified-Newton descent until the gradient norm drops below tolerance."""
    x = x0
    U = value(x)
    if not math.isfinite(U):
        return MinimizeResult(x=x, value=U, grad_norm=math.inf, iterations=0, converged=False)
    res = MinimizeResult(x=x, value=U, grad_norm=math.inf, iterations=0, converged=False)
    for it in range(cfg.max_newton_iters):
        g = grad(x)
        gnorm = math.hypot(*g)
        res.x, res.value, res.grad_norm, res.iterations = x, U, gnorm, it
        if gnorm < cfg.grad_tol:
            res.converged = True
            return res
        step = newton_step_modified(g, hess(x), cfg.lambda_min)
        assert step.direction is not None
        res.cos_thetas.append(step.cos_theta)
        res.grad_dot_dirs.append(step.grad_dot_dir)
        P = step.direction
        dot = step.grad_dot_dir
        pnorm = math.hypot(*P)
        if pnorm > cfg.step_cap:
            # a floored near-singular Hessian can emit absurdly long
            # directions along flat valleys; rescale before searching
            scale = cfg.step_cap / pnorm
            P = (P[0] * scale, P[1] * scale)
            dot *= scale
        try:
            alpha = backtracking_search(value, x, P, U, dot, cfg)
        except LineSearchError:
            return res
        x = (x[0] + alpha * P[0], x[1] + alpha * P[1])
        U = value(x)
    g = grad(x)
    res.x, res.value, res.grad_norm = x, U, math.hypot(*g)
    res.iterations = cfg.max_newton_iters
    res.converged = res.grad_norm < cfg.grad_tol
    return res
