"""gaitlab: momentum-space biped walking stability lab."""

from .cycles import (
    CompoundCycle,
    CycleSpec,
    FeasibilityReport,
    compound_two_step,
    cycle_feasible,
    idle_cycle,
    open_loop_rollout,
    simple_cycle_from_speed,
    simple_cycle_from_step,
)
from .momentum import (
    PendulumState,
    PQState,
    WalkerParams,
    from_pq,
    lambert_w0,
    predict_next_from_instant,
    propagate_continuous,
    step_to_step,
    step_transition,
    to_pq,
)
from .newton import (
    OptimizerConfig,
    backtracking_search,
    minimize_newton,
    newton_step_modified,
    steepest_descent_step,
    wolfe_check,
)
from .optimal import (
    GoalSpec,
    PenaltySpec,
    assemble_objective,
    direct_target_solve,
    goal_value_grad_hess,
    guided_target_sequence,
    penalty_value_grad_hess,
    plan_optimal_step,
)
from .scenario import (
    RunSummary,
    Scenario,
    benchmark_scenario,
    default_scenario,
    export_trace,
    load_scenario,
    run_benchmark,
    run_scenario,
)
from .simulation import (
    ConstraintReport,
    ImpulseEvent,
    MomentumGains,
    ReferenceTrajectories,
    RigidBodyState,
    SimConfig,
    SimTrace,
    cwm_deviation_rollout,
    integrate_torso,
    joint_torques,
    momentum_tracking_forces,
    run_walk,
)
from .stabilizers import (
    GainWindow,
    GainWindowError,
    StepPlan,
    admissible_q_window,
    p_bounds,
    p_star,
    stabilizer1_cop,
    stabilizer2_step_length,
    stabilizer3_step_time,
    stabilizer4_combined,
    swm_closed_loop,
)

__version__ = "0.1.0"
