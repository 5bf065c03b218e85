"""Repeated prisoner's dilemma with memory-one strategies.

Exact action-value solving and best responses against fixed opponents,
closed-form solutions for all sixteen deterministic self-play cases,
symmetric-equilibrium detection with onset localisation, and a seeded
Q-learning simulator that reproduces the learning dynamics, including
opponent action noise.
"""

from .closed_form import (
    BestResponseRegion,
    BoundaryGamma,
    CaseSolution,
    best_response_region,
    case_consistent,
    case_q,
    case_region_note,
    solve_all_cases,
    solve_case,
)
from .equilibrium import (
    DynamicsTrace,
    EquilibriumReport,
    ScanResult,
    alternating_dynamics,
    equilibrium_scan,
    symmetric_equilibria,
)
from .game import (
    Action,
    DiscountOutOfRange,
    OrderingViolation,
    PDGame,
    StateProfile,
    payoff,
    transition_matrix,
    validate_game,
)
from .qlearning import (
    EnvState,
    LearnerConfig,
    LearningTrace,
    PhaseResult,
    PhaseSummary,
    alternating_qlearning,
    epsilon_greedy,
    export_tally,
    export_trace,
    greedy_strategy,
    learn_phase,
    make_env,
    q_update,
    run_learning,
)
from .solver import (
    TIE_TOL,
    BestResponseResult,
    CycleDetected,
    GreedyPolicy,
    NoConvergence,
    QTable,
    SolveFailure,
    bellman_residual,
    best_response,
    policy_evaluation,
    value_iteration,
)
from .strategies import (
    DeterministicStrategy,
    MemoryOneStrategy,
    NoisyStrategy,
    StrategyCatalogEntry,
    apply_noise,
    case_id_of,
    catalog,
    parse_strategy,
    sample_action,
    swap_perspective,
)

__version__ = "0.1.0"
