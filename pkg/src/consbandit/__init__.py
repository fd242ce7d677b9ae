"""Conservative multi-armed bandits: algorithms that explore while keeping the
cumulative return above a fixed fraction of a default arm's return, uniformly
over time, plus a Monte Carlo harness to measure them."""

from .confidence import ConfidenceSchedule, psi_refined, psi_simple, radius
from .core import (
    ArmStats,
    BudgetLedger,
    ConfigurationError,
    EpisodeTrace,
    MalformedTraceError,
    ProblemInstance,
    constraint_floor,
    pseudo_regret,
    realized_regret,
    update_budgets,
    update_stats,
)
from .environments import (
    AdversarialEnv,
    MalformedEnvironmentError,
    StochasticEnv,
    adversarial_reward,
    episode_streams,
    load_reward_table,
    make_adversary,
    sample_stochastic,
)
from .harness import (
    ExperimentConfig,
    RunPoint,
    SummaryStats,
    audit_adversarial_regret,
    audit_constraint,
    audit_pull_bound,
    lower_bound_B,
    lower_bound_reference,
    monte_carlo,
    pseudo_budget_curves,
    resolve_workers,
    run_episode,
    simulate_run,
    theorem_default_rounds,
)
from .policies import (
    POLICY_NAMES,
    BudgetFirstPolicy,
    ConservativeUcb,
    ConservativeUcbUnknownMu0,
    Exp3IxPolicy,
    Policy,
    SafePlayWrapper,
    UcbPolicy,
    UnbalancedMossPolicy,
    admissible_regret_bound,
    budget_lcb_known_mu0,
    budget_lcb_unknown_mu0,
    budgetfirst_default_rounds,
    budgetfirst_t0,
    expectation_mode_params,
    make_policy,
    unbalanced_moss_budgets,
    worst_case_regret_bound,
)

__version__ = "0.1.0"
