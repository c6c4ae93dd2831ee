"""Variational optimistic sampling for bandits and bilinear saddle-point
problems, with Thompson sampling, K-learning, UCB, and EXP3 baselines."""

from .agents import AgentSpec, AgentState, act, init_bandit_state, init_saddle_state, observe
from .environments import (
    BanditEnv,
    ConstrainedEnv,
    GameEnv,
    Transcript,
    bandit_regret,
    constrained_regret,
    game_regret,
    generate_instance,
    make_constrained_env,
    make_game_env,
    step_bandit,
    step_constrained,
    step_game,
)
from .harness import (
    ExperimentConfig,
    RunResult,
    SummaryRow,
    default_config,
    emit_plots,
    run_experiment,
    theory_bound,
    write_outputs,
)
from .optimism import (
    OptimismEvaluation,
    Policy,
    SolverConfig,
    entropy,
    expected_max_mc,
    in_optimistic_set,
    klearning_policy,
    optimism_gradient,
    optimism_map,
    ts_policy_mc,
    vbos_policy,
)
from .posteriors import (
    GaussianPosterior,
    PosteriorMatrix,
    RngStream,
    TwoPointPosterior,
    cgf,
    cgf_vector,
    inverse_rate,
    sample,
    update,
)
from .saddle import (
    ConstrainedBandit,
    SaddleProblem,
    SaddleSolution,
    Simplex,
    Singleton,
    counterexample_payoff,
    counterexample_problem,
    expected_value_mc,
    game_value_exact,
    in_saddle_optimistic_set,
    project_dual,
    saddle_klearning,
    saddle_optimism_map,
    saddle_vbos,
)

__version__ = "0.1.0"
