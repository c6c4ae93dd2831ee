"""Uniform agent interface: a policy from posterior state, and state updates.

Bandit agents: Thompson sampling, optimistic-map maximization (VBOS),
K-learning, UCB with a 1/t confidence schedule, and EXP3.  Saddle agents:
Thompson sampling (exact solve of a sampled game), VBOS, and K-learning
over the saddle optimism map.

Agents never see true environment parameters; ``act`` maps state to a
policy and ``observe`` folds one interaction into a new state.  States are
values; the only mutation is a private warm-start cache shared along one
state chain, so independent seeded runs stay fully independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .optimism import Policy, SolverConfig, klearning_policy, vbos_policy
from .posteriors import (
    GaussianPosterior,
    PosteriorMatrix,
    RngStream,
    inverse_rate,
    posterior_means,
    sample,
    update,
)
from .saddle import (
    DualSet,
    SaddleProblem,
    game_value_exact,
    saddle_klearning,
    saddle_vbos,
)

BANDIT_KINDS = ("ts", "vbos", "klearning", "ucb", "exp3")
SADDLE_KINDS = ("saddle_ts", "saddle_vbos", "saddle_klearning", "exp3")


@dataclass(frozen=True)
class AgentSpec:
    """Which algorithm to run and its solver/algorithm parameters."""

    kind: str
    solver_cfg: SolverConfig = SolverConfig()
    explore_weight: float = 1.0
    ucb_delta: str = "1/t"
    exp3_rate: float | None = None
    exp3_mix: float | None = None
    exp3_clip: tuple = (-5.0, 5.0)
    horizon: int | None = None

    def __post_init__(self):
        if self.kind not in set(BANDIT_KINDS) | set(SADDLE_KINDS):
            raise ValueError(f"unknown agent kind {self.kind!r}")
        if self.exp3_rate is not None and self.exp3_rate <= 0:
            raise ValueError("exp3 learning rate must be positive")
        if self.exp3_mix is not None and not (0.0 <= self.exp3_mix < 1.0):
            raise ValueError("exp3 exploration mix must lie in [0, 1)")


@dataclass(frozen=True)
class AgentState:
    """Sufficient statistics the agent conditions on at round t."""

    round: int = 1
    posteriors: tuple = None  # bandit: tuple of posteriors
    matrix: PosteriorMatrix = None  # saddle: posterior over the payoff
    dual_set: DualSet = None
    exp3_weights: np.ndarray = None
    n_actions: int = 0
    cache: dict = field(default_factory=dict, compare=False, repr=False)


def exp3_defaults(A: int, horizon: int | None):
    """Standard EXP3 learning rate and exploration mix for a known horizon."""
    T = horizon if horizon is not None else 1000
    rate = math.sqrt(math.log(A) / (A * T))
    mix = min(0.99, math.sqrt(A * math.log(A) / ((math.e - 1.0) * T)))
    return rate, mix


def init_bandit_state(spec: AgentSpec, A: int, prior_mean=0.0, prior_var=1.0,
                      noise_var=1.0) -> AgentState:
    posts = tuple(GaussianPosterior(prior_mean, prior_var, noise_var) for _ in range(A))
    weights = np.ones(A) if spec.kind == "exp3" else None
    return AgentState(round=1, posteriors=posts, exp3_weights=weights, n_actions=A)


def init_saddle_state(spec: AgentSpec, matrix: PosteriorMatrix,
                      dual_set: DualSet) -> AgentState:
    weights = np.ones(matrix.A) if spec.kind == "exp3" else None
    return AgentState(round=1, matrix=matrix, dual_set=dual_set,
                      exp3_weights=weights, n_actions=matrix.A)


def _exp3_policy(spec: AgentSpec, state: AgentState) -> Policy:
    w = state.exp3_weights
    _, mix = exp3_defaults(state.n_actions, spec.horizon)
    if spec.exp3_mix is not None:
        mix = spec.exp3_mix
    base = w / w.sum()
    return Policy((1.0 - mix) * base + mix / state.n_actions)


def act(spec: AgentSpec, state: AgentState, rng: RngStream) -> Policy:
    """Policy for the current round.

    Thompson variants consume randomness from ``rng``; the optimization
    agents are deterministic given the state (randomness enters only when
    the caller samples an action from the returned policy).
    """
    kind = spec.kind
    state.cache["last_converged"] = True
    if kind == "exp3":
        return _exp3_policy(spec, state)

    if kind in BANDIT_KINDS:
        posts = state.posteriors
        A = len(posts)
        if kind == "ts":
            draws = np.array([sample(p, rng) for p in posts])
            return Policy.point_mass(int(np.argmax(draws)), A)
        if kind == "vbos":
            res = vbos_policy(posts, spec.solver_cfg, explore_weight=spec.explore_weight)
            state.cache["last_converged"] = res.converged
            return res.policy
        if kind == "klearning":
            return klearning_policy(posts, spec.solver_cfg,
                                    explore_weight=spec.explore_weight).policy
        if kind == "ucb":
            y = _ucb_budget(spec.ucb_delta, state.round)
            idx = posterior_means(posts) + np.array([inverse_rate(p, y) for p in posts])
            return Policy.point_mass(int(np.argmax(idx)), A)

    problem = SaddleProblem(state.matrix, state.dual_set)
    if kind == "saddle_ts":
        sol = game_value_exact(state.matrix.sample_matrix(rng), state.dual_set)
        state.cache["last_converged"] = sol.converged
        return sol.pi
    if kind == "saddle_vbos":
        sol = saddle_vbos(problem, spec.solver_cfg, lam0=state.cache.get("lam"),
                          certify=False)
        state.cache["lam"] = sol.lam
        state.cache["last_converged"] = sol.converged
        return sol.pi
    if kind == "saddle_klearning":
        sol = saddle_klearning(problem, spec.solver_cfg, lam0=state.cache.get("lam_k"))
        state.cache["lam_k"] = sol.lam
        return sol.policy
    raise ValueError(f"unknown agent kind {kind!r}")


def _ucb_budget(schedule: str, t: int) -> float:
    """-log delta_t for the confidence schedule."""
    if schedule == "1/t":
        return math.log(t)
    if schedule.startswith("const:"):
        delta = float(schedule.split(":", 1)[1])
        if not 0.0 < delta < 1.0:
            raise ValueError("constant delta must lie in (0, 1)")
        return -math.log(delta)
    raise ValueError(f"unknown UCB schedule {schedule!r}")


def _exp3_update(spec: AgentSpec, state: AgentState, policy: Policy, action: int,
                 reward: float) -> np.ndarray:
    lo, hi = spec.exp3_clip
    x = (min(max(reward, lo), hi) - lo) / (hi - lo)
    rate, _ = exp3_defaults(state.n_actions, spec.horizon)
    if spec.exp3_rate is not None:
        rate = spec.exp3_rate
    xhat = x / policy.probs[action]
    w = state.exp3_weights.copy()
    w[action] *= math.exp(rate * xhat)
    return w / w.max()  # rescaling keeps weights positive and finite


def observe(spec: AgentSpec, state: AgentState, action_or_policy, observation) -> AgentState:
    """Fold one interaction into the agent state.

    Bandit agents take (action index, scalar reward); EXP3 takes the played
    policy in ``action_or_policy`` with the action recoverable from the
    observation.  Game observations are (row, column, reward) triples;
    constrained-bandit observations are (column, m-vector) pairs.
    """
    kind = spec.kind
    if state.posteriors is not None and kind in ("ts", "vbos", "klearning", "ucb"):
        action = int(action_or_policy)
        reward = float(observation)
        if not 0 <= action < len(state.posteriors):
            raise ValueError(f"action {action} out of range")
        posts = list(state.posteriors)
        posts[action] = update(posts[action], reward)
        return replace(state, posteriors=tuple(posts), round=state.round + 1)

    if kind == "exp3":
        if state.matrix is None:
            policy, action = _exp3_played(action_or_policy, observation, bandit=True)
            reward = float(observation)
        else:
            policy, action = _exp3_played(action_or_policy, observation, bandit=False)
            reward = float(observation[2])
        weights = _exp3_update(spec, state, policy, action, reward)
        return replace(state, exp3_weights=weights, round=state.round + 1)

    if state.matrix is None:
        raise ValueError(f"agent kind {kind!r} has no posterior state for this observation")
    if len(observation) == 3:
        i, j, reward = observation
        matrix = state.matrix.update_cell(int(i), int(j), float(reward))
    elif len(observation) == 2:
        j, vec = observation
        matrix = state.matrix.update_column(int(j), np.asarray(vec, dtype=float))
    else:
        raise ValueError("observation must be (i, j, r) or (j, vector)")
    return replace(state, matrix=matrix, round=state.round + 1)


def _exp3_played(action_or_policy, observation, bandit: bool):
    if bandit:
        if not (isinstance(action_or_policy, tuple) and len(action_or_policy) == 2):
            raise ValueError("EXP3 bandit observe needs (policy, action)")
        policy, action = action_or_policy
        return policy, int(action)
    if not isinstance(action_or_policy, Policy):
        raise ValueError("EXP3 game observe needs the played policy")
    return action_or_policy, int(observation[1])
