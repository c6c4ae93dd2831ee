"""Ground-truth problem instances, the interaction protocol, and regret.

Environments are immutable after generation.  Regret uses the expected
instantaneous reward (noise integrated out analytically): the noisy draw
only feeds the agent's observation, never the regret column, which keeps
desk-scale curves clean while agreeing in expectation with the noisy
estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .optimism import Policy
from .posteriors import RngStream
from .saddle import ConstrainedBandit, Simplex, _constrained_value_lp, game_value_exact


@dataclass(frozen=True)
class BanditEnv:
    """Stochastic bandit: fixed true means plus Gaussian reward noise."""

    mu: np.ndarray
    noise_sd: float = 1.0

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if not np.isfinite(mu).all():
            raise ValueError("true means must be finite")
        object.__setattr__(self, "mu", mu)


@dataclass(frozen=True)
class GameEnv:
    """Zero-sum matrix game against a self-play or best-response opponent."""

    payoff: np.ndarray
    noise_sd: float = 1.0
    opponent: str = "best_response"  # or "self_play"
    value: float = None  # exact game value; filled by make_game_env

    def __post_init__(self):
        payoff = np.asarray(self.payoff, dtype=float)
        if not np.isfinite(payoff).all():
            raise ValueError("payoff must be finite")
        if self.opponent not in ("best_response", "self_play"):
            raise ValueError(f"unknown opponent kind {self.opponent!r}")
        object.__setattr__(self, "payoff", payoff)


def make_game_env(payoff, noise_sd=1.0, opponent="best_response") -> GameEnv:
    payoff = np.asarray(payoff, dtype=float)
    value = game_value_exact(payoff, Simplex(payoff.shape[0])).value
    return GameEnv(payoff=payoff, noise_sd=noise_sd, opponent=opponent, value=value)


@dataclass(frozen=True)
class ConstrainedEnv:
    """Constrained bandit: row 1 is the objective, rows 2..m are constraints."""

    reward_matrix: np.ndarray
    noise_sd: float
    C: float
    value: float  # optimal value of the primal LP (= saddle value, ball slack)
    lam_star: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.reward_matrix, dtype=float)
        if not np.isfinite(R).all():
            raise ValueError("reward matrix must be finite")
        object.__setattr__(self, "reward_matrix", R)

    @property
    def radius(self):
        return math.sqrt(max(self.C * self.C - 1.0, 0.0))


def make_constrained_env(reward_matrix, noise_sd=1.0, C=10.0) -> ConstrainedEnv:
    """Build a constrained environment, verifying feasibility and the dual bound."""
    R = np.asarray(reward_matrix, dtype=float)
    lp = _constrained_value_lp(R, C)
    if lp is None:
        raise ValueError(
            "instance is infeasible or its optimal dual multiplier exceeds the bound C"
        )
    _, lam, v_p, v_d = lp
    return ConstrainedEnv(reward_matrix=R, noise_sd=noise_sd, C=C,
                          value=0.5 * (v_p + v_d), lam_star=lam)


@dataclass
class Transcript:
    """Per-step record of one seeded run."""

    agent: str
    seed: int
    t: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    regret: np.ndarray
    cum_regret: np.ndarray
    violation: np.ndarray = None  # constrained runs only
    solver_flags: np.ndarray = None  # True where a solver reported non-convergence
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        T = self.t.size
        for name in ("action", "reward", "regret", "cum_regret"):
            if getattr(self, name).size != T:
                raise ValueError(f"{name} length does not match horizon")
        if not np.allclose(self.cum_regret, np.cumsum(self.regret), atol=1e-12):
            raise ValueError("cumulative regret must be the prefix sum of regret")


def step_bandit(env: BanditEnv, action: int, rng: RngStream) -> float:
    """Reward draw mu_a + noise for a chosen arm."""
    if not 0 <= action < env.mu.size:
        raise ValueError(f"action {action} out of range")
    return float(env.mu[action] + env.noise_sd * rng.normal())


def best_response_row(env: GameEnv, agent_policy: Policy) -> int:
    """Row minimizing the agent's expected payoff; lowest index on ties."""
    return int(np.argmin(env.payoff @ agent_policy.probs))


def step_game(env: GameEnv, agent_policy: Policy, rng: RngStream,
              opponent_policy: Policy = None):
    """One game round: returns (row, column, noisy reward).

    The best-response opponent deterministically picks the row minimizing
    the agent's expected payoff; self-play samples the co-agent's policy
    (which the harness supplies).
    """
    j = rng.choice(agent_policy.probs.size, p=agent_policy.probs)
    if env.opponent == "best_response":
        i = best_response_row(env, agent_policy)
    else:
        if opponent_policy is None:
            raise ValueError("self-play requires the opponent policy")
        i = rng.choice(opponent_policy.probs.size, p=opponent_policy.probs)
    reward = float(env.payoff[i, j] + env.noise_sd * rng.normal())
    return i, j, reward


def step_constrained(env: ConstrainedEnv, agent_policy: Policy, rng: RngStream):
    """One constrained-bandit round: returns (column, noisy column vector)."""
    j = rng.choice(agent_policy.probs.size, p=agent_policy.probs)
    m = env.reward_matrix.shape[0]
    obs = env.reward_matrix[:, j] + env.noise_sd * rng.normal(size=m)
    return j, obs


def bandit_regret(env: BanditEnv, action: int) -> float:
    """max_i mu_i - mu_a; zero exactly when the action attains the max."""
    return float(env.mu.max() - env.mu[action])


def game_regret(env: GameEnv, agent_policy: Policy, row_policy) -> float:
    """V* minus the expected reward under the two played policies."""
    if env.value is None:
        raise ValueError("game environment lacks a precomputed value; use make_game_env")
    if np.isscalar(row_policy) or isinstance(row_policy, (int, np.integer)):
        expected = float(env.payoff[int(row_policy)] @ agent_policy.probs)
    else:
        rp = row_policy.probs if isinstance(row_policy, Policy) else np.asarray(row_policy)
        expected = float(rp @ env.payoff @ agent_policy.probs)
    return env.value - expected


def constrained_regret(env: ConstrainedEnv, agent_policy: Policy):
    """(regret, constraint violation) of a played policy.

    The round reward is min over the dual set of lam' R pi, which is never
    above the saddle value, so the regret is always non-negative.  The
    violation is the sup-norm of the constraint rows' shortfall below zero.
    """
    c = env.reward_matrix @ agent_policy.probs
    tail = c[1:] if c.size > 1 else np.zeros(0)
    neg = np.minimum(tail, 0.0)
    reward = float(c[0] - env.radius * np.linalg.norm(neg))
    violation = float(np.abs(neg).max()) if neg.size else 0.0
    return env.value - reward, violation


def generate_instance(kind: str, dims, prior_params, C: float, rng: RngStream,
                      noise_sd: float = 1.0, opponent: str = "best_response"):
    """Draw an environment from the stated prior.

    Constrained instances are rejection-sampled until the induced linear
    program is feasible with its optimal dual multiplier inside the norm
    bound, mirroring how the agents' matched prior is used.
    """
    mean, sd = prior_params
    if kind == "bandit":
        A = dims if np.isscalar(dims) else dims[0]
        mu = mean + sd * rng.normal(size=A)
        return BanditEnv(mu=mu, noise_sd=noise_sd)
    if kind == "game":
        m, A = dims
        payoff = mean + sd * rng.normal(size=(m, A))
        return make_game_env(payoff, noise_sd=noise_sd, opponent=opponent)
    if kind == "constrained":
        m, A = dims
        for _ in range(10_000):
            R = mean + sd * rng.normal(size=(m, A))
            lp = _constrained_value_lp(R, C)
            if lp is not None:
                _, lam, v_p, v_d = lp
                return ConstrainedEnv(reward_matrix=R, noise_sd=noise_sd, C=C,
                                      value=0.5 * (v_p + v_d), lam_star=lam)
        raise RuntimeError(
            "no feasible constrained instance with the dual bound after 10000 draws; "
            f"prior=({mean}, {sd}), dims=({m}, {A}), C={C}"
        )
    raise ValueError(f"unknown instance kind {kind!r}")
