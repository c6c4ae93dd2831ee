"""Optimism-map evaluation and maximization over the probability simplex.

The optimism map of a policy pi against A posteriors is

    G(pi) = sum_i pi_i * (mean_i + irate_i(-log pi_i)),

where ``irate`` is each arm's inverse rate function.  G is concave on the
simplex; its maximizer is the variational optimistic sampling policy.  The
equal-temperature restriction (one temperature shared by all arms) gives
the K-learning policy, a softmax over bonus-adjusted means.

Two maximizers are provided: entropic mirror ascent with backtracking (the
default), and a dual root-finding method exploiting the Gaussian KKT
closed form (used as an independent cross-check and as the fast inner
solver for saddle problems).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .posteriors import (
    DEGENERATE_VAR,
    RngStream,
    posterior_means,
    posterior_vars,
)


@dataclass(frozen=True)
class Policy:
    """Probability vector over actions."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size < 1:
            raise ValueError("policy must be a non-empty 1-D probability vector")
        if probs.min() < -1e-12:
            raise ValueError(f"policy has negative entry {probs.min()}")
        if abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"policy sums to {probs.sum()}, not 1")
        object.__setattr__(self, "probs", np.maximum(probs, 0.0))

    @classmethod
    def from_array(cls, arr) -> "Policy":
        arr = np.maximum(np.asarray(arr, dtype=float), 0.0)
        return cls(arr / arr.sum())

    @classmethod
    def point_mass(cls, index, n) -> "Policy":
        probs = np.zeros(n)
        probs[index] = 1.0
        return cls(probs)

    def __len__(self):
        return self.probs.size


@dataclass(frozen=True)
class OptimismEvaluation:
    """Value of the optimism map with its exploit/explore decomposition."""

    value: float
    exploit: float
    explore: float
    per_arm_bonus: np.ndarray


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 10000
    tolerance: float = 1e-8
    interior_floor: float = 1e-12
    mc_samples: int = 200000

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.interior_floor <= 0:
            raise ValueError("interior_floor must be positive")
        if self.max_iters < 1 or self.mc_samples < 1:
            raise ValueError("max_iters and mc_samples must be positive")


@dataclass(frozen=True)
class SimplexMaxResult:
    """Outcome of a simplex maximization."""

    policy: Policy
    value: float
    converged: bool
    iterations: int
    gap: float  # concavity certificate: value suboptimality is at most gap


def entropy(pi: Policy) -> float:
    """Shannon entropy of a policy, with 0 log 0 = 0."""
    p = pi.probs
    nz = p > 0.0
    return float(-(p[nz] * np.log(p[nz])).sum())


class GaussianBonus:
    """Per-arm exploration bonus sigma_i * sqrt(2 y) with a scalar weight."""

    def __init__(self, sigmas, weight=1.0):
        self.sigmas = np.asarray(sigmas, dtype=float) * float(weight)

    def value(self, y):
        return self.sigmas * np.sqrt(2.0 * np.maximum(y, 0.0))

    def slope(self, y):
        with np.errstate(divide="ignore"):
            out = self.sigmas / np.sqrt(2.0 * np.maximum(y, 0.0))
        # zero-variance arms have no bonus and no singular slope
        out[self.sigmas == 0.0] = 0.0
        return out


class CallableBonus:
    """Generic per-arm bonus given as (value, slope) callables of the budget."""

    def __init__(self, funcs):
        self.funcs = list(funcs)

    def value(self, y):
        return np.array(
            [self.funcs[i][0](float(t)) for i, t in enumerate(np.atleast_1d(y))]
        )

    def slope(self, y):
        return np.array(
            [self.funcs[i][1](float(t)) for i, t in enumerate(np.atleast_1d(y))]
        )


def sigmas_from_posteriors(posteriors) -> np.ndarray:
    """Posterior standard deviations, with degenerate cells mapped to 0."""
    v = posterior_vars(posteriors)
    sig = np.sqrt(np.maximum(v, 0.0))
    sig[v < DEGENERATE_VAR] = 0.0
    return sig


def optimism_map(posteriors, pi: Policy, explore_weight: float = 1.0) -> OptimismEvaluation:
    """Evaluate the optimism map at a policy.

    Arms with zero probability contribute nothing (the limit convention);
    their per-arm bonus is reported as 0.
    """
    means = posterior_means(posteriors)
    sig = sigmas_from_posteriors(posteriors)
    p = pi.probs
    if p.size != means.size:
        raise ValueError(f"policy length {p.size} does not match {means.size} posteriors")
    bonus = np.zeros_like(p)
    nz = p > 0.0
    y = -np.log(p[nz])
    bonus[nz] = sig[nz] * np.sqrt(2.0 * y)
    exploit = float(p @ means)
    explore = float(explore_weight * (p @ bonus))
    return OptimismEvaluation(
        value=exploit + explore, exploit=exploit, explore=explore, per_arm_bonus=bonus
    )


def optimism_gradient(posteriors, pi: Policy, explore_weight: float = 1.0,
                      interior_floor: float = 1e-12) -> np.ndarray:
    """Gradient of the optimism map at an interior policy.

    The bonus term's derivative diverges as any pi_i approaches 1, and the
    map is not differentiable at the boundary, so callers must clamp the
    policy to the interior first.
    """
    p = pi.probs
    if p.min() < interior_floor:
        raise ValueError(
            "policy entries below the interior floor; clamp the policy to "
            f"[{interior_floor}, 1) before requesting a gradient"
        )
    means = posterior_means(posteriors)
    sig = sigmas_from_posteriors(posteriors)
    y = -np.log(p)
    root = np.sqrt(2.0 * y)
    grad = means.copy()
    pos = sig > 0.0
    grad[pos] += explore_weight * sig[pos] * (root[pos] - 1.0 / root[pos])
    return grad


def _clamp_interior(p, floor):
    n = p.size
    hi = 1.0 - floor * (n - 1) if n > 1 else 1.0
    p = np.clip(p, floor, hi)
    return p / p.sum()


def _mirror_ascent(means, bonus, cfg: SolverConfig, pi0=None):
    """Maximize sum_i pi_i (means_i + B_i(-log pi_i)) by exponentiated gradient.

    Backtracking line search keeps ascent monotone; the step guess doubles
    after each accepted step so vertex-attracted problems reach the interior
    floor quickly.  The stationarity gap max_i g_i - pi . g upper-bounds the
    value suboptimality by concavity and is the stopping criterion.
    """
    A = means.size
    floor = cfg.interior_floor
    if A == 1:
        pol = Policy(np.ones(1))
        val = float(means[0])
        return SimplexMaxResult(pol, val, True, 0, 0.0)
    if floor >= 1.0 / A:
        raise ValueError("interior_floor must be below 1/A")

    def objective(p):
        y = -np.log(p)
        return float(p @ (means + bonus.value(y)))

    pi = _clamp_interior(np.full(A, 1.0 / A) if pi0 is None else np.asarray(pi0, float), floor)
    val = objective(pi)
    eta = 1.0
    gap = math.inf
    for it in range(1, cfg.max_iters + 1):
        y = -np.log(pi)
        g = means + bonus.value(y) - bonus.slope(y)
        gap = float(g.max() - pi @ g)
        if gap <= cfg.tolerance:
            return SimplexMaxResult(Policy(pi), val, True, it - 1, gap)
        eta = min(eta * 2.0, 1e14)
        accepted = False
        trial = eta
        for _ in range(80):
            z = trial * (g - g.max())
            cand = pi * np.exp(z)
            cand = _clamp_interior(cand, floor)
            cand_val = objective(cand)
            if cand_val > val:
                pi, val, eta, accepted = cand, cand_val, trial, True
                break
            trial *= 0.5
        if not accepted:
            # numerically stationary: no ascent direction at float precision
            return SimplexMaxResult(Policy(pi), val, gap <= 10.0 * cfg.tolerance, it, gap)
    return SimplexMaxResult(Policy(pi), val, False, cfg.max_iters, gap)


def _gaussian_simplex_max_dual(means, sigmas, cfg: SolverConfig):
    """Maximize the Gaussian optimism map by root-finding the simplex KKT dual.

    For arms with sigma > 0 the stationarity condition
        mean_i + sigma_i (u - 1/u) = nu,   u = sqrt(-2 log pi_i),
    has the closed-form positive root u_i(nu), so the simplex multiplier nu
    solves the monotone scalar equation sum_i exp(-u_i(nu)^2 / 2) = 1.
    Independent of the mirror-ascent path; Gaussian posteriors only.
    """
    A = means.size
    floor = cfg.interior_floor
    if A == 1:
        return SimplexMaxResult(Policy(np.ones(1)), float(means[0]), True, 0, 0.0)
    if floor >= 1.0 / A:
        raise ValueError("interior_floor must be below 1/A")
    s = np.maximum(np.asarray(sigmas, dtype=float), 1e-15)
    m = np.asarray(means, dtype=float)

    def mass(nu, deriv=False):
        d = nu - m
        disc = np.sqrt(d * d + 4.0 * s * s)
        # stable positive quadratic root on both signs of d; the second
        # branch's denominator can underflow to 0 when 4 s^2 vanishes
        # against d^2, so guard and cap
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            u = np.where(d > 0.0, (d + disc) / (2.0 * s), 2.0 * s / (disc - d))
            u = np.minimum(np.nan_to_num(u, posinf=1e150), 1e150)
            y = np.minimum(0.5 * u * u, 745.0)
            p = np.exp(-y)
        if not deriv:
            return p
        with np.errstate(invalid="ignore"):
            dp = np.nan_to_num(-p * u * (1.0 + d / disc) / (2.0 * s), nan=0.0)
        return p, dp

    lo = float(m.max())
    step = max(1.0, float(s.max()))
    for _ in range(200):
        if mass(lo).sum() >= 1.0:
            break
        lo -= step
        step *= 2.0
    hi = float(m.max() + s.max() * (math.sqrt(2.0 * math.log(A)) + 2.0)) + 1.0
    step = max(1.0, float(s.max()))
    for _ in range(200):
        if mass(hi).sum() <= 1.0:
            break
        hi += step
        step *= 2.0
    # Newton on the monotone normalization equation, bracket-safeguarded
    nu = 0.5 * (lo + hi)
    for _ in range(100):
        p, dp = mass(nu, deriv=True)
        f = p.sum() - 1.0
        if f >= 0.0:
            lo = nu
        else:
            hi = nu
        if abs(f) < 1e-14 or hi - lo < 1e-15 * max(1.0, abs(nu)):
            break
        df = dp.sum()
        cand = nu - f / df if df < 0.0 else 0.5 * (lo + hi)
        nu = cand if lo < cand < hi else 0.5 * (lo + hi)
    p = mass(nu)
    total = p.sum()
    p = p / total if total > 0.0 else np.full(A, 1.0 / A)
    p = _clamp_interior(p, floor)
    y = -np.log(p)
    bonus = GaussianBonus(sigmas)
    val = float(p @ (m + bonus.value(y)))
    g = m + bonus.value(y) - bonus.slope(y)
    gap = float(g.max() - p @ g)
    return SimplexMaxResult(Policy(p), val, True, 120, gap)


def vbos_policy(posteriors, cfg: SolverConfig = SolverConfig(), explore_weight: float = 1.0,
                method: str = "mirror") -> SimplexMaxResult:
    """Policy maximizing the optimism map over the simplex.

    ``method="mirror"`` runs entropic mirror ascent with backtracking (the
    default); ``method="dual"`` uses the Gaussian KKT root-finder.  Both
    return the best iterate with a convergence flag rather than raising on
    iteration exhaustion.
    """
    means = posterior_means(posteriors)
    sig = sigmas_from_posteriors(posteriors)
    if method == "dual":
        return _gaussian_simplex_max_dual(means, sig * explore_weight, cfg)
    if method != "mirror":
        raise ValueError(f"unknown method {method!r}")
    return _mirror_ascent(means, GaussianBonus(sig, explore_weight), cfg)


@dataclass(frozen=True)
class KLearningResult:
    policy: Policy
    tau: float
    value: float


def _klearning_objective(tau, means, vars_):
    x = means / tau + vars_ / (2.0 * tau * tau)
    xmax = x.max()
    return tau * (xmax + math.log(np.exp(x - xmax).sum()))


def klearning_policy(posteriors, cfg: SolverConfig = SolverConfig(),
                     explore_weight: float = 1.0) -> KLearningResult:
    """Equal-temperature restriction of the optimism-map maximization.

    The scalar temperature minimizes tau * log sum_i exp(mean_i / tau +
    cgf_i(1 / tau)); the policy is the softmax of the adjusted means at the
    optimal temperature.  The objective is convex in tau, so a bracketed
    golden-section search is exact to tolerance.
    """
    means = posterior_means(posteriors)
    vars_ = posterior_vars(posteriors) * float(explore_weight) ** 2
    vars_[vars_ < DEGENERATE_VAR**2] = 0.0
    A = means.size
    if A == 1:
        return KLearningResult(Policy(np.ones(1)), math.inf, float(means[0]))

    grid = 10.0 ** np.arange(-8, 9)
    vals = [_klearning_objective(t, means, vars_) for t in grid]
    k = int(np.argmin(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = _klearning_objective(c, means, vars_)
    fd = _klearning_objective(d, means, vars_)
    for _ in range(200):
        if b - a <= cfg.tolerance * max(1.0, a):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _klearning_objective(c, means, vars_)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _klearning_objective(d, means, vars_)
    tau = 0.5 * (a + b)
    x = means / tau + vars_ / (2.0 * tau * tau)
    x -= x.max()
    p = np.exp(x)
    p /= p.sum()
    return KLearningResult(Policy(p), float(tau), float(_klearning_objective(tau, means, vars_)))


def _posterior_draws(posteriors, rng: RngStream, n_samples: int) -> np.ndarray:
    means = posterior_means(posteriors)
    sig = sigmas_from_posteriors(posteriors)
    return means + sig * rng.normal(size=(n_samples, means.size))


def expected_max_mc(posteriors, rng: RngStream, n_samples: int):
    """Monte Carlo estimate of E max_i mu_i over independent posterior draws.

    Returns (estimate, standard error).
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    mx = _posterior_draws(posteriors, rng, n_samples).max(axis=1)
    est = float(mx.mean())
    se = float(mx.std(ddof=1) / math.sqrt(n_samples))
    return est, se


def ts_policy_mc(posteriors, rng: RngStream, n_samples: int) -> Policy:
    """Empirical probability-of-optimality policy from joint posterior draws.

    Ties break toward the lowest index.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    winners = _posterior_draws(posteriors, rng, n_samples).argmax(axis=1)
    counts = np.bincount(winners, minlength=len(posteriors)).astype(float)
    return Policy(counts / counts.sum())


def in_optimistic_set(posteriors, pi: Policy, rng: RngStream,
                      cfg: SolverConfig = SolverConfig(), emax=None):
    """Statistical membership test of the optimistic set.

    The margin is G(pi) minus the Monte Carlo estimate of E max mu; a policy
    is counted as a member when the margin is above -3 standard errors.
    ``emax`` may carry a precomputed (estimate, std_error) pair so a single
    estimate can be shared across many policies of the same posterior state.
    """
    est, se = emax if emax is not None else expected_max_mc(posteriors, rng, cfg.mc_samples)
    margin = optimism_map(posteriors, pi).value - est
    return margin >= -3.0 * se, float(margin), float(se)
