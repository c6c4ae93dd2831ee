"""Conjugate Gaussian posterior bookkeeping and CGF / rate-function calculus.

Each arm (or payoff-matrix cell) keeps a Gaussian posterior over its unknown
mean, represented by sufficient statistics (observation count and running
sum) so that updates are exact and order-independent.  The module exposes
the three quantities the optimism machinery needs from any posterior:

* ``cgf``          -- cumulant generating function of (X - E X),
* ``inverse_rate`` -- inverse of the convex conjugate of the CGF, which maps
                      a log-probability budget to a confidence radius,
* ``sample``       -- a posterior draw.

A two-point (+a / -a, equal mass) posterior is also provided.  It exists
solely to model the known 2x2 game fixture where a payoff entry is +-1 with
probability 1/2; it is never updated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

# Below this variance a posterior is treated as a point mass: its inverse
# rate is 0 and samples collapse to the mean.
DEGENERATE_VAR = 1e-15


class RngStream:
    """Seeded random stream with bit-exact reproducibility.

    Thin wrapper over numpy's PCG64 generator.  Every stochastic operation
    in the package takes an explicit stream; derived streams are obtained
    with ``child`` so parallel runs never share state.
    """

    def __init__(self, seed, _key=()):
        self.seed = int(seed)
        self._key = tuple(int(k) for k in _key)
        self.generator = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([self.seed, *self._key]))
        )

    def child(self, *key):
        """Independent stream deterministically derived from (seed, key)."""
        return RngStream(self.seed, self._key + tuple(key))

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def choice(self, n, p=None):
        return int(self.generator.choice(n, p=p))

    def dirichlet(self, alpha):
        return self.generator.dirichlet(alpha)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self._key})"


@dataclass(frozen=True)
class GaussianPosterior:
    """Gaussian posterior over an unknown mean with known noise variance.

    The prior is N(prior_mean, prior_var); observations are the mean plus
    N(0, noise_var) noise.  Sufficient statistics are the observation count
    and running sum, so posteriors are immutable value objects and batch
    updates commute.
    """

    prior_mean: float = 0.0
    prior_var: float = 1.0
    noise_var: float = 1.0
    n_obs: int = 0
    sum_obs: float = 0.0

    def __post_init__(self):
        if not (self.prior_var > 0.0) or not math.isfinite(self.prior_var):
            raise ValueError(f"prior_var must be positive, got {self.prior_var}")
        if not (self.noise_var > 0.0) or not math.isfinite(self.noise_var):
            raise ValueError(f"noise_var must be positive, got {self.noise_var}")
        if self.n_obs < 0:
            raise ValueError(f"n_obs must be nonnegative, got {self.n_obs}")
        if not math.isfinite(self.prior_mean) or not math.isfinite(self.sum_obs):
            raise ValueError("prior_mean and sum_obs must be finite")

    @property
    def posterior_var(self) -> float:
        return 1.0 / (1.0 / self.prior_var + self.n_obs / self.noise_var)

    @property
    def posterior_mean(self) -> float:
        return self.posterior_var * (
            self.prior_mean / self.prior_var + self.sum_obs / self.noise_var
        )

    @property
    def mean(self) -> float:
        return self.posterior_mean

    @property
    def var(self) -> float:
        return self.posterior_var

    @property
    def is_gaussian(self) -> bool:
        return True


@dataclass(frozen=True)
class TwoPointPosterior:
    """Symmetric two-point posterior: +magnitude or -magnitude, mass 1/2 each.

    Models the 2x2 game fixture's uncertain payoff entry exactly.  Its CGF is
    log cosh(magnitude * beta) and its inverse rate function saturates at
    ``magnitude`` once the log-probability budget exceeds log 2.  Conjugate
    updates are not defined for this family.
    """

    magnitude: float = 1.0

    def __post_init__(self):
        if not (self.magnitude > 0.0):
            raise ValueError("magnitude must be positive")

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def var(self) -> float:
        return self.magnitude**2

    @property
    def is_gaussian(self) -> bool:
        return False


def update(post: GaussianPosterior, observation: float) -> GaussianPosterior:
    """Fold one observation into the posterior, returning a new posterior."""
    if isinstance(post, TwoPointPosterior):
        raise TypeError("two-point posteriors are fixed fixtures and cannot be updated")
    obs = float(observation)
    if not math.isfinite(obs):
        raise ValueError(f"observation must be finite, got {observation}")
    return replace(post, n_obs=post.n_obs + 1, sum_obs=post.sum_obs + obs)


def cgf(post, beta: float) -> float:
    """Cumulant generating function of (X - E X) at beta.

    Gaussian closed form var * beta^2 / 2; log cosh(a * beta) for the
    two-point family.  Convex, zero at beta = 0.
    """
    if isinstance(post, TwoPointPosterior):
        # log cosh computed stably for large |x|
        x = post.magnitude * beta
        ax = abs(x)
        return ax + math.log1p(math.exp(-2.0 * ax)) - math.log(2.0)
    return post.posterior_var * beta * beta / 2.0


def cgf_prime(post, beta: float) -> float:
    """Derivative of the CGF at beta."""
    if isinstance(post, TwoPointPosterior):
        return post.magnitude * math.tanh(post.magnitude * beta)
    return post.posterior_var * beta


def cgf_vector(column, beta) -> float:
    """CGF of a posterior-matrix column at a vector argument.

    Cells are independent, so the column CGF is the sum of per-cell CGFs
    evaluated at the matching coordinate of beta.
    """
    beta = np.asarray(beta, dtype=float)
    cells = column.cells
    if beta.shape != (len(cells),):
        raise ValueError(f"beta has shape {beta.shape}, expected ({len(cells)},)")
    return float(sum(cgf(cell, b) for cell, b in zip(cells, beta)))


def inverse_rate(post, y: float) -> float:
    """Inverse rate function (Psi*)^{-1} evaluated at a budget y >= 0.

    Gaussian closed form sigma * sqrt(2 y).  Degenerate (point-mass)
    posteriors return 0 for every y.  Two-point posteriors invert the
    binary-entropy rate function and saturate at the spike magnitude.
    """
    y = float(y)
    if y < 0.0:
        raise ValueError(f"budget y must be nonnegative, got {y}")
    if isinstance(post, TwoPointPosterior):
        return post.magnitude * two_point_inverse_rate(y)
    var = post.posterior_var
    if var < DEGENERATE_VAR:
        return 0.0
    return math.sqrt(2.0 * var * y)


def sample(post, rng: RngStream) -> float:
    """Draw one value from the posterior."""
    if isinstance(post, TwoPointPosterior):
        u = rng.uniform()
        return post.magnitude if u < 0.5 else -post.magnitude
    var = post.posterior_var
    if var < DEGENERATE_VAR:
        return post.posterior_mean
    return float(rng.normal(post.posterior_mean, math.sqrt(var)))


def two_point_rate(eps: float) -> float:
    """Rate function of the unit two-point law at eps in [0, 1]."""
    if eps < 0.0 or eps > 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if eps == 0.0:
        return 0.0
    if eps == 1.0:
        return math.log(2.0)
    p, q = (1.0 + eps) / 2.0, (1.0 - eps) / 2.0
    return p * math.log(2.0 * p) + q * math.log(2.0 * q)


def two_point_inverse_rate(y: float) -> float:
    """Inverse of ``two_point_rate``; returns 1 for budgets beyond log 2."""
    if y <= 0.0:
        return 0.0
    if y >= math.log(2.0):
        return 1.0
    # safeguarded Newton: the rate's derivative is artanh(eps)
    eps = min(math.sqrt(2.0 * y), 0.97)
    lo, hi = 0.0, 1.0
    for _ in range(60):
        f = two_point_rate(eps) - y
        if f > 0.0:
            hi = eps
        else:
            lo = eps
        if abs(f) < 1e-15:
            break
        d = math.atanh(eps) if eps > 0.0 else 1e-300
        step = eps - f / d if d > 0.0 else 0.5 * (lo + hi)
        eps = step if lo < step < hi else 0.5 * (lo + hi)
    return eps


def two_point_inverse_rate_slope(y: float) -> float:
    """d/dy of the two-point inverse rate (0 in the saturated regime).

    Equals 1 / (Psi*)'(rho) = 1 / artanh(rho) at rho = inverse rate of y;
    this is also the minimizing tau of the perspective form.
    """
    if y <= 0.0:
        return math.inf
    if y >= math.log(2.0):
        return 0.0
    rho = two_point_inverse_rate(y)
    return 1.0 / math.atanh(rho)


@dataclass(frozen=True)
class PosteriorColumn:
    """View of one column of a posterior matrix."""

    cells: tuple
    means: np.ndarray
    vars: np.ndarray

    @property
    def all_gaussian(self) -> bool:
        return all(c.is_gaussian for c in self.cells)


@dataclass(frozen=True)
class PosteriorMatrix:
    """m x A grid of independent posteriors over a payoff matrix R.

    Cells are Gaussian by default; individual cells may be replaced by
    non-Gaussian fixtures (two-point).  Matrices are immutable: updates
    return a new matrix sharing untouched cells.
    """

    grid: np.ndarray  # object array of posterior cells, shape (m, A)
    _means: np.ndarray = field(default=None, compare=False, repr=False)
    _vars: np.ndarray = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.grid.ndim != 2 or self.grid.size == 0:
            raise ValueError("posterior grid must be a non-empty 2-D array")
        if self._means is None:
            means = np.array([[c.mean for c in row] for row in self.grid])
            vars_ = np.array([[c.var for c in row] for row in self.grid])
            object.__setattr__(self, "_means", means)
            object.__setattr__(self, "_vars", vars_)

    @classmethod
    def from_cells(cls, cells) -> "PosteriorMatrix":
        grid = np.empty((len(cells), len(cells[0])), dtype=object)
        for i, row in enumerate(cells):
            for j, c in enumerate(row):
                grid[i, j] = c
        return cls(grid=grid)

    @classmethod
    def iid(cls, m, A, prior_mean=0.0, prior_var=1.0, noise_var=1.0) -> "PosteriorMatrix":
        cell = GaussianPosterior(prior_mean, prior_var, noise_var)
        return cls.from_cells([[cell] * A for _ in range(m)])

    @property
    def m(self) -> int:
        return self.grid.shape[0]

    @property
    def A(self) -> int:
        return self.grid.shape[1]

    @property
    def all_gaussian(self) -> bool:
        return all(c.is_gaussian for c in self.grid.flat)

    def cell(self, i, j):
        return self.grid[i, j]

    def means(self) -> np.ndarray:
        return self._means

    def vars(self) -> np.ndarray:
        return self._vars

    def column(self, j) -> PosteriorColumn:
        return PosteriorColumn(
            cells=tuple(self.grid[:, j]),
            means=self._means[:, j].copy(),
            vars=self._vars[:, j].copy(),
        )

    def update_cell(self, i, j, observation) -> "PosteriorMatrix":
        new_cell = update(self.grid[i, j], observation)
        grid = self.grid.copy()
        grid[i, j] = new_cell
        means = self._means.copy()
        vars_ = self._vars.copy()
        means[i, j] = new_cell.mean
        vars_[i, j] = new_cell.var
        return PosteriorMatrix(grid=grid, _means=means, _vars=vars_)

    def update_column(self, j, observations) -> "PosteriorMatrix":
        observations = np.asarray(observations, dtype=float)
        if observations.shape != (self.m,):
            raise ValueError(
                f"column observation has shape {observations.shape}, expected ({self.m},)"
            )
        grid = self.grid.copy()
        means = self._means.copy()
        vars_ = self._vars.copy()
        for i in range(self.m):
            cell = update(grid[i, j], observations[i])
            grid[i, j] = cell
            means[i, j] = cell.mean
            vars_[i, j] = cell.var
        return PosteriorMatrix(grid=grid, _means=means, _vars=vars_)

    def sample_matrix(self, rng: RngStream) -> np.ndarray:
        """Draw a full payoff matrix, each cell independently."""
        out = np.empty((self.m, self.A))
        gaussian_mask = np.array(
            [[c.is_gaussian for c in row] for row in self.grid], dtype=bool
        )
        if gaussian_mask.all():
            sd = np.sqrt(np.maximum(self._vars, 0.0))
            sd[self._vars < DEGENERATE_VAR] = 0.0
            return self._means + sd * rng.normal(size=(self.m, self.A))
        for i in range(self.m):
            for j in range(self.A):
                out[i, j] = sample(self.grid[i, j], rng)
        return out


def posterior_means(posteriors) -> np.ndarray:
    """Means of a sequence of posteriors as a float vector."""
    return np.array([p.mean for p in posteriors], dtype=float)


def posterior_vars(posteriors) -> np.ndarray:
    """Posterior variances of a sequence of posteriors as a float vector."""
    return np.array([p.var for p in posteriors], dtype=float)
