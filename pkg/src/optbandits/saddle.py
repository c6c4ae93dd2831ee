"""Bilinear saddle-point machinery: dual sets, exact game values, and the
saddle optimism map with its maximizer.

A problem is a posterior matrix over an unknown payoff R (m rows, A
columns) together with a dual feasible set: a singleton (plain bandit),
the row simplex (zero-sum game), or the constrained-bandit set
{lambda_1 = 1, lambda >= 0, ||lambda||_2 <= C}.

For Gaussian cells the inner temperature minimization has the closed form

    min_{tau >= 0} tau * Psi_j(lam / tau) + tau * y
        = sqrt(2 y * sum_i lam_i^2 var_ij),

so the optimism map becomes, for fixed lam, a plain bandit optimism map
with effective means lam' m_j and effective scales sqrt(sum lam^2 var).
The maximizer is found by minimizing the convex dual value

    W(lam) = max_pi G_lam(pi)

over the dual set by projected gradient descent with exact inner simplex
maximizations, and is certified by the primal-dual gap W(lam) - G(pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as sciopt

from .optimism import (
    CallableBonus,
    GaussianBonus,
    Policy,
    SimplexMaxResult,
    SolverConfig,
    _gaussian_simplex_max_dual,
    _klearning_objective,
    _mirror_ascent,
)
from .posteriors import (
    DEGENERATE_VAR,
    GaussianPosterior,
    PosteriorMatrix,
    RngStream,
    TwoPointPosterior,
    cgf,
    cgf_prime,
)


# ---------------------------------------------------------------------------
# dual feasible sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Singleton:
    """Dual set containing one fixed vector (the plain-bandit case)."""

    vector: tuple

    def __init__(self, vector):
        object.__setattr__(self, "vector", tuple(float(v) for v in np.atleast_1d(vector)))

    @property
    def m(self):
        return len(self.vector)

    def as_array(self):
        return np.asarray(self.vector, dtype=float)


@dataclass(frozen=True)
class Simplex:
    """Dual set Delta_m: the opponent mixes over m rows (zero-sum game)."""

    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("simplex dimension must be positive")


@dataclass(frozen=True)
class ConstrainedBandit:
    """Dual set {lambda_1 = 1, lambda >= 0, ||lambda||_2 <= C}."""

    m: int
    C: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("dimension must be positive")
        if self.C < 1.0:
            raise ValueError("C must be at least 1 (lambda_1 = 1 forces ||lambda|| >= 1)")

    @property
    def radius(self):
        """Norm budget left for the free coordinates."""
        return math.sqrt(max(self.C * self.C - 1.0, 0.0))


DualSet = Singleton | Simplex | ConstrainedBandit


def project_dual(v, dual_set: DualSet) -> np.ndarray:
    """Euclidean projection onto the dual feasible set."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError("expected a 1-D vector")
    if isinstance(dual_set, Singleton):
        if v.size != dual_set.m:
            raise ValueError("dimension mismatch")
        return dual_set.as_array()
    if isinstance(dual_set, Simplex):
        if v.size != dual_set.m:
            raise ValueError("dimension mismatch")
        return _project_simplex(v)
    if isinstance(dual_set, ConstrainedBandit):
        if v.size != dual_set.m:
            raise ValueError("dimension mismatch")
        # the two constraints on the free block (nonnegativity and the norm
        # ball) have commuting projections: clip, then scale radially
        x = np.maximum(v[1:], 0.0)
        rho = dual_set.radius
        nrm = float(np.linalg.norm(x))
        if nrm > rho:
            x = x * (rho / nrm) if nrm > 0.0 else x
        out = np.empty_like(v)
        out[0] = 1.0
        out[1:] = x
        return out
    raise TypeError(f"unknown dual set {dual_set!r}")


def _project_simplex(v):
    """Sort-based exact projection onto the probability simplex."""
    n = v.size
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, n + 1) > (css - 1.0))[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def dual_feasible(lam, dual_set: DualSet, tol=1e-8) -> bool:
    lam = np.asarray(lam, dtype=float)
    return bool(np.linalg.norm(lam - project_dual(lam, dual_set)) <= tol)


# ---------------------------------------------------------------------------
# problem and solution containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SaddleProblem:
    posteriors: PosteriorMatrix
    dual_set: DualSet

    def __post_init__(self):
        if self.dual_set.m != self.posteriors.m:
            raise ValueError(
                f"dual set dimension {self.dual_set.m} does not match "
                f"posterior rows {self.posteriors.m}"
            )


@dataclass(frozen=True)
class SaddleSolution:
    pi: Policy
    lam: np.ndarray
    value: float
    converged: bool
    iterations: int
    diagnostics: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class SaddleMapResult:
    """Value of the saddle optimism map at one policy."""

    value: float
    lam: np.ndarray
    converged: bool
    iterations: int


# ---------------------------------------------------------------------------
# exact game values
# ---------------------------------------------------------------------------


def _minimax_lp(payoff):
    """Solve max_pi min_lam lam' R pi for lam, pi on simplices.

    One LP for the column player; the row player's mixture is recovered
    from the inequality marginals and the duality gap is evaluated
    explicitly (falling back to a second LP when marginals are degenerate).
    """
    R = payoff
    m, A = R.shape
    # column player: maximize v subject to v <= (R pi)_i
    c = np.zeros(A + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-R, np.ones((m, 1))])
    b_ub = np.zeros(m)
    A_eq = np.zeros((1, A + 1))
    A_eq[0, :A] = 1.0
    b_eq = np.ones(1)
    bounds = [(0.0, None)] * A + [(None, None)]
    primal = sciopt.linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                            bounds=bounds, method="highs")
    if primal.status != 0:
        raise RuntimeError(f"minimax LP (column player) failed: {primal.message}")
    pi = np.maximum(primal.x[:A], 0.0)
    pi /= pi.sum()
    v_primal = float(primal.x[-1])

    lam = None
    marg = getattr(primal.ineqlin, "marginals", None)
    if marg is not None:
        lam = np.maximum(np.abs(np.asarray(marg, dtype=float)), 0.0)
        total = lam.sum()
        lam = lam / total if total > 1e-12 else None
    if lam is not None:
        v_dual = float((R.T @ lam).max())
        if v_dual - v_primal <= 1e-7:
            return pi, lam, v_primal, v_dual

    # row player LP: minimize u subject to (R' lam)_j <= u
    c2 = np.zeros(m + 1)
    c2[-1] = 1.0
    A_ub2 = np.hstack([R.T, -np.ones((A, 1))])
    b_ub2 = np.zeros(A)
    A_eq2 = np.zeros((1, m + 1))
    A_eq2[0, :m] = 1.0
    dual = sciopt.linprog(c2, A_ub=A_ub2, b_ub=b_ub2, A_eq=A_eq2, b_eq=np.ones(1),
                          bounds=[(0.0, None)] * m + [(None, None)], method="highs")
    if dual.status != 0:
        raise RuntimeError(f"minimax LP (row player) failed: {dual.message}")
    lam = np.maximum(dual.x[:m], 0.0)
    lam /= lam.sum()
    v_dual = float(dual.x[-1])
    return pi, lam, v_primal, v_dual


def _constrained_value_lp(payoff, C):
    """LP fast path for the constrained-bandit value.

    Solves the primal/dual linear programs without the norm ball; valid
    whenever the recovered dual multiplier already satisfies the ball.
    Returns None when the LP pair is infeasible/unbounded or the ball binds.
    """
    R = payoff
    m, A = R.shape
    # primal: maximize (R pi)_1 s.t. (R pi)_{2:} >= 0, pi in simplex
    c = -R[0]
    A_ub = -R[1:] if m > 1 else None
    b_ub = np.zeros(m - 1) if m > 1 else None
    A_eq = np.ones((1, A))
    primal = sciopt.linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=np.ones(1),
                            bounds=[(0.0, None)] * A, method="highs")
    if primal.status != 0:
        return None
    pi = np.maximum(primal.x, 0.0)
    pi /= pi.sum()
    v_primal = -float(primal.fun)

    # dual: minimize V s.t. R_1 + sum_{i>=2} lam_i R_i <= V 1, lam >= 0
    nfree = m - 1
    c2 = np.zeros(nfree + 1)
    c2[-1] = 1.0
    A_ub2 = np.hstack([R[1:].T, -np.ones((A, 1))]) if nfree > 0 else -np.ones((A, 1))
    dual = sciopt.linprog(c2, A_ub=A_ub2, b_ub=-R[0],
                          bounds=[(0.0, None)] * nfree + [(None, None)], method="highs")
    if dual.status != 0:
        return None
    lam_free = np.maximum(dual.x[:nfree], 0.0)
    v_dual = float(dual.x[-1])
    lam = np.concatenate([[1.0], lam_free])
    if np.linalg.norm(lam) > C + 1e-9:
        return None
    return pi, lam, v_primal, v_dual


def _constrained_value_socp(payoff, dual_set: ConstrainedBandit):
    """General constrained-bandit value with the norm ball active.

    Dual side: minimize max_j (R' lam)_j over the dual set (smooth convex
    program).  Primal side: maximize (R pi)_1 - rho ||negative part of
    (R pi)_{2:}||_2 over the simplex via an epigraph reformulation.  Both are
    solved with SLSQP; the value is reported from the certified pair.
    """
    R = payoff
    m, A = R.shape
    rho = dual_set.radius

    # ---- dual: variables x = lam_{2:}, u
    nfree = m - 1

    def dual_obj(z):
        return z[-1]

    def dual_obj_grad(z):
        g = np.zeros(nfree + 1)
        g[-1] = 1.0
        return g

    cons = []
    Rt_free = R[1:].T  # (A, m-1)
    r1 = R[0]

    def ineq_u(z):
        # u - (R' lam)_j >= 0 for every column
        x = z[:nfree]
        return z[-1] - (r1 + Rt_free @ x)

    def ineq_u_jac(z):
        out = np.zeros((A, nfree + 1))
        out[:, :nfree] = -Rt_free
        out[:, -1] = 1.0
        return out

    cons.append({"type": "ineq", "fun": ineq_u, "jac": ineq_u_jac})
    if rho > 0.0:
        cons.append({
            "type": "ineq",
            "fun": lambda z: rho * rho - float(z[:nfree] @ z[:nfree]),
            "jac": lambda z: np.concatenate([-2.0 * z[:nfree], [0.0]]),
        })
    z0 = np.zeros(nfree + 1)
    z0[-1] = float(r1.max()) + 1.0
    res_d = sciopt.minimize(
        dual_obj, z0, jac=dual_obj_grad, constraints=cons,
        bounds=[(0.0, rho)] * nfree + [(None, None)],
        method="SLSQP", options={"maxiter": 400, "ftol": 1e-12},
    )
    x = np.clip(res_d.x[:nfree], 0.0, None)
    nx = np.linalg.norm(x)
    if nx > rho and nx > 0.0:
        x *= rho / nx
    lam = np.concatenate([[1.0], x])
    v_dual = float((R.T @ lam).max())

    pi = _constrained_primal_recovery(R, lam, rho)
    if pi is not None:
        v_primal = _constrained_play_value(R, pi, rho)
        if v_dual - v_primal <= 1e-7:
            return pi, lam, v_primal, v_dual
    pi = _constrained_primal_slsqp(R, rho)
    v_primal = _constrained_play_value(R, pi, rho)
    return pi, lam, v_primal, v_dual


def _constrained_primal_recovery(R, lam, rho, ptol=1e-8):
    """Recover the optimal policy from the dual multiplier via complementarity.

    At a saddle point the violated constraint rows are proportional to the
    dual weights, so the policy solves a linear program: maximize lam' R pi
    subject to (R pi)_i = -c lam_i on the supported rows and (R pi)_i >= 0
    elsewhere, over (pi in simplex, c >= 0).  Returns None when the LP is
    infeasible (active sets misidentified), letting the caller fall back.
    """
    m, A = R.shape
    supported = lam[1:] > ptol
    s2 = float(lam[1:][supported] @ lam[1:][supported])
    # variables (pi, c): maximize (R pi)_1 - s2 * c
    c_obj = np.concatenate([-R[0], [s2]])
    A_eq = [np.concatenate([np.ones(A), [0.0]])]
    b_eq = [1.0]
    for i in range(1, m):
        if supported[i - 1]:
            A_eq.append(np.concatenate([R[i], [lam[i]]]))
            b_eq.append(0.0)
    A_ub, b_ub = [], []
    for i in range(1, m):
        if not supported[i - 1]:
            A_ub.append(np.concatenate([-R[i], [0.0]]))
            b_ub.append(0.0)
    res = sciopt.linprog(
        c_obj, A_ub=np.array(A_ub) if A_ub else None, b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq), b_eq=np.array(b_eq),
        bounds=[(0.0, None)] * A + [(0.0, None)], method="highs",
    )
    if res.status != 0:
        return None
    pi = np.clip(res.x[:A], 0.0, None)
    total = pi.sum()
    return pi / total if total > 0.0 else None


def _constrained_primal_slsqp(R, rho):
    """Smooth epigraph reformulation of the primal, solved with SLSQP."""
    m, A = R.shape
    r1 = R[0]
    delta2 = 1e-18

    def primal_obj(z):
        t = z[A:]
        return -float(r1 @ z[:A]) + rho * math.sqrt(float(t @ t) + delta2)

    def primal_grad(z):
        t = z[A:]
        nt = math.sqrt(float(t @ t) + delta2)
        return np.concatenate([-r1, rho * t / nt])

    cons_p = [
        {
            "type": "eq",
            "fun": lambda z: float(z[:A].sum()) - 1.0,
            "jac": lambda z: np.concatenate([np.ones(A), np.zeros(m - 1)]),
        },
    ]
    if m > 1:
        R_free = R[1:]

        def ineq_t(z):
            return z[A:] + R_free @ z[:A]

        def ineq_t_jac(z):
            return np.hstack([R_free, np.eye(m - 1)])

        cons_p.append({"type": "ineq", "fun": ineq_t, "jac": ineq_t_jac})
    z0 = np.concatenate([np.full(A, 1.0 / A), np.maximum(-(R[1:] @ np.full(A, 1.0 / A)), 0.0)])
    res_p = sciopt.minimize(
        primal_obj, z0, jac=primal_grad, constraints=cons_p,
        bounds=[(0.0, 1.0)] * A + [(0.0, None)] * (m - 1),
        method="SLSQP", options={"maxiter": 400, "ftol": 1e-12},
    )
    pi = np.clip(res_p.x[:A], 0.0, None)
    return pi / pi.sum()


def _constrained_play_value(R, pi, rho):
    """Exact min_{lam in set} lam' R pi: first row minus rho times the norm
    of the violated constraint rows."""
    c = R @ pi
    neg = np.minimum(c[1:], 0.0) if R.shape[0] > 1 else np.zeros(0)
    return float(c[0] - rho * np.linalg.norm(neg))


def game_value_exact(payoff, dual_set: DualSet, C_tol=1e-7) -> SaddleSolution:
    """Exact value and optimal strategies of max_pi min_lam lam' R pi.

    Simplex dual sets solve the classical minimax LP pair; singleton sets
    reduce to a column argmax; constrained-bandit sets use the LP fast path
    when the norm ball is slack, otherwise the smooth convex reformulation.
    The duality gap of the returned pair is reported in diagnostics.
    """
    R = np.asarray(payoff, dtype=float)
    if R.ndim != 2:
        raise ValueError("payoff must be a matrix")
    if not np.isfinite(R).all():
        raise ValueError("payoff entries must be finite")
    m, A = R.shape

    if isinstance(dual_set, Singleton):
        lam = dual_set.as_array()
        if lam.size != m:
            raise ValueError("dual set dimension mismatch")
        scores = R.T @ lam
        j = int(np.argmax(scores))
        pi = Policy.point_mass(j, A)
        return SaddleSolution(pi, lam, float(scores[j]), True, 0, {"gap": 0.0})

    if isinstance(dual_set, Simplex):
        pi, lam, v_p, v_d = _minimax_lp(R)
        gap = abs(v_d - v_p)
        return SaddleSolution(
            Policy.from_array(pi), lam, 0.5 * (v_p + v_d), gap <= C_tol, 0, {"gap": gap}
        )

    if isinstance(dual_set, ConstrainedBandit):
        lp = _constrained_value_lp(R, dual_set.C)
        if lp is not None:
            pi, lam, v_p, v_d = lp
            gap = abs(v_d - v_p)
            return SaddleSolution(
                Policy.from_array(pi), lam, 0.5 * (v_p + v_d), gap <= C_tol, 0,
                {"gap": gap, "path": "lp"},
            )
        pi, lam, v_p, v_d = _constrained_value_socp(R, dual_set)
        gap = abs(v_d - v_p)
        return SaddleSolution(
            Policy.from_array(pi), lam, 0.5 * (v_p + v_d), gap <= C_tol, 0,
            {"gap": gap, "path": "socp"},
        )

    raise TypeError(f"unknown dual set {dual_set!r}")


# ---------------------------------------------------------------------------
# saddle optimism map
# ---------------------------------------------------------------------------


def _column_bonus_numeric(cells, lam, y, tau_lo=1e-12, tau_hi=1e12):
    """min_{tau>=0} tau * sum_i cgf_i(lam_i / tau) + tau * y for one column.

    The objective is convex in tau (a perspective plus a linear term); a
    log-spaced grid brackets the minimum and golden-section polishes it.
    Returns (bonus, minimizing tau).
    """
    lam = np.asarray(lam, dtype=float)

    def h(tau):
        return tau * sum(cgf(c, l / tau) for c, l in zip(cells, lam)) + tau * y

    grid = np.exp(np.linspace(math.log(tau_lo), math.log(tau_hi), 61))
    vals = [h(t) for t in grid]
    k = int(np.argmin(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = h(c), h(d)
    for _ in range(120):
        if b - a <= 1e-14 * max(1.0, a):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = h(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = h(d)
    tau = 0.5 * (a + b)
    return float(h(tau)), float(tau)


def _column_bonus_info(col, V_col, lam, y):
    """Bonus, minimizing temperature, and lam-gradient for one column.

    Three paths: Gaussian closed form; a single two-point cell among
    otherwise degenerate cells (the counter-example shape), where the bonus
    scales linearly in the cell's dual weight; and the numeric temperature
    minimization for anything else.
    """
    if y <= 0.0:
        return 0.0, 0.0, np.zeros(len(lam))
    if col.all_gaussian:
        S = float(V_col @ (lam * lam))
        if S <= 0.0:
            return 0.0, 0.0, np.zeros(len(lam))
        B = math.sqrt(2.0 * y * S)
        tau = math.sqrt(S / (2.0 * y))
        return B, tau, math.sqrt(2.0 * y / S) * (V_col * lam)
    special = [i for i, c in enumerate(col.cells) if not c.is_gaussian]
    rest_degenerate = all(
        col.cells[i].var < DEGENERATE_VAR for i in range(len(col.cells)) if i not in special
    )
    if len(special) == 1 and rest_degenerate and isinstance(col.cells[special[0]], TwoPointPosterior):
        i = special[0]
        mag = col.cells[i].magnitude
        from .posteriors import two_point_inverse_rate, two_point_inverse_rate_slope

        rho = two_point_inverse_rate(y)
        slope = two_point_inverse_rate_slope(y)
        c = mag * abs(lam[i])
        grad = np.zeros(len(lam))
        grad[i] = mag * rho * math.copysign(1.0, lam[i]) if lam[i] != 0.0 else 0.0
        tau = c * slope if math.isfinite(slope) else 0.0
        return c * rho, tau, grad
    B, tau = _column_bonus_numeric(col.cells, lam, y)
    tau_g = max(tau, 1e-12)
    grad = np.array([cgf_prime(c, l / tau_g) for c, l in zip(col.cells, lam)])
    return B, tau, grad


class _SaddleInner:
    """Gaussian-vectorized access to the saddle problem at fixed lam."""

    def __init__(self, problem: SaddleProblem):
        self.problem = problem
        self.M = problem.posteriors.means()  # (m, A)
        V = problem.posteriors.vars().copy()
        V[V < DEGENERATE_VAR] = 0.0
        self.V = V
        self.all_gaussian = problem.posteriors.all_gaussian
        self.m, self.A = self.M.shape
        self.columns = None
        if not self.all_gaussian:
            self.columns = [problem.posteriors.column(j) for j in range(self.A)]

    def effective(self, lam):
        a = self.M.T @ lam
        S = self.V.T @ (lam * lam)
        return a, S

    def bonus_funcs(self, lam):
        """Per-column (B(y), B'(y)) callables for the generic solver path."""
        funcs = []
        for j in range(self.A):
            col = self.columns[j]
            V_col = self.V[:, j]
            funcs.append((
                lambda y, col=col, V_col=V_col: _column_bonus_info(col, V_col, lam, y)[0],
                lambda y, col=col, V_col=V_col: _column_bonus_info(col, V_col, lam, y)[1],
            ))
        return funcs

    def max_over_policies(self, lam, cfg: SolverConfig) -> SimplexMaxResult:
        a, S = self.effective(lam)
        if self.all_gaussian:
            return _gaussian_simplex_max_dual(a, np.sqrt(np.maximum(S, 0.0)), cfg)
        return _mirror_ascent(a, CallableBonus(self.bonus_funcs(lam)), cfg)

    def lam_gradient_terms(self, lam, pi, y):
        """sum_j pi_j (m_j + d B_j / d lam) for the dual descent."""
        grad = self.M @ pi
        if self.all_gaussian:
            S = self.V.T @ (lam * lam)
            coef = np.zeros_like(pi)
            mask = (S > 0.0) & (pi > 0.0) & (y > 0.0)
            coef[mask] = pi[mask] * np.sqrt(2.0 * y[mask] / S[mask])
            grad = grad + lam * (self.V @ coef)
            return grad
        for j in range(self.A):
            if pi[j] <= 0.0 or y[j] <= 0.0:
                continue
            _, _, dcol = _column_bonus_info(self.columns[j], self.V[:, j], lam, y[j])
            grad = grad + pi[j] * dcol
        return grad

    def phi(self, lam, pi, y):
        """Objective of the inner lam minimization at a fixed policy."""
        a, S = self.effective(lam)
        if self.all_gaussian:
            bonus = np.zeros_like(pi)
            mask = (pi > 0.0) & (y > 0.0)
            bonus[mask] = np.sqrt(2.0 * y[mask] * np.maximum(S[mask], 0.0))
            return float(pi @ (a + bonus))
        total = 0.0
        for j in range(self.A):
            if pi[j] <= 0.0:
                continue
            b, _, _ = _column_bonus_info(self.columns[j], self.V[:, j], lam, y[j])
            total += pi[j] * (a[j] + b)
        return total


def _pgd_minimize(fun_grad, project, x0, cfg: SolverConfig, max_iters=None):
    """Monotone projected gradient descent with backtracking line search.

    ``fun_grad(x)`` returns (value, gradient).  The step length is retried
    from its last accepted value and grows only after a first-try accept.
    Terminates on stalled steps or value improvements below tolerance;
    returns (x, value, iterations, converged).
    """
    max_iters = max_iters or cfg.max_iters
    x = project(np.asarray(x0, dtype=float))
    f, g = fun_grad(x)
    alpha = 1.0 / (float(np.linalg.norm(g)) + 1.0)
    grow = True
    stall = 0
    for it in range(1, max_iters + 1):
        trial = min(alpha * 2.0, 1e12) if grow else alpha
        accepted = False
        halvings = 0
        for _ in range(60):
            xn = project(x - trial * g)
            step = xn - x
            sq = float(step @ step)
            if sq == 0.0:
                break
            fn, gn = fun_grad(xn)
            if fn <= f - 1e-4 * sq / trial:
                improved = f - fn
                x, f, g, alpha, accepted = xn, fn, gn, trial, True
                break
            trial *= 0.5
            halvings += 1
        if not accepted:
            return x, f, it, True
        grow = halvings == 0
        small_step = sq <= (cfg.tolerance * (1.0 + float(np.linalg.norm(x)))) ** 2
        small_gain = improved <= 0.1 * cfg.tolerance * max(1.0, abs(f))
        if small_step or small_gain:
            stall += 1
            if stall >= 2:
                return x, f, it, True
        else:
            stall = 0
    return x, f, max_iters, False


def _default_dual_start(dual_set: DualSet) -> np.ndarray:
    if isinstance(dual_set, Singleton):
        return dual_set.as_array()
    if isinstance(dual_set, Simplex):
        return np.full(dual_set.m, 1.0 / dual_set.m)
    start = np.zeros(dual_set.m)
    start[0] = 1.0
    return start


def saddle_optimism_map(problem: SaddleProblem, pi: Policy,
                        cfg: SolverConfig = SolverConfig(), lam0=None) -> SaddleMapResult:
    """Value of the saddle optimism map at a policy.

    Evaluates min over the dual set of the policy-weighted sum of dual
    means plus temperature-eliminated bonuses; the inner minimization is
    convex and solved by projected gradient descent.
    """
    p = np.asarray(pi.probs, dtype=float)
    inner = _SaddleInner(problem)
    if p.size != inner.A:
        raise ValueError("policy length does not match posterior columns")
    y = np.where(p > 0.0, -np.log(np.maximum(p, 1e-300)), 0.0)

    if isinstance(problem.dual_set, Singleton):
        lam = problem.dual_set.as_array()
        return SaddleMapResult(inner.phi(lam, p, y), lam, True, 0)

    def fun_grad(lam):
        return inner.phi(lam, p, y), inner.lam_gradient_terms(lam, p, y)

    start = np.asarray(lam0, dtype=float) if lam0 is not None else _default_dual_start(problem.dual_set)
    lam, val, iters, ok = _pgd_minimize(
        fun_grad, lambda v: project_dual(v, problem.dual_set), start, cfg
    )
    return SaddleMapResult(float(val), lam, ok, iters)


def cone_dual_certificate(problem: SaddleProblem, lam, pi: Policy) -> dict:
    """Feasible point of the exponential-cone dual recovered from (lam, pi).

    Returns the dual variables (tau, s, V) and the dual objective
    V + sum_j tau_j exp(s_j / tau_j), an upper bound on the optimism-map
    maximum.  At the optimum the policy satisfies pi_j = exp(s_j / tau_j).
    """
    inner = _SaddleInner(problem)
    p = np.asarray(pi.probs, dtype=float)
    y = -np.log(np.maximum(p, 1e-300))
    return _cone_dual_point(inner, np.asarray(lam, dtype=float), p, y)


def _cone_dual_value(inner: _SaddleInner, lam, pi, y):
    return _cone_dual_point(inner, lam, pi, y)["objective"]


def _cone_dual_point(inner: _SaddleInner, lam, pi, y):
    """Dual variables of the cone program at the recovered dual point.

    Temperatures come from the per-column bonus minimization; the free
    scalar is chosen by the normalization root sum_j exp(s_j / tau_j) = 1,
    which is where the dual objective is smallest along that line.
    """
    a, S = inner.effective(lam)
    tau = np.zeros_like(pi)
    bon = np.zeros_like(pi)
    if inner.all_gaussian:
        mask = (S > DEGENERATE_VAR) & (y > 0.0)
        tau[mask] = np.sqrt(S[mask] / (2.0 * y[mask]))
        bon[mask] = np.sqrt(2.0 * y[mask] * S[mask])
    else:
        for j in range(inner.A):
            bon[j], tau[j], _ = _column_bonus_info(inner.columns[j], inner.V[:, j], lam, y[j])
    # at the minimizing temperature, tau Psi(lam / tau) = bonus - tau * y
    c = a + bon - tau * y
    pos = tau > 0.0
    lo = float(c[~pos].max()) if (~pos).any() else -np.inf

    def excess(V):
        z = (c[pos] - tau[pos] - V) / tau[pos]
        return float(np.exp(np.minimum(z, 700.0)).sum()) - 1.0

    if not pos.any():
        V = lo
        return {"V": V, "tau": tau, "s": c - V - tau, "objective": float(V)}

    hi = float(c[pos].max()) + 1.0
    while excess(hi) > 0.0:
        hi += max(1.0, abs(hi))
    low = max(lo, hi - 1e6) if math.isfinite(lo) else hi - 1e6
    if excess(low) < 0.0:
        V = low  # normalization unreachable; dual increases beyond here
    else:
        for _ in range(200):
            mid = 0.5 * (low + hi)
            if excess(mid) > 0.0:
                low = mid
            else:
                hi = mid
        V = 0.5 * (low + hi)
    s = c - V - tau
    z = (c[pos] - tau[pos] - V) / tau[pos]
    objective = float(V + (tau[pos] * np.exp(np.minimum(z, 700.0))).sum())
    return {"V": float(V), "tau": tau, "s": s, "objective": objective}


def saddle_vbos(problem: SaddleProblem, cfg: SolverConfig = SolverConfig(),
                lam0=None, restarts: int = 0, rng: RngStream | None = None,
                certify: bool = True) -> SaddleSolution:
    """Maximize the saddle optimism map over the policy simplex.

    Minimizes the convex dual value W(lam) = max_pi G_lam(pi) over the dual
    set by projected gradient descent, with each W evaluation an exact inner
    simplex maximization.  The returned solution is certified by the
    primal-dual gap between W at the final dual point and the optimism-map
    value of the recovered policy; the exponential-cone dual objective at
    the recovered point is reported in diagnostics.  ``certify=False`` skips
    the certificate (hot experiment loops audit separately) and reports the
    dual value W as the value.
    """
    inner = _SaddleInner(problem)

    if isinstance(problem.dual_set, Singleton):
        lam = problem.dual_set.as_array()
        res = inner.max_over_policies(lam, cfg)
        return SaddleSolution(res.policy, lam, res.value, res.converged, res.iterations,
                              {"gap": res.gap})

    if inner.all_gaussian and float(inner.V.max()) < DEGENERATE_VAR:
        # every bonus vanishes, so the optimism map collapses to the
        # Lagrangian and the maximizer is the deterministic game optimum
        sol = game_value_exact(inner.M, problem.dual_set)
        return SaddleSolution(sol.pi, sol.lam, sol.value, sol.converged, sol.iterations,
                              dict(sol.diagnostics, dual_value=sol.value))

    cache = {}

    def fun_grad(lam):
        key = lam.tobytes()
        if key not in cache:
            res = inner.max_over_policies(lam, cfg)
            p = res.policy.probs
            y = -np.log(p)
            cache[key] = (res.value, inner.lam_gradient_terms(lam, p, y), res.policy)
            if len(cache) > 64:
                cache.pop(next(iter(cache)))
        v, g, _ = cache[key]
        return v, g

    def solve_from(start):
        lam, W, iters, ok = _pgd_minimize(
            fun_grad, lambda v: project_dual(v, problem.dual_set), start, cfg
        )
        res = inner.max_over_policies(lam, cfg)
        return lam, W, iters, ok, res

    start = np.asarray(lam0, dtype=float) if lam0 is not None else _default_dual_start(problem.dual_set)
    lam, W, iters, ok, res = solve_from(start)
    best = (lam, W, iters, ok, res)
    extra_vals = []
    for k in range(restarts):
        if rng is None:
            raise ValueError("restarts require an rng")
        noise = rng.normal(size=lam.size)
        lam_k, W_k, it_k, ok_k, res_k = solve_from(project_dual(lam + noise, problem.dual_set))
        extra_vals.append(W_k)
        if W_k < best[1]:
            best = (lam_k, W_k, it_k, ok_k, res_k)
    lam, W, iters, ok, res = best

    pi = res.policy
    if not certify:
        return SaddleSolution(pi, lam, float(W), bool(ok and res.converged), iters,
                              {"dual_value": float(W), "inner_gap": res.gap})
    gmap = saddle_optimism_map(problem, pi, cfg, lam0=lam)
    gap = W - gmap.value
    y = -np.log(pi.probs)
    cone = _cone_dual_value(inner, lam, pi.probs, y)
    converged = ok and res.converged and gap <= 100.0 * cfg.tolerance
    return SaddleSolution(
        pi, lam, float(gmap.value), bool(converged), iters,
        {"gap": float(gap), "dual_value": float(W), "cone_dual": float(cone),
         "restart_values": extra_vals, "inner_gap": res.gap},
    )


@dataclass(frozen=True)
class SaddleKLearningResult:
    policy: Policy
    lam: np.ndarray
    tau: float
    value: float


def saddle_klearning(problem: SaddleProblem, cfg: SolverConfig = SolverConfig(),
                     lam0=None) -> SaddleKLearningResult:
    """Equal-temperature restriction of the saddle optimism maximization.

    For fixed dual weights the shared-temperature objective is exactly the
    bandit K-learning objective with effective means lam' m_j and effective
    variances sum_i lam_i^2 var_ij, so the dual weights are found by
    projected gradient descent on that partially minimized convex value.
    Gaussian posteriors only.
    """
    if not problem.posteriors.all_gaussian:
        raise ValueError("saddle K-learning supports Gaussian posteriors only")
    inner = _SaddleInner(problem)
    tau_hint = [None]

    def k_value_tau(lam):
        a, S = inner.effective(lam)
        # bracket from the previous temperature when it still holds, since
        # the dual weights move slowly between evaluations
        if tau_hint[0] is not None:
            t0 = tau_hint[0]
            grid = t0 * np.array([0.25, 0.5, 1.0, 2.0, 4.0])
            vals = [_klearning_objective(t, a, S) for t in grid]
            k = int(np.argmin(vals))
            if 0 < k < len(grid) - 1:
                lo, hi = grid[k - 1], grid[k + 1]
            else:
                tau_hint[0] = None
        if tau_hint[0] is None:
            grid = 10.0 ** np.arange(-8, 9)
            vals = [_klearning_objective(t, a, S) for t in grid]
            k = int(np.argmin(vals))
            lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        aa, bb = lo, hi
        c = bb - invphi * (bb - aa)
        d = aa + invphi * (bb - aa)
        fc, fd = _klearning_objective(c, a, S), _klearning_objective(d, a, S)
        for _ in range(160):
            if bb - aa <= 1e-10 * max(1.0, aa):
                break
            if fc < fd:
                bb, d, fd = d, c, fc
                c = bb - invphi * (bb - aa)
                fc = _klearning_objective(c, a, S)
            else:
                aa, c, fc = c, d, fd
                d = aa + invphi * (bb - aa)
                fd = _klearning_objective(d, a, S)
        tau = 0.5 * (aa + bb)
        tau_hint[0] = tau
        return _klearning_objective(tau, a, S), tau, a, S

    def fun_grad(lam):
        val, tau, a, S = k_value_tau(lam)
        x = a / tau + S / (2.0 * tau * tau)
        x -= x.max()
        p = np.exp(x)
        p /= p.sum()
        grad = inner.M @ p + (lam * (inner.V @ p)) / tau
        return val, grad

    if isinstance(problem.dual_set, Singleton):
        lam = problem.dual_set.as_array()
    else:
        start = np.asarray(lam0, dtype=float) if lam0 is not None else _default_dual_start(problem.dual_set)
        lam, _, _, _ = _pgd_minimize(
            fun_grad, lambda v: project_dual(v, problem.dual_set), start, cfg
        )
    val, tau, a, S = k_value_tau(lam)
    x = a / tau + S / (2.0 * tau * tau)
    x -= x.max()
    p = np.exp(x)
    p /= p.sum()
    return SaddleKLearningResult(Policy(p), lam, float(tau), float(val))


def expected_value_mc(problem: SaddleProblem, rng: RngStream, n_samples: int):
    """Monte Carlo estimate of E V* over posterior draws of the payoff.

    Identical draws (possible under discrete or degenerate cells) are
    solved once.  Returns (estimate, standard error).
    """
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    vals = np.empty(n_samples)
    solved = {}
    for k in range(n_samples):
        R = problem.posteriors.sample_matrix(rng)
        key = R.tobytes()
        if key not in solved:
            solved[key] = game_value_exact(R, problem.dual_set).value
        vals[k] = solved[key]
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_samples))
    return est, se


def in_saddle_optimistic_set(problem: SaddleProblem, pi: Policy, rng: RngStream,
                             cfg: SolverConfig = SolverConfig(), ev=None):
    """Statistical membership test of the saddle optimistic set.

    The margin is the optimism-map value at pi minus the Monte Carlo
    estimate of E V*; membership allows a 3-standard-error band.  ``ev``
    may carry a precomputed (estimate, std_error) pair.
    """
    est, se = ev if ev is not None else expected_value_mc(problem, rng, max(cfg.mc_samples // 1000, 100))
    value = saddle_optimism_map(problem, pi, cfg).value
    margin = value - est
    return margin >= -3.0 * se, float(margin), float(se)


# ---------------------------------------------------------------------------
# the 2x2 counter-example fixture
# ---------------------------------------------------------------------------


def counterexample_payoff(r: float = 1.0) -> np.ndarray:
    """True payoff matrix [[r, 0], [0, -1]] of the 2x2 game."""
    return np.array([[float(r), 0.0], [0.0, -1.0]])


def counterexample_problem() -> SaddleProblem:
    """Agent-side posterior for the 2x2 game with an unresolved +-1 entry.

    The top-left entry is a symmetric two-point law; the other three
    entries are (numerically) point masses at their known values.  The
    dual set is the row simplex.
    """
    pm = lambda mu: GaussianPosterior(prior_mean=mu, prior_var=1e-30)
    cells = [
        [TwoPointPosterior(1.0), pm(0.0)],
        [pm(0.0), pm(-1.0)],
    ]
    return SaddleProblem(PosteriorMatrix.from_cells(cells), Simplex(2))
