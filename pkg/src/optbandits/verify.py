"""Acceptance checks: every headline claim as a named, runnable check.

Each check returns measured values alongside the asserted bracket so the
report reads as evidence, not just a verdict.  ``run_suite`` executes a
selection (default: all), printing one pass/fail line per check; its exit
status is nonzero if any check fails.

The module also houses the independent oracles used by the checks and the
test suite: a multi-scale grid search for small game values, active-set
enumeration for dual-set projections, and central finite differences for
gradients.  They share no code with the solvers they audit.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .environments import make_game_env
from .harness import ExperimentConfig, RunResult, default_config, run_experiment, theory_bound
from .optimism import (
    Policy,
    SolverConfig,
    expected_max_mc,
    optimism_gradient,
    optimism_map,
    ts_policy_mc,
    vbos_policy,
)
from .posteriors import GaussianPosterior, PosteriorMatrix, RngStream, cgf, inverse_rate
from .saddle import (
    ConstrainedBandit,
    SaddleProblem,
    Simplex,
    counterexample_problem,
    expected_value_mc,
    game_value_exact,
    project_dual,
    saddle_optimism_map,
    saddle_vbos,
)


@dataclass
class CheckOutcome:
    name: str
    passed: bool
    details: list = field(default_factory=list)
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        body = "; ".join(self.details)
        return f"[{status}] {self.name} ({self.seconds:.1f}s): {body}"


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------


def golden_section_perspective(var: float, y: float, lo=1e-9, hi=1e9):
    """inf over tau of tau * cgf(1/tau) + tau * y by golden-section search.

    Stays independent of the closed-form inverse rate it cross-checks.
    """
    post = GaussianPosterior(0.0, var, 1.0)

    def h(tau):
        return tau * cgf(post, 1.0 / tau) + tau * y

    grid = np.exp(np.linspace(math.log(lo), math.log(hi), 121))
    vals = [h(t) for t in grid]
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = h(c), h(d)
    for _ in range(200):
        if b - a <= 1e-13 * max(a, 1e-12):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = h(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = h(d)
    return h(0.5 * (a + b))


def _simplex_grid(A, n):
    if A == 2:
        p = np.linspace(0.0, 1.0, n + 1)
        return np.stack([p, 1.0 - p], axis=1)
    pts = []
    for i in range(n + 1):
        for j in range(n + 1 - i):
            pts.append((i / n, j / n, (n - i - j) / n))
    return np.array(pts)


def brute_force_game_value(payoff, levels=5, n0=100, keep=10):
    """Multi-scale grid maximization of min_rows (R pi) over the simplex.

    Starts from a full grid, then zooms around the best candidates;
    supports 2 or 3 columns.  Independent of the LP solver.
    """
    R = np.asarray(payoff, dtype=float)
    A = R.shape[1]
    if A not in (2, 3):
        raise ValueError("brute force supports 2 or 3 columns")

    def values(pts):
        return (R @ pts.T).min(axis=0)

    pts = _simplex_grid(A, n0)
    vals = values(pts)
    best = float(vals.max())
    centers = pts[np.argsort(vals)[-keep:]]
    h = 1.0 / n0
    for _ in range(levels - 1):
        h /= 10.0
        cand = []
        for cpt in centers:
            if A == 2:
                lo = max(cpt[0] - 15 * h, 0.0)
                hi = min(cpt[0] + 15 * h, 1.0)
                p = np.arange(lo, hi + h / 2, h)
                cand.append(np.stack([p, 1.0 - p], axis=1))
            else:
                offs = np.arange(-12, 13)
                di, dj = np.meshgrid(offs, offs)
                p1 = cpt[0] + di.ravel() * h
                p2 = cpt[1] + dj.ravel() * h
                p3 = 1.0 - p1 - p2
                ok = (p1 >= -1e-15) & (p2 >= -1e-15) & (p3 >= -1e-15)
                cand.append(np.stack([p1[ok], p2[ok], p3[ok]], axis=1))
        pts = np.vstack(cand)
        pts = np.clip(pts, 0.0, 1.0)
        pts /= pts.sum(axis=1, keepdims=True)
        vals = values(pts)
        best = max(best, float(vals.max()))
        centers = pts[np.argsort(vals)[-keep:]]
    return best


def project_simplex_oracle(v):
    """Exact simplex projection by support enumeration (small m only)."""
    v = np.asarray(v, dtype=float)
    m = v.size
    best, best_d = None, np.inf
    for r in range(1, m + 1):
        for S in itertools.combinations(range(m), r):
            S = list(S)
            theta = (v[S].sum() - 1.0) / len(S)
            x = np.zeros(m)
            x[S] = v[S] - theta
            if x.min() < -1e-12:
                continue
            d = float(((x - v) ** 2).sum())
            if d < best_d:
                best, best_d = np.maximum(x, 0.0), d
    return best


def project_constrained_oracle(v, C):
    """Exact constrained-bandit projection by active-set enumeration."""
    v = np.asarray(v, dtype=float)
    m = v.size
    rho = math.sqrt(max(C * C - 1.0, 0.0))
    free_idx = list(range(1, m))
    best, best_d = None, np.inf
    for r in range(len(free_idx) + 1):
        for Z in itertools.combinations(free_idx, r):
            live = [i for i in free_idx if i not in Z]
            for ball_active in (False, True):
                x = np.zeros(m)
                x[0] = 1.0
                if live:
                    w = v[live]
                    if ball_active:
                        nw = np.linalg.norm(w)
                        if nw == 0.0:
                            continue
                        x[live] = rho * w / nw
                    else:
                        x[live] = w
                if x[1:].min() < -1e-12 if m > 1 else False:
                    continue
                if np.linalg.norm(x[1:]) > rho + 1e-12:
                    continue
                d = float(((x - v) ** 2).sum())
                if d < best_d:
                    best, best_d = np.maximum(x, 0.0), d
    best[0] = 1.0
    return best


def finite_difference_gradient(posteriors, pi: Policy, h=1e-6):
    """Central finite differences of the optimism map on the simplex.

    Perturbs raw coordinates; the map is evaluated off the simplex via its
    formula, which is what the analytic gradient differentiates.
    """
    p = pi.probs
    grad = np.zeros_like(p)
    for i in range(p.size):
        up, dn = p.copy(), p.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (_raw_optimism(posteriors, up) - _raw_optimism(posteriors, dn)) / (2 * h)
    return grad


def _raw_optimism(posteriors, p):
    total = 0.0
    for post, w in zip(posteriors, p):
        total += w * (post.mean + inverse_rate(post, -math.log(w)))
    return total


# ---------------------------------------------------------------------------
# the acceptance checks
# ---------------------------------------------------------------------------


def check_counterexample_values(_runs) -> CheckOutcome:
    t0 = time.time()
    details = []
    ok = True
    prob = counterexample_problem()
    rng = RngStream(2024)
    est, se = expected_value_mc(prob, rng, 4000)
    cond = abs(est - (-0.25)) <= 3.0 * se
    ok &= cond
    details.append(f"E V* = {est:.4f} +- {se:.4f} (want -0.25 within 3 se: {cond})")
    g = saddle_optimism_map(prob, Policy(np.array([0.5, 0.5]))).value
    cond = abs(g - (-0.5)) <= 1e-6
    ok &= cond
    details.append(f"G([1/2,1/2]) = {g:.9f} (want -0.5 +- 1e-6: {cond})")
    sol = saddle_vbos(prob, SolverConfig(tolerance=1e-10))
    cond = sol.pi.probs[0] >= 1.0 - 1e-6
    ok &= cond
    details.append(f"vbos mass on col 1 = {sol.pi.probs[0]:.12f} (want >= 1-1e-6: {cond})")
    return CheckOutcome("counterexample_values", ok, details, time.time() - t0)


def check_counterexample_regret(runs) -> CheckOutcome:
    t0 = time.time()
    res = runs["counterexample"]
    T = res.config.horizon
    seeds = res.config.seeds
    ts_final = float(np.mean([res.transcripts[("saddle_ts", s)].cum_regret[-1] for s in seeds]))
    vb_final = float(np.mean([res.transcripts[("saddle_vbos", s)].cum_regret[-1] for s in seeds]))
    ts_ok = 0.10 * T <= ts_final <= 0.15 * T
    vb_ok = vb_final <= 1e-6
    details = [
        f"TS mean cum regret = {ts_final:.1f} (asserted bracket [{0.10 * T:.0f}, {0.15 * T:.0f}]: "
        f"{ts_ok}; measured slope {ts_final / T:.3f})",
        f"VBOS cum regret = {vb_final:.2e} (want <= 1e-6: {vb_ok})",
    ]
    return CheckOutcome("counterexample_regret", ts_ok and vb_ok, details, time.time() - t0)


def check_bandit_regret_ceiling(runs) -> CheckOutcome:
    t0 = time.time()
    res = runs["bandit"]
    cfg = res.config
    bounds = np.array([theory_bound("bandit", cfg.A, 1, cfg.C, t)
                       for t in range(1, cfg.horizon + 1)])
    ok = True
    details = []
    for agent in ("vbos", "ts", "klearning"):
        worst = -np.inf
        for seed in cfg.seeds:
            excess = res.transcripts[(agent, seed)].cum_regret - bounds
            worst = max(worst, float(excess.max()))
        cond = worst <= 0.0
        ok &= cond
        details.append(f"{agent}: max(cum regret - bound) = {worst:.2f} (want <= 0: {cond})")
    return CheckOutcome("bandit_regret_ceiling", ok, details, time.time() - t0)


def check_sandwich(_runs) -> CheckOutcome:
    t0 = time.time()
    rng = RngStream(77)
    inst_rng = np.random.default_rng(77)
    worst_left, worst_right = -np.inf, -np.inf
    for k in range(50):
        A = int(inst_rng.integers(2, 11))
        posts = [GaussianPosterior(float(inst_rng.normal()), float(inst_rng.uniform(0.1, 2.0)), 1.0)
                 for _ in range(A)]
        emax, se = expected_max_mc(posts, rng.child(k, 0), 100000)
        ts_pol = ts_policy_mc(posts, rng.child(k, 1), 100000)
        g_ts = optimism_map(posts, ts_pol).value
        g_vb = vbos_policy(posts).value
        worst_left = max(worst_left, emax - (g_ts + 3.0 * se))
        worst_right = max(worst_right, g_ts - (g_vb + 1e-6))
    left_ok = worst_left <= 0.0
    right_ok = worst_right <= 0.0
    details = [
        f"max(Emax - G(TS) - 3se) = {worst_left:.2e} (want <= 0: {left_ok})",
        f"max(G(TS) - G(VBOS) - 1e-6) = {worst_right:.2e} (want <= 0: {right_ok})",
    ]
    return CheckOutcome("sandwich", left_ok and right_ok, details, time.time() - t0)


def check_perspective_identity(_runs) -> CheckOutcome:
    t0 = time.time()
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        sigma = float(rng.uniform(0.05, 3.0))
        y = float(rng.uniform(1e-4, 10.0))
        inf_val = golden_section_perspective(sigma * sigma, y)
        closed = sigma * math.sqrt(2.0 * y)
        worst = max(worst, abs(inf_val - closed))
    ok = worst <= 1e-6
    return CheckOutcome(
        "perspective_identity", ok,
        [f"max |golden-section inf - sigma*sqrt(2y)| = {worst:.2e} (want <= 1e-6: {ok})"],
        time.time() - t0)


def check_uniform_gaussian_bound(_runs) -> CheckOutcome:
    t0 = time.time()
    ok = True
    details = []
    for A, sigma in ((2, 1.0), (3, 1.0), (10, 1.0), (50, 1.0), (10, 2.5)):
        posts = [GaussianPosterior(0.0, sigma * sigma, 1.0)] * A
        val = vbos_policy(posts).value
        target = sigma * math.sqrt(2.0 * math.log(A))
        cond = abs(val - target) <= 1e-6
        ok &= cond
        details.append(f"A={A}, sigma={sigma}: value {val:.8f} vs {target:.8f} ({cond})")
    return CheckOutcome("uniform_gaussian_bound", ok, details, time.time() - t0)


def check_game_ordering(runs) -> CheckOutcome:
    t0 = time.time()
    res = runs["game_bestresponse"]
    seeds = res.config.seeds
    finals = {
        agent: float(np.mean([res.transcripts[(agent, s)].cum_regret[-1] for s in seeds]))
        for agent in res.config.agents
    }
    vb_ok = finals["saddle_vbos"] < finals["saddle_ts"]
    kl_ok = finals["saddle_klearning"] < finals["saddle_ts"]
    details = [f"final mean regret: " + ", ".join(f"{a}={v:.1f}" for a, v in sorted(finals.items())),
               f"vbos < ts: {vb_ok}; klearning < ts: {kl_ok}"]
    return CheckOutcome("game_ordering", vb_ok and kl_ok, details, time.time() - t0)


def check_constrained_bandit(runs) -> CheckOutcome:
    t0 = time.time()
    res = runs["constrained"]
    cfg = res.config
    seeds = cfg.seeds
    T = cfg.horizon
    ok = True
    details = []
    for agent in ("saddle_vbos", "saddle_klearning"):
        v50 = float(np.mean([res.transcripts[(agent, s)].violation[49] for s in seeds]))
        vT = float(np.mean([res.transcripts[(agent, s)].violation[-1] for s in seeds]))
        cond = vT < 0.2 * v50
        ok &= cond
        details.append(f"{agent}: violation t=T {vT:.4f} vs 20% of t=50 {0.2 * v50:.4f} ({cond})")
    q = T // 4
    slopes_first, slopes_last = [], []
    for s in seeds:
        cum = res.transcripts[("saddle_ts", s)].cum_regret
        slopes_first.append(cum[q - 1] / q)
        slopes_last.append((cum[-1] - cum[-q - 1]) / q)
    sf, sl = float(np.mean(slopes_first)), float(np.mean(slopes_last))
    cond = sl >= 0.5 * sf
    ok &= cond
    details.append(f"TS slope last quarter {sl:.4f} vs 50% of first {0.5 * sf:.4f} ({cond})")
    min_regret = min(float(res.transcripts[(a, s)].regret.min())
                     for a in cfg.agents for s in seeds)
    cond = min_regret >= -1e-9
    ok &= cond
    details.append(f"min instantaneous regret {min_regret:.2e} (want >= -1e-9: {cond})")
    return CheckOutcome("constrained_bandit", ok, details, time.time() - t0)


def check_membership(runs) -> CheckOutcome:
    t0 = time.time()
    vbos_total, vbos_pass = 0, 0
    ts_ce_fail = 0
    for res in runs.values():
        for a in res.audits:
            if a.agent in ("vbos", "saddle_vbos"):
                vbos_total += 1
                vbos_pass += bool(a.member)
            if res.config.kind == "counterexample" and a.agent == "saddle_ts" and not a.member:
                ts_ce_fail += 1
    ok = vbos_total > 0 and vbos_pass == vbos_total and ts_ce_fail >= 1
    details = [
        f"VBOS audited policies in optimistic set: {vbos_pass}/{vbos_total}",
        f"counter-example TS policies failing membership: {ts_ce_fail} (want >= 1)",
    ]
    return CheckOutcome("membership", ok, details, time.time() - t0)


def check_oracle_equivalences(_runs) -> CheckOutcome:
    t0 = time.time()
    rng = np.random.default_rng(11)
    worst_game = 0.0
    for k in range(20):
        shape = (2, 2) if k % 2 == 0 else (3, 3)
        R = rng.normal(size=shape)
        lp_val = game_value_exact(R, Simplex(shape[0])).value
        bf_val = brute_force_game_value(R)
        worst_game = max(worst_game, abs(lp_val - bf_val))
    game_ok = worst_game <= 1e-4

    worst_proj = 0.0
    for k in range(200):
        m = int(rng.integers(2, 5))
        v = rng.normal(scale=2.0, size=m)
        if k % 2 == 0:
            got = project_dual(v, Simplex(m))
            want = project_simplex_oracle(v)
        else:
            C = float(rng.uniform(1.0, 4.0))
            got = project_dual(v, ConstrainedBandit(m, C))
            want = project_constrained_oracle(v, C)
        worst_proj = max(worst_proj, float(np.abs(got - want).max()))
    proj_ok = worst_proj <= 1e-6

    worst_grad = 0.0
    for _ in range(100):
        A = int(rng.integers(2, 8))
        posts = [GaussianPosterior(float(rng.normal()), float(rng.uniform(0.1, 2.0)), 1.0)
                 for _ in range(A)]
        raw = rng.uniform(0.05, 1.0, size=A)
        pol = Policy.from_array(raw)
        g = optimism_gradient(posts, pol)
        fd = finite_difference_gradient(posts, pol)
        rel = np.abs(g - fd) / np.maximum(np.abs(fd), 1.0)
        worst_grad = max(worst_grad, float(rel.max()))
    grad_ok = worst_grad <= 1e-5

    ok = game_ok and proj_ok and grad_ok
    details = [
        f"game value vs brute force: max diff {worst_game:.2e} (<= 1e-4: {game_ok})",
        f"projection vs active-set oracle: max diff {worst_proj:.2e} (<= 1e-6: {proj_ok})",
        f"gradient vs finite differences: max rel err {worst_grad:.2e} (<= 1e-5: {grad_ok})",
    ]
    return CheckOutcome("oracle_equivalences", ok, details, time.time() - t0)


def check_pigeonhole(_runs) -> CheckOutcome:
    t0 = time.time()
    q, T = 5, 500
    bound = q * (1.0 + math.log(T))
    worst = -np.inf
    for seed in range(20):
        rng = RngStream(seed)
        counts = np.zeros(q)
        total = 0.0
        for _ in range(T):
            p = rng.dirichlet(np.ones(q))
            total += float((p / (counts + 1.0)).sum())
            a = rng.choice(q, p=p)
            counts[a] += 1
        worst = max(worst, total)
    ok = worst <= bound
    return CheckOutcome(
        "pigeonhole", ok,
        [f"max over 20 seeds of sum p/(n+1) = {worst:.2f} (want <= {bound:.2f}: {ok})"],
        time.time() - t0)


def check_negative_control(_runs) -> CheckOutcome:
    """Mis-model the two-point payoff entry as N(0,1) and confirm the E V*
    check rejects it.  (The optimism value at [1/2,1/2] is insensitive to
    the entry's posterior family because the minimizing dual weight zeroes
    that column's bonus, so E V* is the discriminating quantity.)
    """
    t0 = time.time()
    cells = [
        [GaussianPosterior(0.0, 1.0, 1.0), GaussianPosterior(0.0, 1e-30, 1.0)],
        [GaussianPosterior(0.0, 1e-30, 1.0), GaussianPosterior(-1.0, 1e-30, 1.0)],
    ]
    prob = SaddleProblem(PosteriorMatrix.from_cells(cells), Simplex(2))
    est, se = expected_value_mc(prob, RngStream(99), 2000)
    inner_check_fails = abs(est - (-0.25)) > 3.0 * se
    return CheckOutcome(
        "negative_control", inner_check_fails,
        [f"Gaussian-modeled E V* = {est:.4f} +- {se:.4f}; "
         f"-0.25 correctly rejected: {inner_check_fails}"],
        time.time() - t0)


CHECKS = {
    "counterexample_values": (check_counterexample_values, ()),
    "counterexample_regret": (check_counterexample_regret, ("counterexample",)),
    "bandit_regret_ceiling": (check_bandit_regret_ceiling, ("bandit",)),
    "sandwich": (check_sandwich, ()),
    "perspective_identity": (check_perspective_identity, ()),
    "uniform_gaussian_bound": (check_uniform_gaussian_bound, ()),
    "game_ordering": (check_game_ordering, ("game_bestresponse",)),
    "constrained_bandit": (check_constrained_bandit, ("constrained",)),
    "membership": (check_membership, ("counterexample", "bandit", "game_bestresponse",
                                      "constrained")),
    "oracle_equivalences": (check_oracle_equivalences, ()),
    "pigeonhole": (check_pigeonhole, ()),
    "negative_control": (check_negative_control, ()),
}


def acceptance_configs(paper_scale: bool = False) -> dict:
    """Experiment configurations the run-backed checks consume."""
    bandit = replace(default_config("bandit"), agents=("ts", "vbos", "klearning"),
                     name="bandit")
    return {
        "counterexample": default_config("counterexample"),
        "bandit": bandit,
        "game_bestresponse": default_config("game_bestresponse", paper_scale),
        "constrained": default_config("constrained", paper_scale),
    }


def run_suite(names=None, paper_scale: bool = False, printer=print):
    """Run the named checks (default all); returns (outcomes, all_passed)."""
    names = list(names) if names else list(CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ValueError(f"unknown checks: {unknown}; available: {sorted(CHECKS)}")
    needed = set()
    for n in names:
        needed.update(CHECKS[n][1])
    configs = acceptance_configs(paper_scale)
    runs = {}
    for kind in sorted(needed):
        t0 = time.time()
        runs[kind] = run_experiment(configs[kind])
        printer(f"[run ] {kind}: {time.time() - t0:.1f}s "
                f"({len(configs[kind].agents)} agents x {len(configs[kind].seeds)} seeds x "
                f"T={configs[kind].horizon})")
    outcomes = []
    for n in names:
        fn, _ = CHECKS[n]
        outcome = fn(runs)
        outcomes.append(outcome)
        printer(outcome.line())
    all_passed = all(o.passed for o in outcomes)
    printer(f"{sum(o.passed for o in outcomes)}/{len(outcomes)} checks passed")
    return outcomes, all_passed
