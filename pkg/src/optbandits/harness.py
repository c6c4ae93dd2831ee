"""Configuration-driven experiment runner and output serialization.

Each experiment fans out over (agent, seed) pairs, runs the interaction
loop for the configured horizon, and records transcripts, membership
audits, and per-timestep summaries with the closed-form regret ceilings.
Identical configurations produce byte-identical outputs: every stochastic
step draws from streams derived deterministically from (seed, purpose).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import yaml

from .agents import (
    AgentSpec,
    act,
    init_bandit_state,
    init_saddle_state,
    observe,
)
from .environments import (
    BanditEnv,
    ConstrainedEnv,
    GameEnv,
    Transcript,
    bandit_regret,
    best_response_row,
    constrained_regret,
    game_regret,
    generate_instance,
    make_game_env,
    step_bandit,
    step_constrained,
    step_game,
)
from .optimism import (
    Policy,
    SolverConfig,
    expected_max_mc,
    in_optimistic_set,
    optimism_map,
    ts_policy_mc,
    vbos_policy,
)
from .posteriors import PosteriorMatrix, RngStream
from .saddle import (
    ConstrainedBandit,
    SaddleProblem,
    Simplex,
    counterexample_payoff,
    counterexample_problem,
    expected_value_mc,
    in_saddle_optimistic_set,
    saddle_optimism_map,
    saddle_vbos,
)

EXPERIMENT_KINDS = (
    "bandit",
    "game_selfplay",
    "game_bestresponse",
    "counterexample",
    "constrained",
    "simplex_snapshot",
)

DEFAULT_AGENTS = {
    "bandit": ("ts", "vbos", "klearning", "ucb", "exp3"),
    "game_selfplay": ("saddle_ts", "saddle_vbos", "saddle_klearning", "exp3"),
    "game_bestresponse": ("saddle_ts", "saddle_vbos", "saddle_klearning", "exp3"),
    "counterexample": ("saddle_ts", "saddle_vbos"),
    "constrained": ("saddle_ts", "saddle_vbos", "saddle_klearning"),
    "simplex_snapshot": ("ts",),
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    name: str = ""
    A: int = 10
    m: int = 1
    horizon: int = 1000
    seeds: tuple = (0, 1, 2, 3, 4, 5, 6, 7)
    agents: tuple = ()
    prior_mean: float = 0.0
    prior_sd: float = 1.0
    noise_sd: float = 1.0
    C: float = 10.0
    instance_seed: int = 12345
    counterexample_r: float = 1.0
    solver: SolverConfig = SolverConfig()
    audit_schedule: str = "dyadic"  # dyadic | all | none
    audit_mc_samples: int = 20000
    audit_value_samples: int = 200
    snapshot_times: tuple = (1, 32, 256)
    snapshot_follow: str = "ts"
    grid_spacing: float = 0.01
    out_dir: str = ""

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if len(self.seeds) < 1:
            raise ValueError("at least one seed is required")
        if self.A < 1 or self.m < 1:
            raise ValueError("dimensions must be positive")
        if not self.name:
            object.__setattr__(self, "name", self.kind)
        if not self.agents:
            object.__setattr__(self, "agents", DEFAULT_AGENTS[self.kind])
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "snapshot_times", tuple(int(t) for t in self.snapshot_times))

    def to_dict(self):
        d = asdict(self)
        d["solver"] = asdict(self.solver)
        d["seeds"] = list(self.seeds)
        d["agents"] = list(self.agents)
        d["snapshot_times"] = list(self.snapshot_times)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "solver" in d and isinstance(d["solver"], dict):
            d["solver"] = SolverConfig(**d["solver"])
        return cls(**d)

    @classmethod
    def from_yaml(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(yaml.safe_load(fh))


def default_config(kind: str, paper_scale: bool = False) -> ExperimentConfig:
    """Shipped experiment presets at desk scale (or paper scale)."""
    if kind == "bandit":
        return ExperimentConfig(kind="bandit", A=10, horizon=1000,
                                agents=("ts", "vbos", "klearning", "ucb", "exp3"))
    if kind in ("game_selfplay", "game_bestresponse"):
        n = 50 if paper_scale else 10
        return ExperimentConfig(kind=kind, A=n, m=n,
                                horizon=10000 if paper_scale else 2000,
                                solver=SolverConfig(tolerance=1e-6, max_iters=2000))
    if kind == "counterexample":
        return ExperimentConfig(kind="counterexample", A=2, m=2, horizon=1000,
                                solver=SolverConfig(tolerance=1e-10),
                                audit_value_samples=400)
    if kind == "constrained":
        return ExperimentConfig(kind="constrained", A=50, m=25,
                                horizon=10000 if paper_scale else 2000,
                                prior_mean=-0.15, prior_sd=1.0, C=10.0,
                                solver=SolverConfig(tolerance=1e-6, max_iters=2000))
    if kind == "simplex_snapshot":
        return ExperimentConfig(kind="simplex_snapshot", A=3, m=1, horizon=256,
                                seeds=(0,), snapshot_follow="ts")
    raise ValueError(f"unknown experiment kind {kind!r}")


def theory_bound(kind: str, A: int, m: int, C: float, t: int) -> float:
    """Closed-form cumulative-regret ceilings for optimistic policies."""
    if kind == "bandit":
        return math.sqrt(2.0 * A * t * math.log(A) * (1.0 + math.log(t)))
    if kind in ("game_selfplay", "game_bestresponse", "counterexample"):
        return math.sqrt(2.0 * A * m * t * math.log(A) * (1.0 + math.log(t)))
    if kind == "constrained":
        return C * (math.sqrt(2.0 * math.log(A) * (1.0 + math.log(t))) + 2.0 * math.sqrt(m)) \
            * math.sqrt(A * t)
    raise ValueError(f"no theory bound for {kind!r}")


@dataclass(frozen=True)
class SummaryRow:
    experiment: str
    agent: str
    seed: int  # number of seeds aggregated
    t: int
    mean_cumulative_regret: float
    stderr: float
    constraint_violation: float | None
    theory_bound: float


@dataclass(frozen=True)
class AuditRow:
    experiment: str
    agent: str
    seed: int
    t: int
    member: bool
    margin: float
    std_error: float


@dataclass
class RunResult:
    config: ExperimentConfig
    transcripts: dict  # (agent, seed) -> Transcript
    audits: list
    summaries: list
    snapshots: list = field(default_factory=list)


def _audit_times(schedule: str, T: int):
    if schedule == "none":
        return frozenset()
    if schedule == "all":
        return frozenset(range(1, T + 1))
    times = set()
    t = 1
    while t <= T:
        times.add(t)
        t *= 2
    times.add(T)
    return frozenset(times)


def _make_agent_spec(name: str, cfg: ExperimentConfig) -> AgentSpec:
    return AgentSpec(kind=name, solver_cfg=cfg.solver, horizon=cfg.horizon)


def _bandit_env_for_seed(cfg: ExperimentConfig, seed: int) -> BanditEnv:
    rng = RngStream(seed).child(0)
    return generate_instance("bandit", cfg.A, (cfg.prior_mean, cfg.prior_sd), cfg.C, rng,
                             noise_sd=cfg.noise_sd)


def _shared_instance(cfg: ExperimentConfig):
    rng = RngStream(cfg.instance_seed).child(0)
    if cfg.kind in ("game_selfplay", "game_bestresponse"):
        opponent = "self_play" if cfg.kind == "game_selfplay" else "best_response"
        return generate_instance("game", (cfg.m, cfg.A), (cfg.prior_mean, cfg.prior_sd),
                                 cfg.C, rng, noise_sd=cfg.noise_sd, opponent=opponent)
    if cfg.kind == "constrained":
        return generate_instance("constrained", (cfg.m, cfg.A),
                                 (cfg.prior_mean, cfg.prior_sd), cfg.C, rng,
                                 noise_sd=cfg.noise_sd)
    if cfg.kind == "counterexample":
        return make_game_env(counterexample_payoff(cfg.counterexample_r),
                             noise_sd=cfg.noise_sd, opponent="best_response")
    raise ValueError(cfg.kind)


def _run_bandit_single(cfg: ExperimentConfig, agent_name: str, seed: int):
    spec = _make_agent_spec(agent_name, cfg)
    env = _bandit_env_for_seed(cfg, seed)
    base = RngStream(seed)
    rng_act, rng_noise, rng_audit = base.child(1), base.child(2), base.child(3)
    state = init_bandit_state(spec, cfg.A, cfg.prior_mean, cfg.prior_sd**2, cfg.noise_sd**2)
    T = cfg.horizon
    audit_at = _audit_times(cfg.audit_schedule, T)
    t_arr = np.arange(1, T + 1)
    actions = np.zeros(T, dtype=int)
    rewards = np.zeros(T)
    regrets = np.zeros(T)
    flags = np.zeros(T, dtype=bool)
    audits = []
    for t in range(1, T + 1):
        pol = act(spec, state, rng_act)
        flags[t - 1] = not state.cache.get("last_converged", True)
        a = rng_act.choice(cfg.A, p=pol.probs)
        r = step_bandit(env, a, rng_noise)
        actions[t - 1] = a
        rewards[t - 1] = r
        regrets[t - 1] = bandit_regret(env, a)
        if agent_name == "vbos" and t in audit_at:
            member, margin, se = in_optimistic_set(
                state.posteriors, pol, rng_audit,
                replace(cfg.solver, mc_samples=cfg.audit_mc_samples))
            audits.append(AuditRow(cfg.name, agent_name, seed, t, member, margin, se))
        played = (pol, a) if agent_name == "exp3" else a
        state = observe(spec, state, played, r)
    tr = Transcript(agent=agent_name, seed=seed, t=t_arr, action=actions, reward=rewards,
                    regret=regrets, cum_regret=np.cumsum(regrets), solver_flags=flags,
                    metadata={"mu": env.mu.tolist(), "ucb_delta": spec.ucb_delta})
    return tr, audits


def _saddle_agent_state(cfg: ExperimentConfig, spec: AgentSpec, env):
    if cfg.kind == "counterexample":
        prob = counterexample_problem()
        return init_saddle_state(spec, prob.posteriors, prob.dual_set)
    if cfg.kind == "constrained":
        matrix = PosteriorMatrix.iid(cfg.m, cfg.A, cfg.prior_mean, cfg.prior_sd**2,
                                     cfg.noise_sd**2)
        return init_saddle_state(spec, matrix, ConstrainedBandit(cfg.m, cfg.C))
    matrix = PosteriorMatrix.iid(cfg.m, cfg.A, cfg.prior_mean, cfg.prior_sd**2,
                                 cfg.noise_sd**2)
    return init_saddle_state(spec, matrix, Simplex(cfg.m))


def _membership_audit(cfg, agent_name, seed, t, state, pol, rng_audit, audits):
    problem = SaddleProblem(state.matrix, state.dual_set)
    ev = expected_value_mc(problem, rng_audit, cfg.audit_value_samples)
    member, margin, se = in_saddle_optimistic_set(problem, pol, rng_audit, cfg.solver, ev=ev)
    audits.append(AuditRow(cfg.name, agent_name, seed, t, member, margin, se))


def _run_game_single(cfg: ExperimentConfig, agent_name: str, seed: int, env: GameEnv):
    spec = _make_agent_spec(agent_name, cfg)
    base = RngStream(seed)
    rng_act, rng_noise, rng_audit = base.child(1), base.child(2), base.child(3)
    rng_opp = base.child(4)
    state = _saddle_agent_state(cfg, spec, env)
    self_play = env.opponent == "self_play"
    if self_play:
        opp_env_matrix = PosteriorMatrix.iid(cfg.A, cfg.m, cfg.prior_mean,
                                             cfg.prior_sd**2, cfg.noise_sd**2)
        opp_state = init_saddle_state(spec, opp_env_matrix, Simplex(cfg.A))
    T = cfg.horizon
    audit_at = _audit_times(cfg.audit_schedule, T)
    t_arr = np.arange(1, T + 1)
    actions = np.zeros(T, dtype=int)
    rewards = np.zeros(T)
    regrets = np.zeros(T)
    flags = np.zeros(T, dtype=bool)
    audits = []
    audited_kinds = ("saddle_vbos", "saddle_ts")
    for t in range(1, T + 1):
        pol = act(spec, state, rng_act)
        flags[t - 1] = not state.cache.get("last_converged", True)
        if self_play:
            opp_pol = act(spec, opp_state, rng_opp)
            i, j, r = step_game(env, pol, rng_noise, opponent_policy=opp_pol)
            regrets[t - 1] = game_regret(env, pol, opp_pol)
        else:
            i, j, r = step_game(env, pol, rng_noise)
            regrets[t - 1] = game_regret(env, pol, i)
        actions[t - 1] = j
        rewards[t - 1] = r
        if agent_name in audited_kinds and t in audit_at and state.matrix is not None:
            _membership_audit(cfg, agent_name, seed, t, state, pol, rng_audit, audits)
        played = pol if agent_name == "exp3" else None
        state = observe(spec, state, played, (i, j, r))
        if self_play:
            opp_state = observe(spec, opp_state, opp_pol if agent_name == "exp3" else None,
                                (j, i, -r))
    tr = Transcript(agent=agent_name, seed=seed, t=t_arr, action=actions, reward=rewards,
                    regret=regrets, cum_regret=np.cumsum(regrets), solver_flags=flags,
                    metadata={"game_value": env.value})
    return tr, audits


def _run_constrained_single(cfg: ExperimentConfig, agent_name: str, seed: int,
                            env: ConstrainedEnv):
    spec = _make_agent_spec(agent_name, cfg)
    base = RngStream(seed)
    rng_act, rng_noise, rng_audit = base.child(1), base.child(2), base.child(3)
    state = _saddle_agent_state(cfg, spec, env)
    T = cfg.horizon
    audit_at = _audit_times(cfg.audit_schedule, T)
    t_arr = np.arange(1, T + 1)
    actions = np.zeros(T, dtype=int)
    rewards = np.zeros(T)
    regrets = np.zeros(T)
    violations = np.zeros(T)
    flags = np.zeros(T, dtype=bool)
    audits = []
    for t in range(1, T + 1):
        pol = act(spec, state, rng_act)
        flags[t - 1] = not state.cache.get("last_converged", True)
        j, obs = step_constrained(env, pol, rng_noise)
        regret, violation = constrained_regret(env, pol)
        actions[t - 1] = j
        rewards[t - 1] = float(obs[0])
        regrets[t - 1] = regret
        violations[t - 1] = violation
        if agent_name in ("saddle_vbos", "saddle_ts") and t in audit_at:
            _membership_audit(cfg, agent_name, seed, t, state, pol, rng_audit, audits)
        state = observe(spec, state, None, (j, obs))
    tr = Transcript(agent=agent_name, seed=seed, t=t_arr, action=actions, reward=rewards,
                    regret=regrets, cum_regret=np.cumsum(regrets), violation=violations,
                    solver_flags=flags,
                    metadata={"lp_value": env.value,
                              "lam_star_norm": float(np.linalg.norm(env.lam_star))})
    return tr, audits


def _run_task(args):
    cfg_dict, agent_name, seed = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    if cfg.kind == "bandit":
        return agent_name, seed, _run_bandit_single(cfg, agent_name, seed)
    env = _shared_instance(cfg)
    if cfg.kind == "constrained":
        return agent_name, seed, _run_constrained_single(cfg, agent_name, seed, env)
    return agent_name, seed, _run_game_single(cfg, agent_name, seed, env)


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Run the full (agent, seed) grid of one experiment.

    Tasks are independent; OPTBANDITS_THREADS > 1 fans them out over
    processes.  Results are assembled in a fixed order so outputs are
    byte-identical regardless of parallelism.
    """
    if cfg.kind == "simplex_snapshot":
        return _run_snapshot(cfg)
    tasks = [(cfg.to_dict(), agent, seed) for agent in cfg.agents for seed in cfg.seeds]
    workers = int(os.environ.get("OPTBANDITS_THREADS", "1"))
    results = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for agent, seed, payload in pool.map(_run_task, tasks):
                results[(agent, seed)] = payload
    else:
        for task in tasks:
            agent, seed, payload = _run_task(task)
            results[(agent, seed)] = payload
    transcripts = {}
    audits = []
    for agent in cfg.agents:
        for seed in cfg.seeds:
            tr, aud = results[(agent, seed)]
            transcripts[(agent, seed)] = tr
            audits.extend(aud)
    summaries = summarize(cfg, transcripts)
    return RunResult(config=cfg, transcripts=transcripts, audits=audits, summaries=summaries)


def summarize(cfg: ExperimentConfig, transcripts) -> list:
    """Across-seed mean cumulative regret with standard errors per timestep."""
    rows = []
    n = len(cfg.seeds)
    for agent in cfg.agents:
        cum = np.stack([transcripts[(agent, s)].cum_regret for s in cfg.seeds])
        viol = None
        if transcripts[(agent, cfg.seeds[0])].violation is not None:
            viol = np.stack([transcripts[(agent, s)].violation for s in cfg.seeds])
        mean = cum.mean(axis=0)
        stderr = cum.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
        for t in range(1, cfg.horizon + 1):
            rows.append(SummaryRow(
                experiment=cfg.name, agent=agent, seed=n, t=t,
                mean_cumulative_regret=float(mean[t - 1]),
                stderr=float(stderr[t - 1]),
                constraint_violation=float(viol[:, t - 1].mean()) if viol is not None else None,
                theory_bound=theory_bound(cfg.kind, cfg.A, cfg.m, cfg.C, t),
            ))
    return rows


# ---------------------------------------------------------------------------
# simplex snapshots
# ---------------------------------------------------------------------------


def _barycentric_grid(spacing: float):
    n = int(round(1.0 / spacing))
    pts = []
    for i in range(n + 1):
        for j in range(n + 1 - i):
            k = n - i - j
            pts.append((i / n, j / n, k / n))
    return np.array(pts)


@dataclass
class Snapshot:
    t: int
    grid: np.ndarray  # (n, 3) barycentric points
    g_values: np.ndarray
    member: np.ndarray
    ts_point: np.ndarray
    vbos_point: np.ndarray
    estimate: float
    std_error: float


def _run_snapshot(cfg: ExperimentConfig) -> RunResult:
    seed = cfg.seeds[0]
    base = RngStream(seed)
    rng_act, rng_noise, rng_mc = base.child(1), base.child(2), base.child(3)
    follow = _make_agent_spec(cfg.snapshot_follow, cfg)
    snapshots = []
    if cfg.m == 1:
        if cfg.A != 3:
            raise ValueError("simplex snapshots need exactly three actions")
        env = _bandit_env_for_seed(cfg, cfg.instance_seed)
        state = init_bandit_state(follow, cfg.A, cfg.prior_mean, cfg.prior_sd**2,
                                  cfg.noise_sd**2)
        for t in range(1, max(cfg.snapshot_times) + 1):
            if t in cfg.snapshot_times:
                snapshots.append(_bandit_snapshot(cfg, t, state, rng_mc))
            pol = act(follow, state, rng_act)
            a = rng_act.choice(cfg.A, p=pol.probs)
            r = step_bandit(env, a, rng_noise)
            played = (pol, a) if cfg.snapshot_follow == "exp3" else a
            state = observe(follow, state, played, r)
    else:
        if cfg.A != 3:
            raise ValueError("simplex snapshots need exactly three actions")
        env = _shared_instance(replace(cfg, kind="game_bestresponse"))
        state = _saddle_agent_state(replace(cfg, kind="game_bestresponse"), follow, env)
        for t in range(1, max(cfg.snapshot_times) + 1):
            if t in cfg.snapshot_times:
                snapshots.append(_game_snapshot(cfg, t, state, rng_mc))
            pol = act(follow, state, rng_act)
            i, j, r = step_game(env, pol, rng_noise)
            state = observe(follow, state, None, (i, j, r))
    return RunResult(config=cfg, transcripts={}, audits=[], summaries=[], snapshots=snapshots)


def _bandit_snapshot(cfg, t, state, rng_mc) -> Snapshot:
    posts = state.posteriors
    grid = _barycentric_grid(cfg.grid_spacing)
    est, se = expected_max_mc(posts, rng_mc, max(cfg.audit_mc_samples, 100000))
    values = np.array([optimism_map(posts, Policy.from_array(p)).value for p in grid])
    member = values >= est - 3.0 * se
    ts_pt = ts_policy_mc(posts, rng_mc, 100000).probs
    vbos_pt = vbos_policy(posts, cfg.solver).policy.probs
    return Snapshot(t=t, grid=grid, g_values=values, member=member,
                    ts_point=ts_pt, vbos_point=vbos_pt, estimate=est, std_error=se)


def _game_snapshot(cfg, t, state, rng_mc) -> Snapshot:
    problem = SaddleProblem(state.matrix, state.dual_set)
    grid = _barycentric_grid(cfg.grid_spacing)
    est, se = expected_value_mc(problem, rng_mc, max(cfg.audit_value_samples, 1000))
    values = np.empty(len(grid))
    lam0 = None
    for idx, p in enumerate(grid):
        res = saddle_optimism_map(problem, Policy.from_array(p), cfg.solver, lam0=lam0)
        values[idx] = res.value
        lam0 = res.lam
    member = values >= est - 3.0 * se
    # empirical saddle TS frequency over sampled-game solves
    counts = np.zeros(3)
    for _ in range(2000):
        payoff = state.matrix.sample_matrix(rng_mc)
        from .saddle import game_value_exact

        counts += game_value_exact(payoff, state.dual_set).pi.probs
    ts_pt = counts / counts.sum()
    vbos_pt = saddle_vbos(problem, cfg.solver).pi.probs
    return Snapshot(t=t, grid=grid, g_values=values, member=member,
                    ts_point=ts_pt, vbos_point=vbos_pt, estimate=est, std_error=se)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _atomic_write(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_outputs(result: RunResult, out_dir: str):
    """Serialize one run: resolved config, transcripts, summary, audits,
    snapshots.  Atomic per-file writes; LF line endings; fixed column order."""
    cfg = result.config
    os.makedirs(out_dir, exist_ok=True)
    _atomic_write(os.path.join(out_dir, f"{cfg.name}__config.yaml"),
                  yaml.safe_dump(cfg.to_dict(), sort_keys=True))

    has_violation = cfg.kind == "constrained"
    for agent in cfg.agents:
        header = "seed,t,action,reward,regret,cum_regret"
        header += ",violation" if has_violation else ""
        lines = [header + ",solver_flag"]
        for seed in cfg.seeds:
            tr = result.transcripts.get((agent, seed))
            if tr is None:
                continue
            for k in range(tr.t.size):
                row = [_fmt(seed), _fmt(tr.t[k]), _fmt(tr.action[k]), _fmt(tr.reward[k]),
                       _fmt(tr.regret[k]), _fmt(tr.cum_regret[k])]
                if has_violation:
                    row.append(_fmt(tr.violation[k]))
                row.append(_fmt(tr.solver_flags[k] if tr.solver_flags is not None else False))
                lines.append(",".join(row))
        _atomic_write(os.path.join(out_dir, f"{cfg.name}__{agent}__transcript.csv"),
                      "\n".join(lines) + "\n")

    lines = ["experiment,agent,seed,t,mean_cumulative_regret,stderr,constraint_violation,theory_bound"]
    for row in result.summaries:
        lines.append(",".join([
            row.experiment, row.agent, _fmt(row.seed), _fmt(row.t),
            _fmt(row.mean_cumulative_regret), _fmt(row.stderr),
            _fmt(row.constraint_violation), _fmt(row.theory_bound),
        ]))
    _atomic_write(os.path.join(out_dir, f"{cfg.name}__summary.csv"), "\n".join(lines) + "\n")

    if result.audits:
        lines = ["experiment,agent,seed,t,member,margin,std_error"]
        for a in result.audits:
            lines.append(",".join([a.experiment, a.agent, _fmt(a.seed), _fmt(a.t),
                                   _fmt(a.member), _fmt(a.margin), _fmt(a.std_error)]))
        _atomic_write(os.path.join(out_dir, f"{cfg.name}__membership.csv"),
                      "\n".join(lines) + "\n")

    for snap in result.snapshots:
        lines = ["kind,p1,p2,p3,g_value,member"]
        for k in range(len(snap.grid)):
            lines.append(",".join([
                "grid", _fmt(snap.grid[k, 0]), _fmt(snap.grid[k, 1]), _fmt(snap.grid[k, 2]),
                _fmt(snap.g_values[k]), _fmt(snap.member[k]),
            ]))
        lines.append(",".join(["ts", _fmt(snap.ts_point[0]), _fmt(snap.ts_point[1]),
                               _fmt(snap.ts_point[2]), "", ""]))
        lines.append(",".join(["vbos", _fmt(snap.vbos_point[0]), _fmt(snap.vbos_point[1]),
                               _fmt(snap.vbos_point[2]), "", ""]))
        _atomic_write(os.path.join(out_dir, f"{cfg.name}__snapshot_t{snap.t}.csv"),
                      "\n".join(lines) + "\n")


def emit_plots(out_dir: str, svg: bool = False):
    """Condense summary files into per-figure plot-data CSVs (and SVGs).

    For every ``*__summary.csv`` in the directory this writes a
    ``*__regret_plot.csv`` with one block of columns per agent
    (mean, mean-stderr, mean+stderr) and, for constrained runs, a
    ``*__violation_plot.csv``.
    """
    import csv

    summaries = sorted(f for f in os.listdir(out_dir) if f.endswith("__summary.csv"))
    if not summaries:
        raise FileNotFoundError(f"no summary files in {out_dir}")
    written = []
    for fname in summaries:
        path = os.path.join(out_dir, fname)
        per_agent = {}
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                per_agent.setdefault(row["agent"], []).append(row)
        agents = sorted(per_agent)
        T = max(int(r["t"]) for rows in per_agent.values() for r in rows)
        header = ["t"]
        for a in agents:
            header += [f"{a}_mean", f"{a}_lo", f"{a}_hi"]
        header.append("theory_bound")
        lines = [",".join(header)]
        viol_lines = None
        if any(r["constraint_violation"] for rows in per_agent.values() for r in rows):
            viol_lines = [",".join(["t"] + [f"{a}_violation" for a in agents])]
        by_t = {a: {int(r["t"]): r for r in rows} for a, rows in per_agent.items()}
        for t in range(1, T + 1):
            cells = [str(t)]
            for a in agents:
                r = by_t[a][t]
                mean = float(r["mean_cumulative_regret"])
                se = float(r["stderr"])
                cells += [repr(mean), repr(mean - se), repr(mean + se)]
            cells.append(by_t[agents[0]][t]["theory_bound"])
            lines.append(",".join(cells))
            if viol_lines is not None:
                viol_lines.append(",".join(
                    [str(t)] + [by_t[a][t]["constraint_violation"] or "" for a in agents]))
        stem = fname[: -len("__summary.csv")]
        plot_path = os.path.join(out_dir, f"{stem}__regret_plot.csv")
        _atomic_write(plot_path, "\n".join(lines) + "\n")
        written.append(plot_path)
        if viol_lines is not None:
            vpath = os.path.join(out_dir, f"{stem}__violation_plot.csv")
            _atomic_write(vpath, "\n".join(viol_lines) + "\n")
            written.append(vpath)
        if svg:
            written.append(_plot_svg(out_dir, stem, agents, by_t, T))
    return written


def _plot_svg(out_dir, stem, agents, by_t, T):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ts = np.arange(1, T + 1)
    for a in agents:
        mean = np.array([float(by_t[a][t]["mean_cumulative_regret"]) for t in ts])
        se = np.array([float(by_t[a][t]["stderr"]) for t in ts])
        ax.plot(ts, mean, label=a)
        ax.fill_between(ts, mean - se, mean + se, alpha=0.2)
    ax.set_xlabel("round")
    ax.set_ylabel("cumulative regret")
    ax.legend()
    ax.set_title(stem)
    path = os.path.join(out_dir, f"{stem}__regret.svg")
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path
