"""Five algorithms on a random zero-sum game against a best-response foe.

A small random matrix game is drawn from the standard-normal prior; each
agent learns the payoff from noisy bandit feedback while the opponent
always plays the row minimizing the agent's expected payoff.  Exploitable
policies (like acting on a single posterior sample) get punished.
"""

import numpy as np

from optbandits import Simplex, game_value_exact
from optbandits.harness import ExperimentConfig, run_experiment
from optbandits.optimism import SolverConfig

cfg = ExperimentConfig(
    kind="game_bestresponse",
    A=6, m=6,
    horizon=400,
    seeds=(0, 1, 2, 3),
    solver=SolverConfig(tolerance=1e-6, max_iters=2000),
    audit_value_samples=100,
)
res = run_experiment(cfg)

from optbandits.harness import _shared_instance  # the run's environment

env = _shared_instance(cfg)
print(f"game value V* = {env.value:+.4f} "
      f"(Nash column mix {np.round(game_value_exact(env.payoff, Simplex(cfg.m)).pi.probs, 3)})")

print(f"\nmean cumulative regret over {len(cfg.seeds)} seeds at T={cfg.horizon}:")
for agent in cfg.agents:
    finals = [res.transcripts[(agent, s)].cum_regret[-1] for s in cfg.seeds]
    print(f"  {agent:18s} {np.mean(finals):8.1f}  (+- {np.std(finals) / len(finals) ** 0.5:.1f})")

audited = [a for a in res.audits if a.agent == "saddle_vbos"]
print(f"\nsaddle VBOS membership audits: {sum(a.member for a in audited)}/{len(audited)} inside")
