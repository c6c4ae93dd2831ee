"""The 2x2 game where Thompson sampling earns linear regret.

The payoff is [[r, 0], [0, -1]] with r = +1 or -1, equally likely, and the
opponent best-responds to the agent's policy.  The uncertain entry is never
revealed, so TS keeps alternating between the two sampled-game optima
[1, 0] and [1/2, 1/2]; the second loses half a unit per round against the
best response.  The optimism-map maximizer settles on [1, 0] and loses
nothing.
"""

import numpy as np

from optbandits import (
    Policy,
    RngStream,
    SolverConfig,
    counterexample_problem,
    expected_value_mc,
    in_saddle_optimistic_set,
    saddle_optimism_map,
    saddle_vbos,
)
from optbandits.harness import default_config, run_experiment

prob = counterexample_problem()
rng = RngStream(0)

est, se = expected_value_mc(prob, rng.child(0), 4000)
print(f"E V* (MC)            = {est:+.4f} +- {se:.4f}   (exact: -1/4)")

half = Policy(np.array([0.5, 0.5]))
print(f"G([1/2, 1/2])        = {saddle_optimism_map(prob, half).value:+.6f}   (exact: -1/2)")
print(f"G([1, 0])            = {saddle_optimism_map(prob, Policy(np.array([1.0, 0.0]))).value:+.6f}")

sol = saddle_vbos(prob, SolverConfig(tolerance=1e-10))
print(f"optimism maximizer   = {np.round(sol.pi.probs, 9)}")

for name, pol in (("[1/2,1/2]", half), ("[1,0]", Policy(np.array([1.0, 0.0])))):
    member, margin, _ = in_saddle_optimistic_set(prob, pol, rng.child(1, hash(name) % 50))
    print(f"optimistic set: {name:10s} member={member}  margin={margin:+.3f}")

# Short head-to-head run against the best-response opponent (true r = +1).
cfg = default_config("counterexample")
cfg = cfg.__class__.from_dict({**cfg.to_dict(), "horizon": 300, "seeds": [0, 1, 2]})
res = run_experiment(cfg)
print("\ncumulative regret after", cfg.horizon, "rounds (3 seeds):")
for agent in cfg.agents:
    finals = [res.transcripts[(agent, s)].cum_regret[-1] for s in cfg.seeds]
    print(f"  {agent:12s} {np.mean(finals):10.2e}   (per-round {np.mean(finals) / cfg.horizon:.2e})")
