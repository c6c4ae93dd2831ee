"""Walk through the optimism map on a three-armed Gaussian bandit.

The optimism map assigns a policy the sum of posterior means plus
inverse-rate exploration bonuses evaluated at -log pi_i.  Its maximizer is
the sampling policy; Thompson sampling's probability-of-optimality vector
lands inside the same optimistic set.  This script evaluates the map,
maximizes it, and checks the sandwich

    E max_i mu_i  <=  G(TS policy)  <=  G(VBOS policy).
"""

import numpy as np

from optbandits import (
    GaussianPosterior,
    Policy,
    RngStream,
    entropy,
    expected_max_mc,
    in_optimistic_set,
    klearning_policy,
    optimism_map,
    ts_policy_mc,
    update,
    vbos_policy,
)

# Three arms with different amounts of data: arm 0 looks good but is well
# explored, arm 2 is untouched.
posts = [GaussianPosterior(0.0, 1.0, 1.0) for _ in range(3)]
for reward in (1.2, 0.8, 1.0, 0.9):
    posts[0] = update(posts[0], reward)
posts[1] = update(posts[1], 0.4)

print("posterior means:", [round(p.posterior_mean, 3) for p in posts])
print("posterior vars: ", [round(p.posterior_var, 3) for p in posts])

uniform = Policy(np.full(3, 1.0 / 3.0))
ev = optimism_map(posts, uniform)
print(f"\nG(uniform) = {ev.value:.4f}  (exploit {ev.exploit:.4f} + explore {ev.explore:.4f})")

res = vbos_policy(posts)
print(f"VBOS policy  {np.round(res.policy.probs, 4)}  value {res.value:.4f} "
      f"(entropy {entropy(res.policy):.3f})")

kl = klearning_policy(posts)
print(f"K-learning   {np.round(kl.policy.probs, 4)}  temperature {kl.tau:.4f}")

rng = RngStream(0)
ts = ts_policy_mc(posts, rng.child(0), 200_000)
print(f"TS (MC)      {np.round(ts.probs, 4)}")

emax, se = expected_max_mc(posts, rng.child(1), 200_000)
print(f"\nE max mu    = {emax:.4f} +- {se:.4f}")
print(f"G(TS)       = {optimism_map(posts, ts).value:.4f}")
print(f"G(VBOS)     = {res.value:.4f}   (largest, by construction)")

for name, pol in (("uniform", uniform), ("TS", ts), ("VBOS", res.policy),
                  ("greedy", Policy(np.array([1.0, 0.0, 0.0])))):
    member, margin, _ = in_optimistic_set(posts, pol, rng.child(2, hash(name) % 100))
    print(f"optimistic set: {name:8s} member={member}  margin={margin:+.4f}")
