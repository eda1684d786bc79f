"""Swap matching on a small instance.

Two operators want two RBs each from a pool of three. We enumerate every
matching, then let greedy and MCMC swap search find the best one and
check that the result admits no beneficial swap.
"""

from spectrum_sharing.analytic_rate import RateProvider
from spectrum_sharing.config import NetworkConfig
from spectrum_sharing.matching import (
    brute_force_optimum, count_matchings, greedy_swap, is_pairwise_stable, mcmc_swap,
    random_matching, social_welfare,
)
from spectrum_sharing.units import convert_rate

cfg = NetworkConfig(K=2, L=3, c=(2, 2), b=(2, 2, 2))
rates = RateProvider(cfg)
print(f"{count_matchings(cfg)} feasible matchings")

best, maximizers = brute_force_optimum(cfg, rates)
print(f"optimum {convert_rate(best, 'bits'):.3f} bits, attained by {len(maximizers)} "
      f"matchings, first {maximizers[0].assignment}")

start = random_matching(cfg, 1)
print(f"start {start.assignment}: {convert_rate(social_welfare(start, rates).welfare, 'bits'):.3f} bits")

g = greedy_swap(start, rates, cfg, max_iters=500, seed=1)
m = mcmc_swap(start, rates, cfg, max_iters=500, seed=1)
for name, res in (("greedy", g), ("mcmc", m)):
    stable, witness = is_pairwise_stable(res.matching, rates)
    print(f"{name:6s} -> {res.matching.assignment} "
          f"{convert_rate(res.welfare, 'bits'):.3f} bits, accepted {res.accepted}, stable {stable}")

# With three RBs and four children some RB must be shared; siblings never are.
rep = social_welfare(g.matching, rates)
print("indicators", rep.indicators, "parent rates (bits)",
      [round(float(convert_rate(r, "bits")), 3) for r in rep.parent_rates])
