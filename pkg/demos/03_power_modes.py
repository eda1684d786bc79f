"""Full, uniform and learned power.

Runs paired trials under each power mode. In the learning mode every
accepted swap triggers a Q-learning epoch on a sampled deployment and the
learned power pmfs re-weight the expected rates.
"""

from spectrum_sharing.config import NetworkConfig
from spectrum_sharing.harness import ExperimentSpec, run_ensemble

cfg = NetworkConfig(K=2, L=4, c=(2, 2), b=2)
for mode in ("full", "q-learning", "uniform"):
    r = run_ensemble(ExperimentSpec(cfg, trials=8, iterations=300, power_mode=mode))
    print(f"{mode:10s} mean {r.mean:8.3f} bits  (se {r.stderr:.3f}, {r.wall_time:.1f}s)")
    if mode == "q-learning":
        pmf = r.trials[0].pmfs[0]
        print("           learned pmf of operator 0:", pmf.probs.round(3).tolist())
