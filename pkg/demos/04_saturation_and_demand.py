"""Welfare against the number of RBs and against demand.

Per-operator welfare rises until every child can have its own RB and then
stays flat. Raising demand on a fixed pool forces sharing and lowers the
median welfare.
"""

from spectrum_sharing.config import NetworkConfig
from spectrum_sharing.harness import ExperimentSpec, run_experiment, saturation_curve

spec = ExperimentSpec(NetworkConfig(K=2, L=8, c=(4, 4), b=2), trials=10, iterations=600)
curve = saturation_curve(spec, [5, 6, 7, 8, 9, 10])
for L, v in zip(curve.L, curve.per_op):
    print(f"L={L:2d}  per-OP welfare {v:8.3f} bits")
print("saturation flagged at L =", curve.saturation_L)

ladder = ExperimentSpec(NetworkConfig(K=3, L=6, c=(2, 2, 2), b=3), kind="demand-sweep",
                        sweep=((2, 2, 2), (4, 4, 4), (6, 6, 6)), trials=10, iterations=500)
for r in run_experiment(ladder):
    print(f"{r.experiment_id:12s} median {r.median:8.3f} bits")
