"""Expected rate on a shared resource block.

Compares the quadrature rate against a brute-force Monte Carlo average of
ln(1 + SINR), shows the integrand variant that does not match, and prints
how the per-child rate falls as more operators crowd one RB.
"""

from spectrum_sharing.analytic_rate import PowerPmf, RateProvider, expected_rate_conditional
from spectrum_sharing.config import DEFAULT_INTENSITY, NetworkConfig
from spectrum_sharing.units import dbm_to_watts
from spectrum_sharing.verify import monte_carlo_rate

p = float(dbm_to_watts(10.0))
pmf = PowerPmf.degenerate(1, 2, p)  # everyone at 10 dBm
derived = NetworkConfig()
printed = NetworkConfig(integrand="printed")

print("interferer intensity   quadrature   printed form   Monte Carlo (nats)")
for mult in (1, 2, 3):
    lam = mult * DEFAULT_INTENSITY
    q = expected_rate_conditional(lam, p, pmf, 10.0, derived)
    q_printed = expected_rate_conditional(lam, p, pmf, 10.0, printed)
    mc = monte_carlo_rate(lam, 10.0, 50_000, seed=mult, p_f=p, p_int=p)
    print(f"{mult} x lambda             {q:8.4f}     {q_printed:8.4f}      {mc:8.4f}")

# Per-child weighted rate against RB occupancy (8 SBSs per operator).
cfg = NetworkConfig(K=4, L=4, c=(1, 1, 1, 1))
rates = RateProvider(cfg, units="bits")
print("\nchildren on RB   child rate (bits/s/Hz)")
for n in range(1, 5):
    print(f"{n:>15}   {rates.child_rate(0, list(range(n))):8.3f}")
