"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed again in the pytest summary
under "acceptance criteria".
"""

import time

import numpy as np
import pytest

from spectrum_sharing.analytic_rate import PowerPmf, RateProvider, expected_rate_conditional
from spectrum_sharing.cli import main
from spectrum_sharing.config import DEFAULT_INTENSITY, NetworkConfig
from spectrum_sharing.harness import ExperimentSpec, cochannel_pairs, run_ensemble, saturation_curve
from spectrum_sharing.matching import (
    apply_swap, brute_force_optimum, candidate_swaps, greedy_swap, is_beneficial_swap,
    is_pairwise_stable, mcmc_swap, random_matching, social_welfare,
)
from spectrum_sharing.qlearning import (
    QTable, bellman_operator, random_mdp, run_mdp, value_iteration_oracle,
)
from spectrum_sharing.units import dbm_to_watts
from spectrum_sharing.verify import monte_carlo_rate, random_instance


def test_c01_greedy_fixed_points_are_stable(acceptance_report):
    rng = np.random.default_rng(20240101)
    t0 = time.perf_counter()
    bad = []
    for i in range(1000):
        cfg = random_instance(rng, max_K=3, max_L=4, max_c=2, max_b=2)
        rates = RateProvider(cfg)
        res = greedy_swap(random_matching(cfg, rng), rates, cfg, max_iters=20_000, seed=rng)
        stable, witness = is_pairwise_stable(res.matching, rates)
        if not (res.converged and stable):
            bad.append((i, res.matching.assignment, witness))
    dt = time.perf_counter() - t0
    ok = acceptance_report(1, "greedy fixed points stable", not bad and dt < 60,
                           f"{1000 - len(bad)}/1000 stable in {dt:.1f}s (target < 60s)")
    assert ok, bad[:5]


def test_c02_beneficial_swaps_raise_potential(acceptance_report):
    rng = np.random.default_rng(20240102)
    checked, bad = 0, []
    for i in range(200):
        cfg = random_instance(rng)
        rates = RateProvider(cfg)
        m = random_matching(cfg, rng)
        phi = social_welfare(m, rates).potential
        for a, b in candidate_swaps(m):
            if is_beneficial_swap(m, a, b, rates):
                checked += 1
                if not social_welfare(apply_swap(m, a, b), rates).potential - phi > 0:
                    bad.append((i, a, b))
    ok = acceptance_report(2, "beneficial swap => phi increases", not bad and checked > 0,
                           f"{checked} beneficial swaps over 200 instances, {len(bad)} violations")
    assert ok, bad[:5]


def test_c03_phi_and_welfare_maximizers_coincide(acceptance_report):
    rng = np.random.default_rng(20240103)
    compared, bad = 0, []
    for i in range(100):
        cfg = random_instance(rng)
        rates = RateProvider(cfg)
        try:
            _, by_phi = brute_force_optimum(cfg, rates, "potential", distinct_siblings=True)
        except ValueError:  # no matching keeps every sibling apart
            continue
        _, by_s = brute_force_optimum(cfg, rates, "welfare", distinct_siblings=True)
        compared += 1
        if {m.assignment for m in by_phi} != {m.assignment for m in by_s}:
            bad.append(i)
    ok = acceptance_report(3, "argmax phi == argmax S", not bad and compared > 0,
                           f"{compared} enumerated instances, {len(bad)} set mismatches")
    assert ok


def test_c04_quadrature_matches_monte_carlo(acceptance_report):
    cfg = NetworkConfig()
    p = float(dbm_to_watts(10.0))
    pmf = PowerPmf.degenerate(1, 2, p)
    t0 = time.perf_counter()
    gaps = {}
    for mult in (1, 2, 3):
        lam = mult * DEFAULT_INTENSITY
        quad = expected_rate_conditional(lam, p, pmf, 10.0, cfg)
        mc = monte_carlo_rate(lam, 10.0, 100_000, seed=400 + mult, p_f=p, p_int=p)
        gaps[mult] = abs(quad - mc) / mc
    dt = time.perf_counter() - t0
    worst = max(gaps.values())
    ok = acceptance_report(4, "quadrature vs Monte Carlo", worst < 0.03 and dt < 120,
                           ", ".join(f"{m}x: {g:.2%}" for m, g in gaps.items())
                           + f" (tol 3%, {dt:.1f}s)")
    assert ok


def test_c05_mcmc_finds_optimum(acceptance_report):
    cfg = NetworkConfig(K=3, L=3, c=(1, 1, 1), b=(1, 1, 1), T_b=100.0)
    rates = RateProvider(cfg)
    best, _ = brute_force_optimum(cfg, rates)
    hits = 0
    for seed in range(100):
        res = mcmc_swap(random_matching(cfg, 5000 + seed), rates, cfg, 2000, seed=seed)
        hits += abs(res.welfare - best) <= 1e-9 * abs(best)
    ok = acceptance_report(5, "MCMC reaches enumerated optimum", hits >= 99, f"{hits}/100 runs")
    assert ok


def _flat(values):
    return (max(values) - min(values)) / min(values)


def test_c06_saturation(acceptance_report):
    s2 = ExperimentSpec(NetworkConfig(K=2, L=4, c=(2, 2), b=2), trials=50, iterations=500)
    c2 = saturation_curve(s2, [4, 5, 6, 7, 8])
    s3 = ExperimentSpec(NetworkConfig(K=3, L=6, c=(2, 2, 2), b=3), trials=50, iterations=500)
    c3 = saturation_curve(s3, [6, 7, 8, 9])
    f2, f3 = _flat(c2.per_op), _flat(c3.per_op)
    ok = acceptance_report(6, "per-OP welfare saturates", f2 < 0.01 and f3 < 0.01,
                           f"c=[2,2] spread {f2:.2e} over L=4..8, "
                           f"c=[2,2,2] spread {f3:.2e} over L=6..9 (tol 1%)")
    assert ok


def test_c07_power_mode_ordering(acceptance_report):
    cfg = NetworkConfig(K=2, L=4, c=(2, 2), b=2)
    res = {mode: run_ensemble(ExperimentSpec(cfg, trials=50, iterations=500, power_mode=mode,
                                             base_seed=700))
           for mode in ("full", "q-learning", "uniform")}
    full, ql, uni = (np.asarray(res[m].samples) for m in ("full", "q-learning", "uniform"))
    diff = ql - uni
    se = diff.std(ddof=1) / np.sqrt(len(diff))
    ok = full.mean() >= ql.mean() and ql.mean() >= uni.mean() - se
    acceptance_report(7, "full >= q-learning >= uniform - SE", ok,
                      f"means {full.mean():.3f} / {ql.mean():.3f} / {uni.mean():.3f} bits, SE {se:.3f}")
    assert ok


def test_c08_demand_monotonicity(acceptance_report):
    medians, pairs = [], None
    for c in ((2, 2, 2), (4, 4, 4), (6, 6, 6)):
        r = run_ensemble(ExperimentSpec(NetworkConfig(K=3, L=6, c=c, b=3), trials=50,
                                        iterations=500, base_seed=800))
        medians.append(r.median)
        if c == (2, 2, 2):
            pairs = sum(cochannel_pairs(t.matching) for t in r.trials)
    ok = medians[0] >= medians[1] >= medians[2] and pairs == 0
    acceptance_report(8, "demand ladder medians nonincreasing", ok,
                      f"medians {[round(m, 3) for m in medians]}, co-channel pairs at c=[2,2,2]: {pairs}")
    assert ok


GAMMA_CONVERGENCE = 0.1


def test_c09_qlearning_convergence_and_contraction(acceptance_report):
    errs = []
    for i in range(10):
        P, W = random_mdp(3, 4, np.random.default_rng(900 + i))
        q = QTable.zeros(3, 4, gamma=GAMMA_CONVERGENCE, epsilon=0.2, beta="visits")
        run_mdp(P, W, q, 100_000, seed=950 + i)
        errs.append(float(np.max(np.abs(q.values - value_iteration_oracle(P, W, GAMMA_CONVERGENCE)))))
    rng = np.random.default_rng(990)
    contracts = 0
    for _ in range(100):
        P, W = random_mdp(3, 4, rng)
        Q1, Q2 = rng.normal(size=(2, 3, 4)) * 10
        lhs = np.max(np.abs(bellman_operator(Q1, P, W, 0.95) - bellman_operator(Q2, P, W, 0.95)))
        contracts += lhs <= 0.95 * np.max(np.abs(Q1 - Q2))
    within = sum(e < 1e-3 for e in errs)
    ok = within == 10 and contracts == 100
    acceptance_report(9, "Q-learning -> value iteration; contraction", ok,
                      f"{within}/10 MDPs within 1e-3 (max gap {max(errs):.2e}, gamma={GAMMA_CONVERGENCE}), "
                      f"{contracts}/100 pairs contract")
    assert ok, errs


def test_c10_cli_output_is_byte_identical(acceptance_report, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("network.K: 2\nnetwork.L: 4\nnetwork.c: [2, 2]\nnetwork.b: 2\n"
                   "experiment.trials: 4\nexperiment.iterations: 80\n"
                   "experiment.power_mode: q-learning\n")
    outs = []
    for name in ("a", "b"):
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / name), "--seed", "17"]) == 0
        outs.append((tmp_path / name / "results.csv").read_bytes())
    ok = acceptance_report(10, "CLI CSV byte-identical", outs[0] == outs[1],
                           f"{len(outs[0])} bytes, identical={outs[0] == outs[1]}")
    assert ok
