"""Self-check suites behind ``spectrum-sharing verify``.

Each suite returns a `SuiteResult`. ``mutate=True`` flips the sign inside
the MCMC acceptance probability, which the ``mcmc`` suite must catch.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .analytic_rate import PowerPmf, RateProvider, expected_rate_conditional
from .config import DEFAULT_INTENSITY, NetworkConfig
from .matching import (
    apply_swap, brute_force_optimum, candidate_swaps, enumerate_matchings, greedy_swap,
    is_beneficial_swap, is_pairwise_stable, mcmc_swap, random_matching, social_welfare,
)
from .qlearning import QTable, bellman_operator, random_mdp, run_mdp, value_iteration_oracle
from .units import dbm_to_watts


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def random_instance(rng, max_K: int = 3, max_L: int = 4, max_c: int = 2,
                    max_b: int = 2) -> NetworkConfig:
    """Random small feasible configuration (unit weights, full power)."""
    while True:
        K = int(rng.integers(1, max_K + 1))
        L = int(rng.integers(1, max_L + 1))
        c = tuple(int(x) for x in rng.integers(1, min(max_c, L) + 1, size=K))
        b = tuple(int(x) for x in rng.integers(1, max_b + 1, size=L))
        if sum(c) <= sum(b):
            return NetworkConfig(K=K, L=L, c=c, b=b)


def monte_carlo_rate(lambda_l: float, r_ff: float, n: int, seed, radius: float = 2000.0,
                     p_f: float = 1.0, p_int: float = 1.0, alpha: float = 4.0,
                     chunk: int = 5000) -> float:
    """Mean of ln(1 + SINR), noise dropped, interferers a PPP on a disc.

    Written straight from the SINR definition; shares no code with the
    quadrature it checks.
    """
    rng = np.random.default_rng(seed)
    mean_count = lambda_l * math.pi * radius**2
    total = 0.0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        counts = rng.poisson(mean_count, size=m)
        tot = int(counts.sum())
        d = radius * np.sqrt(rng.random(tot))
        rx = rng.exponential(size=tot) * p_int * d**-alpha
        owner = np.repeat(np.arange(m), counts)
        interference = np.bincount(owner, weights=rx, minlength=m)
        signal = rng.exponential(size=m) * p_f * r_ff**-alpha
        with np.errstate(divide="ignore"):
            total += float(np.log1p(signal / interference).sum())
        done += m
    return total / n


# ------------------------------------------------------------------ suites


def suite_stability(seed: int = 0, n: int = 100, **_) -> SuiteResult:
    rng = np.random.default_rng(seed)
    for i in range(n):
        cfg = random_instance(rng)
        rates = RateProvider(cfg)
        res = greedy_swap(random_matching(cfg, rng), rates, cfg, max_iters=5000, seed=rng)
        ok, witness = is_pairwise_stable(res.matching, rates)
        if not (res.converged and ok):
            return SuiteResult("stability", False,
                               f"instance {i}: {res.matching.assignment} witness {witness}")
    return SuiteResult("stability", True, f"{n} greedy fixed points stable")


def suite_lemma2(seed: int = 0, n: int = 50, **_) -> SuiteResult:
    rng = np.random.default_rng(seed)
    checked = 0
    for i in range(n):
        cfg = random_instance(rng)
        rates = RateProvider(cfg)
        m = random_matching(cfg, rng)
        phi = social_welfare(m, rates).potential
        for a, b in candidate_swaps(m):
            if is_beneficial_swap(m, a, b, rates):
                checked += 1
                new_phi = social_welfare(apply_swap(m, a, b), rates).potential
                if not new_phi > phi:
                    return SuiteResult("lemma2", False, f"instance {i}: swap {(a, b)} "
                                       f"phi {phi!r} -> {new_phi!r}")
    return SuiteResult("lemma2", True, f"{checked} beneficial swaps raise phi")


def suite_corollary1(seed: int = 0, n: int = 20, **_) -> SuiteResult:
    rng = np.random.default_rng(seed)
    for i in range(n):
        cfg = random_instance(rng)
        rates = RateProvider(cfg)
        try:
            _, by_phi = brute_force_optimum(cfg, rates, "potential", distinct_siblings=True)
        except ValueError:
            continue
        _, by_s = brute_force_optimum(cfg, rates, "welfare", distinct_siblings=True)
        if {m.assignment for m in by_phi} != {m.assignment for m in by_s}:
            return SuiteResult("corollary1", False, f"instance {i}: maximizer sets differ")
    return SuiteResult("corollary1", True, f"{n} instances: argmax phi == argmax S")


def suite_quadrature(seed: int = 0, n: int = 20_000, rtol: float = 0.03, **_) -> SuiteResult:
    cfg = NetworkConfig(n_levels=2, p_tot=float(dbm_to_watts(10.0)) * 2)
    p = float(dbm_to_watts(10.0))
    pmf = PowerPmf.degenerate(1, 2, p)
    worst = 0.0
    for mult in (1, 2, 3):
        lam = mult * DEFAULT_INTENSITY
        q = expected_rate_conditional(lam, p, pmf, 10.0, cfg)
        mc = monte_carlo_rate(lam, 10.0, n, seed + mult)
        worst = max(worst, abs(q - mc) / mc)
    return SuiteResult("quadrature", worst < rtol, f"worst relative gap {worst:.4f}")


def _flipped(delta, T_b):
    return float(expit(-T_b * delta))


def suite_mcmc(seed: int = 0, n: int = 20, mutate: bool = False, **_) -> SuiteResult:
    acc = _flipped if mutate else None
    kw = {} if acc is None else {"acceptance": acc}
    hits = 0
    cfg = NetworkConfig(K=3, L=3, c=(1, 1, 1), b=(1, 1, 1))
    rates = RateProvider(cfg)
    best, _ = brute_force_optimum(cfg, rates)
    for i in range(n):
        res = mcmc_swap(random_matching(cfg, seed + i), rates, cfg, 2000, seed + i, **kw)
        hits += abs(res.welfare - best) <= 1e-9 * best
    # the chain itself must settle on the optimum, not only record it
    cfg2 = NetworkConfig(K=2, L=2, c=(1, 1), b=(2, 2))
    rates2 = RateProvider(cfg2)
    best2, _ = brute_force_optimum(cfg2, rates2)
    settled = 0
    for i in range(n):
        res = mcmc_swap(random_matching(cfg2, seed + i), rates2, cfg2, 200, seed + i, **kw)
        settled += abs(res.trace[-1] - best2) <= 1e-9 * best2
    ok = hits == n and settled == n
    return SuiteResult("mcmc", ok, f"best-found optimal {hits}/{n}, chain settled {settled}/{n}")


def suite_qlearning(seed: int = 0, steps: int = 20_000, tol: float = 0.01, **_) -> SuiteResult:
    rng = np.random.default_rng(seed)
    P, W = random_mdp(2, 2, rng)
    gamma = 0.1
    q = QTable.zeros(2, 2, gamma=gamma, epsilon=0.2, beta="visits")
    run_mdp(P, W, q, steps, seed=rng)
    err = float(np.max(np.abs(q.values - value_iteration_oracle(P, W, gamma))))
    return SuiteResult("qlearning", err < tol, f"sup-norm gap {err:.2e}")


def suite_contraction(seed: int = 0, n: int = 100, gamma: float = 0.95, **_) -> SuiteResult:
    rng = np.random.default_rng(seed)
    for i in range(n):
        P, W = random_mdp(3, 3, rng)
        Q1, Q2 = rng.normal(size=(2, 3, 3)) * 10
        lhs = np.max(np.abs(bellman_operator(Q1, P, W, gamma) - bellman_operator(Q2, P, W, gamma)))
        rhs = gamma * np.max(np.abs(Q1 - Q2))
        if not lhs <= rhs:
            return SuiteResult("contraction", False, f"pair {i}: {lhs} > {rhs}")
    return SuiteResult("contraction", True, f"{n} pairs contract")


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "stability": suite_stability,
    "lemma2": suite_lemma2,
    "corollary1": suite_corollary1,
    "quadrature": suite_quadrature,
    "mcmc": suite_mcmc,
    "qlearning": suite_qlearning,
    "contraction": suite_contraction,
}


def run_suites(only=None, seed: int = 0, mutate: bool = False) -> list[SuiteResult]:
    names = list(SUITES) if not only else list(only)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {', '.join(unknown)}")
    out = []
    for name in names:
        t0 = time.perf_counter()
        res = SUITES[name](seed=seed, mutate=mutate)
        res.seconds = time.perf_counter() - t0
        out.append(res)
    return out
