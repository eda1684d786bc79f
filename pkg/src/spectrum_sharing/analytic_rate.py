"""Expected rates from the stochastic-geometry model (alpha = 4, Rayleigh).

For an SBS transmitting with power ``p`` to a UE at distance ``r`` on an RB
whose interferers form a PPP of intensity ``lam_l``, the interference-limited
expected rate (in nats) is

    E[R] = int_0^inf exp(-a * sqrt(e^t - 1)) dt,
    a = lam_l * pi**2 * r**2 * E[sqrt(p')] / (2 * sqrt(p)).

``integrand="printed"`` multiplies the square-root argument by ``t``; that
variant does not agree with Monte Carlo and is kept only for comparison.

The rate is de-conditioned over the UE distance (density 2r / r_c**2) by
exchanging the order of integration, which leaves a single quadrature:

    E_r[E[R]] = int_0^inf (1 - exp(-a_c u)) / (a_c u) dt,  u = sqrt(e^t - 1),

with ``a_c`` the coefficient at ``r = r_c``. When there is no interference
(``lam_l == 0`` or silent interferers) the noise-limited rate is used instead.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy import integrate

from .config import NetworkConfig
from .units import convert_rate

log = logging.getLogger(__name__)

QUAD_EPSABS = 1e-11
QUAD_EPSREL = 1e-11
QUAD_LIMIT = 400


class UnsupportedModelError(ValueError):
    """The closed-form rate requires alpha = 4 and eta = 1."""


@dataclass(frozen=True, eq=False)
class PowerPmf:
    """Probability mass over the power grid {0, delta, ..., (N - 1) delta}."""

    probs: np.ndarray
    delta: float

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or len(p) < 1:
            raise ValueError("PowerPmf needs a non-empty 1-D probability vector")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("PowerPmf entries must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"PowerPmf must sum to 1 (sum = {p.sum()!r})")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @property
    def n_levels(self) -> int:
        return len(self.probs)

    @property
    def levels(self) -> np.ndarray:
        return self.delta * np.arange(self.n_levels)

    @property
    def mean_sqrt_power(self) -> float:
        """E[sqrt(p)]; the zero level contributes nothing."""
        return float(self.probs @ np.sqrt(self.levels))

    def key(self) -> tuple:
        return (self.delta, tuple(self.probs.tolist()))

    def __eq__(self, other):
        return isinstance(other, PowerPmf) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"PowerPmf({np.round(self.probs, 4).tolist()}, delta={self.delta:g})"

    @classmethod
    def degenerate(cls, level: int, n_levels: int, delta: float) -> "PowerPmf":
        p = np.zeros(n_levels)
        p[level] = 1.0
        return cls(p, delta)

    @classmethod
    def full(cls, n_levels: int, delta: float) -> "PowerPmf":
        """All mass on the top level of the grid."""
        return cls.degenerate(n_levels - 1, n_levels, delta)

    @classmethod
    def uniform(cls, n_levels: int, delta: float) -> "PowerPmf":
        return cls(np.full(n_levels, 1.0 / n_levels), delta)

    @classmethod
    def from_counts(cls, counts, delta: float) -> "PowerPmf":
        counts = np.asarray(counts, dtype=float)
        p = counts / counts.sum()
        # absorb rounding so the sum check holds exactly
        p[np.argmax(p)] += 1.0 - p.sum()
        return cls(p, delta)

    @staticmethod
    def mixture(pmfs: Sequence["PowerPmf"], weights=None) -> "PowerPmf":
        pmfs = list(pmfs)
        if all(q == pmfs[0] for q in pmfs[1:]):
            return pmfs[0]
        w = np.ones(len(pmfs)) if weights is None else np.asarray(weights, dtype=float)
        w = w / w.sum()
        p = sum(wi * q.probs for wi, q in zip(w, pmfs))
        p = p / p.sum()
        p[np.argmax(p)] += 1.0 - p.sum()
        return PowerPmf(p, pmfs[0].delta)


def full_power_pmf(cfg: NetworkConfig) -> PowerPmf:
    return PowerPmf.full(cfg.n_levels, cfg.delta)


def uniform_power_pmf(cfg: NetworkConfig) -> PowerPmf:
    return PowerPmf.uniform(cfg.n_levels, cfg.delta)


@dataclass(frozen=True)
class RbIntensity:
    rb: int
    intensity: float
    operators: frozenset


def rb_intensity(matching, cfg: NetworkConfig) -> list[RbIntensity]:
    """Interferer intensity per RB.

    Every child holds exactly one RB, so each child on an RB adds the full
    per-operator intensity ``cfg.lam``.
    """
    out = []
    for rb in range(cfg.L):
        occ = matching.occupants(rb)
        parents = frozenset(matching.parent[c] for c in occ)
        out.append(RbIntensity(rb, len(occ) * cfg.lam, parents))
    return out


# ---------------------------------------------------------------- quadrature


def _u(t, printed):
    g = math.expm1(t)
    if printed:
        g *= t
    return math.sqrt(g)


def _quad(f, a, b):
    val, _ = integrate.quad(f, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL,
                            limit=QUAD_LIMIT)
    return val


@lru_cache(maxsize=200_000)
def interference_integral(a: float, printed: bool = False) -> float:
    """``int_0^inf exp(-a u(t)) dt`` for a > 0 (conditional expected rate)."""
    if a <= 0:
        raise ValueError("coefficient must be positive")
    # a*u reaches 1 at t0 and 40 at t_max; beyond t_max the integrand < 5e-18
    t0 = math.log1p(1.0 / a**2)
    t_max = math.log1p((40.0 / a) ** 2)
    f = lambda t: math.exp(-a * _u(t, printed))
    return _quad(f, 0.0, t0) + _quad(f, t0, t_max)


def _avg_exp(x):
    # (1 - exp(-x)) / x with the x -> 0 limit
    return 1.0 if x < 1e-300 else -math.expm1(-x) / x


@lru_cache(maxsize=200_000)
def averaged_interference_integral(a_c: float, printed: bool = False) -> float:
    """``int_0^1 interference_integral(a_c * s) ds`` via one quadrature."""
    if a_c <= 0:
        raise ValueError("coefficient must be positive")
    t0 = math.log1p(1.0 / a_c**2)
    # integrand <= 1/(a_c u) ~ e^{-t/2}/a_c; its tail past t_max is < 1e-15
    t_max = max(t0, 0.0) + 2.0 * math.log(2.0 / (a_c * 1e-15)) + 1.0
    f = lambda t: _avg_exp(a_c * _u(t, printed))
    return _quad(f, 0.0, t0) + _quad(f, t0, t_max)


@lru_cache(maxsize=50_000)
def noise_integral(k: float) -> float:
    """``E[log(1 + h / k)]`` for h ~ Exp(1) as ``int_0^inf exp(-k (e^t - 1)) dt``."""
    t0 = math.log1p(1.0 / k)
    t_max = math.log1p(40.0 / k)
    f = lambda t: math.exp(-k * math.expm1(t))
    return _quad(f, 0.0, t0) + _quad(f, t0, t_max)


@lru_cache(maxsize=50_000)
def averaged_noise_integral(k_c: float) -> float:
    """Noise-limited rate averaged over s = (r / r_c)**2 ~ U(0, 1).

    With ``k = k_c s**2`` the inner average is ``sqrt(pi) erf(sqrt(b)) / (2 sqrt(b))``,
    ``b = k_c (e^t - 1)``.
    """
    def f(t):
        b = k_c * math.expm1(t)
        if b < 1e-300:
            return 1.0
        sb = math.sqrt(b)
        return math.sqrt(math.pi) * math.erf(sb) / (2.0 * sb)

    t0 = math.log1p(1.0 / k_c)
    t_max = t0 + 2.0 * math.log(1.0 / (math.sqrt(k_c) * 1e-15)) + 1.0
    return _quad(f, 0.0, t0) + _quad(f, t0, t_max)


# ------------------------------------------------------------------- rates


def _check_model(cfg: NetworkConfig):
    if cfg.alpha != 4.0 or cfg.eta != 1.0:
        raise UnsupportedModelError(
            f"closed-form rate needs alpha=4 and eta=1 (got alpha={cfg.alpha}, eta={cfg.eta})")


def _coefficient(lambda_l, p_f, mean_sqrt_interferer, r):
    return lambda_l * math.pi**2 * r**2 * mean_sqrt_interferer / (2.0 * math.sqrt(p_f))


def expected_rate_conditional(lambda_l: float, p_f: float, pmf_interferer: PowerPmf,
                              r_ff: float, cfg: NetworkConfig, units: str = "nats") -> float:
    """Expected rate at a fixed UE distance ``r_ff`` (noise neglected).

    Without interference the integral diverges; the noise-limited rate
    ``E[log(1 + h r^-4 p / sigma2)]`` is returned instead.
    """
    _check_model(cfg)
    if not p_f > 0:
        raise ValueError(f"transmit power must be positive (got {p_f})")
    if lambda_l < 0 or not r_ff > 0:
        raise ValueError("need lambda_l >= 0 and r_ff > 0")
    m = pmf_interferer.mean_sqrt_power
    if lambda_l == 0 or m == 0:
        k = cfg.eta * cfg.sigma2 * r_ff**cfg.alpha / p_f
        val = noise_integral(k)
    else:
        a = _coefficient(lambda_l, p_f, m, r_ff)
        val = interference_integral(a, cfg.integrand == "printed")
    return convert_rate(val, units)


def deconditioned_rate(lambda_l: float, p_f: float, pmf_interferer: PowerPmf,
                       cfg: NetworkConfig, units: str = "nats") -> float:
    """`expected_rate_conditional` averaged over r_ff with density 2r / r_c**2."""
    _check_model(cfg)
    if not p_f > 0:
        raise ValueError(f"transmit power must be positive (got {p_f})")
    if lambda_l < 0:
        raise ValueError("lambda_l must be >= 0")
    m = pmf_interferer.mean_sqrt_power
    if lambda_l == 0 or m == 0:
        k_c = cfg.eta * cfg.sigma2 * cfg.r_c**cfg.alpha / p_f
        val = averaged_noise_integral(k_c)
    else:
        a_c = _coefficient(lambda_l, p_f, m, cfg.r_c)
        val = averaged_interference_integral(a_c, cfg.integrand == "printed")
    return convert_rate(val, units)


def level_averaged_rate(lambda_l: float, pmf_self: PowerPmf, pmf_interferer: PowerPmf,
                        cfg: NetworkConfig, units: str = "nats") -> float:
    """Average of `deconditioned_rate` over the SBS's own power levels.

    A silent level (power 0) has rate 0.
    """
    total = 0.0
    for level, prob in zip(pmf_self.levels, pmf_self.probs):
        if prob == 0.0 or level == 0.0:
            continue
        total += prob * deconditioned_rate(lambda_l, level, pmf_interferer, cfg)
    return convert_rate(total, units)


def expected_rate_sbs(lambda_l_per_rb, rbs_of_parent, p_pmf_self: PowerPmf,
                      pmf_interferer, cfg: NetworkConfig, units: str = "nats") -> float:
    """Per-SBS rate: uniform RB choice among the parent's RBs.

    ``pmf_interferer`` is one `PowerPmf` or a mapping RB -> `PowerPmf`.
    """
    rbs = list(rbs_of_parent)
    if not rbs:
        raise ValueError("the parent operator holds no RB")
    total = 0.0
    for rb in rbs:
        q = pmf_interferer[rb] if isinstance(pmf_interferer, Mapping) else pmf_interferer
        total += level_averaged_rate(lambda_l_per_rb[rb], p_pmf_self, q, cfg)
    return convert_rate(total / len(rbs), units)


class RateProvider:
    """Memoized child-operator rates and desirabilities.

    ``pmfs`` is None (full power everywhere), a single `PowerPmf`, or one
    `PowerPmf` per parent operator. A child's rate depends only on its
    parent and the multiset of parents occupying its RB.
    """

    def __init__(self, cfg: NetworkConfig, pmfs=None, units: str = "nats"):
        _check_model(cfg)
        convert_rate(0.0, units)
        self.cfg = cfg
        self.units = units
        if pmfs is None:
            pmfs = full_power_pmf(cfg)
        if isinstance(pmfs, PowerPmf):
            pmfs = [pmfs] * cfg.K
        self.pmfs = list(pmfs)
        if len(self.pmfs) != cfg.K:
            raise ValueError("need one PowerPmf per parent operator")
        # equal pmfs share an id so that rates depend on occupancy alone
        ids: dict = {}
        self._pmf_id = [ids.setdefault(q, len(ids)) for q in self.pmfs]
        self._distinct = {i: q for q, i in ids.items()}
        self._cache: dict = {}

    def child_rate(self, parent: int, occupants: Sequence[int]) -> float:
        """Weighted rate of a child of ``parent`` on an RB shared by ``occupants``.

        ``occupants`` lists the parent of every child on the RB, the child
        itself included. Value = expected SBS count * rho_sbs * R_f.
        """
        key = (self._pmf_id[parent], tuple(sorted(self._pmf_id[o] for o in occupants)))
        val = self._cache.get(key)
        if val is None:
            cfg = self.cfg
            lam_l = len(occupants) * cfg.lam
            mix = PowerPmf.mixture([self._distinct[i] for i in key[1]])
            r = level_averaged_rate(lam_l, self._distinct[key[0]], mix, cfg, self.units)
            val = cfg.expected_sbs_count * cfg.rho_sbs * r
            self._cache[key] = val
        return val

    def desirability(self, parent: int, occupants: Sequence[int]) -> float:
        """Child's share of its parent's weighted rate: rho_k * rate / c_k."""
        cfg = self.cfg
        return cfg.rho_op[parent] * self.child_rate(parent, occupants) / cfg.c[parent]


def expected_rate_operator(parent_k: int, matching, pmfs, cfg: NetworkConfig,
                           units: str = "nats") -> float:
    """Parent operator rate: sum of its children's rates over its demand c_k.

    Children sharing an RB with a sibling contribute nothing. An operator
    with no matched child gets 0 (logged).
    """
    rates = pmfs if isinstance(pmfs, RateProvider) else RateProvider(cfg, pmfs, units)
    children = [ch for ch in range(len(matching.parent)) if matching.parent[ch] == parent_k]
    total = 0.0
    matched = False
    for ch in children:
        rb = matching.assignment[ch]
        if rb < 0:
            continue
        matched = True
        occ = [matching.parent[o] for o in matching.occupants(rb)]
        if occ.count(parent_k) > 1:
            continue
        total += rates.child_rate(parent_k, occ)
    if not matched:
        log.warning("operator %d has no matched child; rate set to 0", parent_k)
        return 0.0
    return total / cfg.c[parent_k]
