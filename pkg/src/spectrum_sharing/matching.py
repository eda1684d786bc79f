"""Many-to-one swap matching between child operators and resource blocks.

Each parent operator k is cloned into ``c_k`` children; every child holds one
RB and RB l hosts at most ``b_l`` children. A child's utility is its
desirability (its share of the parent's weighted rate on that RB) times an
indicator that is zero when a sibling sits on the same RB.

Welfare S is the weighted sum of parent rates, where a parent's rate is the
sum of its children's indicator-weighted rates divided by its demand. With
this bookkeeping S coincides with the potential (sum of utilities) whenever
``rho_k`` is folded into the desirability, so local maxima of S are pairwise
stable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator

import numpy as np
from scipy.special import expit

from .config import ConfigError, NetworkConfig

UNASSIGNED = -1


class ConstraintError(ValueError):
    """A matching or swap violates the supply constraint."""


@dataclass(frozen=True)
class Hole:
    """A vacant slot on ``rb``."""

    rb: int


@dataclass(frozen=True)
class AugmentedOpSet:
    demand: tuple
    parent: tuple
    children: tuple

    @property
    def n_children(self) -> int:
        return len(self.parent)


def build_augmented(cfg: NetworkConfig) -> AugmentedOpSet:
    """Clone parent k into c_k children; ids are parent-major."""
    parent = tuple(k for k, ck in enumerate(cfg.c) for _ in range(ck))
    children = []
    start = 0
    for ck in cfg.c:
        children.append(tuple(range(start, start + ck)))
        start += ck
    return AugmentedOpSet(tuple(cfg.c), parent, tuple(children))


@dataclass(frozen=True)
class Matching:
    assignment: tuple
    parent: tuple
    supply: tuple
    _occ: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = tuple(int(x) for x in self.assignment)
        object.__setattr__(self, "assignment", a)
        object.__setattr__(self, "parent", tuple(self.parent))
        object.__setattr__(self, "supply", tuple(self.supply))
        if len(a) != len(self.parent):
            raise ConstraintError("assignment and parent map differ in length")
        L = len(self.supply)
        occ = [[] for _ in range(L)]
        for child, rb in enumerate(a):
            if rb == UNASSIGNED:
                continue
            if not 0 <= rb < L:
                raise ConstraintError(f"child {child} assigned to unknown RB {rb}")
            occ[rb].append(child)
        for rb, members in enumerate(occ):
            if len(members) > self.supply[rb]:
                raise ConstraintError(
                    f"RB {rb} holds {len(members)} children, supply is {self.supply[rb]}")
        object.__setattr__(self, "_occ", tuple(tuple(m) for m in occ))

    @classmethod
    def from_assignment(cls, cfg: NetworkConfig, assignment) -> "Matching":
        return cls(tuple(assignment), build_augmented(cfg).parent, cfg.b)

    @property
    def n_children(self) -> int:
        return len(self.assignment)

    @property
    def n_rbs(self) -> int:
        return len(self.supply)

    @property
    def n_parents(self) -> int:
        return max(self.parent) + 1 if self.parent else 0

    def occupants(self, rb: int) -> tuple:
        return self._occ[rb]

    @property
    def occupancy(self) -> tuple:
        return tuple(len(m) for m in self._occ)

    def vacancies(self, rb: int) -> int:
        return self.supply[rb] - len(self._occ[rb])

    def rbs_of_parent(self, k: int) -> set:
        return {rb for ch, rb in enumerate(self.assignment)
                if self.parent[ch] == k and rb != UNASSIGNED}

    def occupant_parents(self, rb: int) -> tuple:
        return tuple(self.parent[c] for c in self._occ[rb])

    def has_sibling(self, child: int) -> bool:
        rb = self.assignment[child]
        if rb == UNASSIGNED:
            return False
        p = self.parent[child]
        return any(o != child and self.parent[o] == p for o in self._occ[rb])

    def x_matrix(self) -> np.ndarray:
        """Binary L x K matrix: x[l, k] = 1 iff parent k has a child on RB l."""
        x = np.zeros((self.n_rbs, self.n_parents), dtype=int)
        for ch, rb in enumerate(self.assignment):
            if rb != UNASSIGNED:
                x[rb, self.parent[ch]] = 1
        return x


# -------------------------------------------------------------- utilities


def desirability(child: int, matching: Matching, rates) -> float:
    rb = matching.assignment[child]
    if rb == UNASSIGNED:
        return 0.0
    return rates.desirability(matching.parent[child], matching.occupant_parents(rb))


def indicator(child: int, matching: Matching) -> int:
    return 0 if matching.has_sibling(child) else 1


def utility(child: int, matching: Matching, rates) -> float:
    """D * I; an unmatched child has utility 0."""
    if matching.assignment[child] == UNASSIGNED or matching.has_sibling(child):
        return 0.0
    return desirability(child, matching, rates)


@dataclass(frozen=True)
class WelfareReport:
    welfare: float
    potential: float
    parent_rates: tuple
    desirabilities: tuple
    indicators: tuple
    utilities: tuple


def social_welfare(matching: Matching, rates) -> WelfareReport:
    cfg = rates.cfg
    D, I, U = [], [], []
    per_parent = [[] for _ in range(cfg.K)]
    for ch in range(matching.n_children):
        d = desirability(ch, matching, rates)
        ind = indicator(ch, matching)
        D.append(d)
        I.append(ind)
        U.append(d * ind)
        if ind and matching.assignment[ch] != UNASSIGNED:
            k = matching.parent[ch]
            per_parent[k].append(rates.child_rate(k, matching.occupant_parents(matching.assignment[ch])))
    parent_rates = tuple(math.fsum(v) / cfg.c[k] for k, v in enumerate(per_parent))
    S = math.fsum(cfg.rho_op[k] * r for k, r in enumerate(parent_rates))
    return WelfareReport(S, math.fsum(U), parent_rates, tuple(D), tuple(I), tuple(U))


def welfare(matching: Matching, rates) -> float:
    return social_welfare(matching, rates).welfare


def potential(matching: Matching, rates) -> float:
    return social_welfare(matching, rates).potential


# ------------------------------------------------------------------- swaps


def apply_swap(matching: Matching, child_a, child_b) -> Matching:
    """Exchange the RBs of two children, or move a child into a `Hole`."""
    if isinstance(child_a, Hole):
        child_a, child_b = child_b, child_a
    if isinstance(child_a, Hole):
        raise ValueError("a swap needs at least one child")
    a = list(matching.assignment)
    ra = a[child_a]
    if isinstance(child_b, Hole):
        if child_b.rb == ra:
            return matching
        if not 0 <= child_b.rb < matching.n_rbs:
            raise ConstraintError(f"hole on unknown RB {child_b.rb}")
        if matching.vacancies(child_b.rb) <= 0:
            raise ConstraintError(f"RB {child_b.rb} has no vacancy")
        a[child_a] = child_b.rb
    else:
        rb = a[child_b]
        if ra == rb:
            return matching
        a[child_a], a[child_b] = rb, ra
    return Matching(tuple(a), matching.parent, matching.supply)


def _rb_of(matching, x):
    return x.rb if isinstance(x, Hole) else matching.assignment[x]


def is_beneficial_swap(matching: Matching, child_a, child_b, rates) -> bool:
    """Two-sided exchange approval.

    Both swapped children weakly gain, one strictly, and every other occupant
    of the two RBs weakly gains. A hole is always indifferent.
    """
    new = apply_swap(matching, child_a, child_b)
    if new is matching:
        return False
    pair = [x for x in (child_a, child_b) if not isinstance(x, Hole)]
    rbs = {_rb_of(matching, child_a), _rb_of(matching, child_b)}
    others = [c for rb in rbs for c in matching.occupants(rb) if c not in pair]
    gains = [utility(c, new, rates) - utility(c, matching, rates) for c in pair]
    if any(g < 0 for g in gains) or not any(g > 0 for g in gains):
        return False
    return all(utility(c, new, rates) >= utility(c, matching, rates) for c in others)


def candidate_swaps(matching: Matching) -> Iterator[tuple]:
    """All child pairs on different RBs, then all child -> vacancy moves."""
    n = matching.n_children
    asg = matching.assignment
    for a in range(n):
        for b in range(a + 1, n):
            if asg[a] != asg[b] and asg[a] != UNASSIGNED and asg[b] != UNASSIGNED:
                yield a, b
    for a in range(n):
        if asg[a] == UNASSIGNED:
            continue
        for rb in range(matching.n_rbs):
            if rb != asg[a] and matching.vacancies(rb) > 0:
                yield a, Hole(rb)


def is_pairwise_stable(matching: Matching, rates) -> tuple[bool, tuple | None]:
    """Exhaustive stability check; returns ``(stable, witness_swap)``."""
    for a, b in candidate_swaps(matching):
        if is_beneficial_swap(matching, a, b, rates):
            return False, (a, b)
    return True, None


def random_matching(cfg: NetworkConfig, rng, max_tries: int = 10_000) -> Matching:
    """Uniform random child -> RB assignment, redrawn until supply holds.

    Sibling collisions are allowed. Falls back to filling shuffled capacity
    slots if rejection sampling keeps failing.
    """
    rng = np.random.default_rng(rng)
    aug = build_augmented(cfg)
    n = aug.n_children
    b = np.asarray(cfg.b)
    for _ in range(max_tries):
        a = rng.integers(cfg.L, size=n)
        if np.all(np.bincount(a, minlength=cfg.L) <= b):
            return Matching(tuple(a.tolist()), aug.parent, cfg.b)
    slots = np.repeat(np.arange(cfg.L), b)
    rng.shuffle(slots)
    return Matching(tuple(slots[:n].tolist()), aug.parent, cfg.b)


def propose_swap(matching: Matching, rng) -> tuple | None:
    """Pick a random RB pair and one occupant (or hole) on each.

    Returns None when the draw is a no-op (two holes, or an RB that can
    offer neither an occupant nor a vacancy).
    """
    L = matching.n_rbs
    if L < 2:
        return None
    l1 = int(rng.integers(L))
    l2 = int(rng.integers(L - 1))
    if l2 >= l1:
        l2 += 1
    picks = []
    for rb in (l1, l2):
        cand = list(matching.occupants(rb))
        if matching.vacancies(rb) > 0:
            cand.append(Hole(rb))
        if not cand:
            return None
        picks.append(cand[int(rng.integers(len(cand)))])
    a, b = picks
    if isinstance(a, Hole) and isinstance(b, Hole):
        return None
    if isinstance(a, Hole):
        a, b = b, a
    return a, b


def acceptance_probability(delta: float, T_b: float) -> float:
    """Logistic acceptance 1 / (1 + exp(-T_b * delta)); larger T_b is greedier."""
    return float(expit(T_b * delta))


def _improves(new: float, old: float) -> bool:
    return new - old > 1e-12 * max(1.0, abs(old))


@dataclass
class SearchResult:
    matching: Matching
    current: Matching
    trace: list
    best_trace: list
    accepted: int = 0
    converged: bool = False
    rates: object = None

    @property
    def welfare(self) -> float:
        return self.best_trace[-1]

    def running_average(self) -> np.ndarray:
        t = np.asarray(self.trace, dtype=float)
        return np.cumsum(t) / np.arange(1, len(t) + 1)


def _find_improving(matching, rates, S):
    for a, b in candidate_swaps(matching):
        new = apply_swap(matching, a, b)
        S_new = welfare(new, rates)
        if _improves(S_new, S):
            return new, S_new
    return None


def greedy_swap(initial: Matching, rates, cfg: NetworkConfig | None = None,
                max_iters: int = 2000, seed=None, patience: int | None = None,
                on_accept: Callable | None = None, stop_when_stable: bool = True
                ) -> SearchResult:
    """Random swap proposals, accepted only if welfare strictly increases.

    After ``patience`` consecutive rejections an exhaustive pass looks for an
    improving swap; if there is none the search stops (``converged=True``).
    ``on_accept(matching)`` may return a new rate provider.
    """
    rng = np.random.default_rng(seed)
    if patience is None:
        patience = 4 * initial.n_children * initial.n_rbs
    cur = initial
    S = welfare(cur, rates)
    trace, best_trace = [S], [S]
    accepted = stale = 0
    converged = False
    for _ in range(max_iters):
        moved = None
        if stop_when_stable and stale >= patience:
            found = _find_improving(cur, rates, S)
            if found is None:
                converged = True
                break
            moved = found
        else:
            prop = propose_swap(cur, rng)
            if prop is not None:
                new = apply_swap(cur, *prop)
                S_new = welfare(new, rates)
                if _improves(S_new, S):
                    moved = (new, S_new)
        if moved is not None:
            cur, S = moved
            accepted += 1
            stale = 0
            if on_accept is not None:
                fresh = on_accept(cur)
                if fresh is not None:
                    rates = fresh
                    S = welfare(cur, rates)
        else:
            stale += 1
        trace.append(S)
        best_trace.append(max(best_trace[-1], S))
    return SearchResult(cur, cur, trace, best_trace, accepted, converged, rates)


def mcmc_swap(initial: Matching, rates, cfg: NetworkConfig | None = None,
              max_iters: int = 2000, seed=None, on_accept: Callable | None = None,
              acceptance: Callable[[float, float], float] = acceptance_probability
              ) -> SearchResult:
    """MCMC swap search; returns the best matching encountered.

    Each step draws the logistic acceptance first and, if that rejects,
    still accepts any strict improvement.
    """
    cfg = cfg or rates.cfg
    if cfg.T_b <= 0:
        raise ConfigError("T_b must be positive")
    rng = np.random.default_rng(seed)
    cur = best = initial
    S = S_best = welfare(cur, rates)
    trace, best_trace = [S], [S]
    accepted = 0
    for _ in range(max_iters):
        prop = propose_swap(cur, rng)
        if prop is not None:
            new = apply_swap(cur, *prop)
            S_new = welfare(new, rates)
            delta = S_new - S
            take = rng.random() < acceptance(delta, cfg.T_b) or _improves(S_new, S)
            if take:
                cur, S = new, S_new
                accepted += 1
                if on_accept is not None:
                    fresh = on_accept(cur)
                    if fresh is not None:
                        rates = fresh
                        S = welfare(cur, rates)
                        S_best = welfare(best, rates)
                if _improves(S, S_best):
                    best, S_best = cur, S
        trace.append(S)
        best_trace.append(S_best)
    return SearchResult(best, cur, trace, best_trace, accepted, False, rates)


# ------------------------------------------------------------- enumeration


def count_matchings(cfg: NetworkConfig) -> int:
    """Number of supply-feasible assignments of all children to RBs.

    n! [x^n] prod_l sum_{j <= b_l} x^j / j!
    """
    n = cfg.n_children
    poly = [Fraction(1)]
    for bl in cfg.b:
        term = [Fraction(1, math.factorial(j)) for j in range(min(bl, n) + 1)]
        out = [Fraction(0)] * min(len(poly) + len(term) - 1, n + 1)
        for i, x in enumerate(poly):
            for j, y in enumerate(term):
                if i + j <= n:
                    out[i + j] += x * y
        poly = out
    if len(poly) <= n:
        return 0
    return int(poly[n] * math.factorial(n))


def enumerate_matchings(cfg: NetworkConfig, distinct_siblings: bool = False
                        ) -> Iterator[Matching]:
    """All feasible matchings in lexicographic order of the assignment."""
    aug = build_augmented(cfg)
    b = cfg.b
    for a in itertools.product(range(cfg.L), repeat=aug.n_children):
        counts = [0] * cfg.L
        ok = True
        for rb in a:
            counts[rb] += 1
            if counts[rb] > b[rb]:
                ok = False
                break
        if not ok:
            continue
        if distinct_siblings and any(
                len({a[c] for c in kids}) < len(kids) for kids in aug.children):
            continue
        yield Matching(a, aug.parent, b)


def brute_force_optimum(cfg: NetworkConfig, rates, objective: str = "welfare",
                        distinct_siblings: bool = False, rtol: float = 1e-9
                        ) -> tuple[float, list]:
    """Best objective value and every maximizer (lexicographic order)."""
    if objective not in ("welfare", "potential"):
        raise ValueError("objective must be 'welfare' or 'potential'")
    scored = []
    for m in enumerate_matchings(cfg, distinct_siblings):
        rep = social_welfare(m, rates)
        scored.append((rep.welfare if objective == "welfare" else rep.potential, m))
    if not scored:
        raise ValueError("no feasible matching")
    best = max(v for v, _ in scored)
    tol = rtol * max(1.0, abs(best))
    return best, [m for v, m in scored if v >= best - tol]


# ---------------------------------------------------------- serialization


def matching_to_json(matching: Matching, rates=None) -> dict:
    out = {"assignment": [[c, rb] for c, rb in enumerate(matching.assignment)],
           "welfare": None, "potential": None}
    if rates is not None:
        rep = social_welfare(matching, rates)
        out["welfare"] = rep.welfare
        out["potential"] = rep.potential
    return out


def matching_from_json(data: dict, cfg: NetworkConfig) -> Matching:
    aug = build_augmented(cfg)
    a = [UNASSIGNED] * aug.n_children
    for child, rb in data["assignment"]:
        a[int(child)] = int(rb)
    return Matching(tuple(a), aug.parent, cfg.b)
