"""Seeded experiment loop: swap matching interleaved with power learning.

A trial draws a random initial matching and runs the swap search. In the
``q-learning`` power mode every accepted swap is followed by a learning
epoch on a sampled deployment, and the learned pmfs replace the rate
provider used to score matchings. Welfare is always scored with the
analytic rate engine; the empirical channel only drives the learners.

Searches run in nats; reported welfare is converted to ``spec.units``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .analytic_rate import PowerPmf, RateProvider, full_power_pmf, uniform_power_pmf
from .config import ConfigError, NetworkConfig
from .deployment import sample_deployment
from .matching import Matching, build_augmented, greedy_swap, mcmc_swap, random_matching
from .qlearning import MultiAgentLearner
from .units import convert_rate

log = logging.getLogger(__name__)

KINDS = ("convergence-trace", "welfare-cdf", "welfare-vs-L", "demand-sweep", "intensity-sweep")
POWER_MODES = ("full", "uniform", "q-learning")
ALGORITHMS = ("mcmc", "greedy")
CSV_COLUMNS = ("experiment_id", "seed", "K", "L", "power_mode", "algorithm", "welfare")
QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)
STEADY_FRACTION = 0.1


@dataclass(frozen=True)
class ExperimentSpec:
    """What to run. ``sweep`` holds the grid for the sweep kinds.

    welfare-vs-L sweeps L (supply per RB kept at ``cfg.b[0]``), demand-sweep
    takes demand vectors, intensity-sweep takes deployment radii at a fixed
    expected SBS count.
    """

    cfg: NetworkConfig
    kind: str = "welfare-cdf"
    trials: int = 100
    iterations: int = 500
    power_mode: str = "full"
    algorithm: str = "mcmc"
    base_seed: int = 0
    sweep: tuple = ()
    experiment_id: str = "exp"
    units: str = "bits"

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"experiment.kind must be one of {KINDS} (got {self.kind!r})")
        if self.power_mode not in POWER_MODES:
            raise ConfigError(f"experiment.power_mode must be one of {POWER_MODES} "
                              f"(got {self.power_mode!r})")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"experiment.algorithm must be one of {ALGORITHMS} "
                              f"(got {self.algorithm!r})")
        if self.trials < 1:
            raise ConfigError("experiment.trials >= 1 violated")
        if self.iterations < 1:
            raise ConfigError("experiment.iterations >= 1 violated")
        if self.kind in ("welfare-vs-L", "demand-sweep", "intensity-sweep") and not self.sweep:
            raise ConfigError(f"experiment.sweep must be nonempty for kind {self.kind!r}")
        convert_rate(0.0, self.units)
        self.cfg.validate()


@dataclass
class TrialResult:
    seed: int
    trace: np.ndarray
    steady_state: float
    matching: Matching
    pmfs: list
    accepted: int

    @property
    def running_average(self) -> np.ndarray:
        return np.cumsum(self.trace) / np.arange(1, len(self.trace) + 1)


@lru_cache(maxsize=256)
def _provider(cfg: NetworkConfig, pmfs: tuple) -> RateProvider:
    return RateProvider(cfg, list(pmfs))


def _initial_pmfs(cfg: NetworkConfig, mode: str) -> tuple:
    pmf = full_power_pmf(cfg) if mode == "full" else uniform_power_pmf(cfg)
    return (pmf,) * cfg.K


def steady_state(trace) -> float:
    """Mean of the trailing 10% of a welfare trace (at least one sample)."""
    t = np.asarray(trace, dtype=float)
    n = max(1, int(math.ceil(STEADY_FRACTION * len(t))))
    return float(t[-n:].mean())


def run_trial(spec: ExperimentSpec, trial_seed: int) -> TrialResult:
    """One seeded trial; the raw welfare trace has ``iterations + 1`` entries."""
    spec.validate()
    cfg = spec.cfg
    ss_init, ss_search, ss_dep, ss_learn = np.random.SeedSequence(int(trial_seed)).spawn(4)
    initial = random_matching(cfg, np.random.default_rng(ss_init))
    on_accept = None
    state = {}
    if spec.power_mode == "q-learning":
        dep = sample_deployment(cfg, np.random.default_rng(ss_dep))
        learner = MultiAgentLearner(cfg, dep, build_augmented(cfg).parent,
                                    seed=np.random.default_rng(ss_learn))
        pmfs = tuple(learner.epoch(initial.assignment, cfg.epoch_steps))

        def on_accept(m):
            state["pmfs"] = tuple(learner.epoch(m.assignment, cfg.epoch_steps))
            return _provider(cfg, state["pmfs"])
    else:
        pmfs = _initial_pmfs(cfg, spec.power_mode)
    state["pmfs"] = pmfs
    rates = _provider(cfg, pmfs)
    search = greedy_swap if spec.algorithm == "greedy" else mcmc_swap
    res = search(initial, rates, cfg, max_iters=spec.iterations,
                 seed=np.random.default_rng(ss_search), on_accept=on_accept)
    trace = np.asarray(res.trace, dtype=float)
    if len(trace) < spec.iterations + 1:
        trace = np.concatenate([trace, np.full(spec.iterations + 1 - len(trace), trace[-1])])
    trace = np.asarray(convert_rate(trace, spec.units), dtype=float)
    return TrialResult(int(trial_seed), trace, steady_state(trace), res.matching,
                       list(state["pmfs"]), res.accepted)


def _safe_trial(args):
    spec, seed = args
    try:
        return run_trial(spec, seed), None
    except ConfigError:
        raise
    except Exception as exc:  # reported per seed
        return None, f"{type(exc).__name__}: {exc}"


def config_hash(cfg: NetworkConfig) -> str:
    payload = json.dumps(asdict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class ResultSet:
    experiment_id: str
    K: int
    L: int
    power_mode: str
    algorithm: str
    seeds: list
    samples: list
    config_hash: str
    units: str = "bits"
    errors: dict = field(default_factory=dict)
    wall_time: float = 0.0
    traces: list | None = field(default=None, compare=False, repr=False)
    trials: list | None = field(default=None, compare=False, repr=False)

    @property
    def per_op(self) -> np.ndarray:
        return np.asarray(self.samples, dtype=float) / self.K

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    @property
    def median(self) -> float:
        return float(np.median(self.samples))

    @property
    def stderr(self) -> float:
        s = np.asarray(self.samples, dtype=float)
        return float(s.std(ddof=1) / math.sqrt(len(s))) if len(s) > 1 else 0.0

    def cdf(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted samples x and F(x) = fraction of samples <= x."""
        x = np.sort(np.asarray(self.samples, dtype=float))
        return x, np.arange(1, len(x) + 1) / len(x)

    def cdf_at(self, x) -> np.ndarray:
        s = np.sort(np.asarray(self.samples, dtype=float))
        return np.searchsorted(s, x, side="right") / len(s)

    def quantiles(self) -> dict:
        if not self.samples:
            return {}
        q = np.quantile(np.asarray(self.samples, dtype=float), QUANTILES)
        return {str(k): float(v) for k, v in zip(QUANTILES, q)}

    def csv_rows(self) -> list[list[str]]:
        return [[self.experiment_id, str(s), str(self.K), str(self.L), self.power_mode,
                 self.algorithm, repr(float(w))] for s, w in zip(self.seeds, self.samples)]

    def sidecar(self) -> dict:
        return {"experiment_id": self.experiment_id, "K": self.K, "L": self.L,
                "power_mode": self.power_mode, "algorithm": self.algorithm,
                "config_hash": self.config_hash, "units": self.units,
                "quantiles": self.quantiles(), "errors": {str(k): v for k, v in self.errors.items()},
                "wall_time": self.wall_time, "n_samples": len(self.samples)}


def run_ensemble(spec: ExperimentSpec, jobs: int = 1) -> ResultSet:
    """Run seeds ``base_seed .. base_seed + trials - 1`` and aggregate."""
    spec.validate()
    t0 = time.perf_counter()
    seeds = list(range(spec.base_seed, spec.base_seed + spec.trials))
    work = [(spec, s) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_safe_trial, work))
    else:
        outs = [_safe_trial(w) for w in work]
    ok_seeds, samples, traces, trials, errors = [], [], [], [], {}
    for seed, (res, err) in zip(seeds, outs):
        if err is not None:
            log.error("trial %d failed: %s", seed, err)
            errors[seed] = err
            continue
        ok_seeds.append(seed)
        samples.append(res.steady_state)
        traces.append(res.trace)
        trials.append(res)
    return ResultSet(spec.experiment_id, spec.cfg.K, spec.cfg.L, spec.power_mode,
                     spec.algorithm, ok_seeds, samples, config_hash(spec.cfg), spec.units,
                     errors, time.perf_counter() - t0, traces, trials)


def _grid_specs(spec: ExperimentSpec) -> list[ExperimentSpec]:
    cfg = spec.cfg
    if spec.kind == "welfare-vs-L":
        out = []
        for L in spec.sweep:
            L = int(L)
            c = replace(cfg, L=L, b=(cfg.b[0],) * L)
            out.append(replace(spec, cfg=c, experiment_id=f"{spec.experiment_id}/L={L}"))
        return out
    if spec.kind == "demand-sweep":
        out = []
        for c_vec in spec.sweep:
            c_vec = tuple(int(x) for x in c_vec)
            c = replace(cfg, K=len(c_vec), c=c_vec, rho_op=None)
            tag = "-".join(map(str, c_vec))
            out.append(replace(spec, cfg=c, experiment_id=f"{spec.experiment_id}/c={tag}"))
        return out
    if spec.kind == "intensity-sweep":
        out = []
        count = cfg.expected_sbs_count
        for radius in spec.sweep:
            radius = float(radius)
            c = replace(cfg, area_radius=radius, lam=count / (math.pi * radius**2))
            out.append(replace(spec, cfg=c, experiment_id=f"{spec.experiment_id}/R={radius:g}"))
        return out
    return [spec]


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> list[ResultSet]:
    """One `ResultSet` per grid point (a single one for non-sweep kinds)."""
    spec.validate()
    return [run_ensemble(s, jobs) for s in _grid_specs(spec)]


@dataclass
class SaturationCurve:
    L: list
    per_op: list
    saturation_L: int | None
    results: list = field(default_factory=list, repr=False)


def find_saturation(L_grid, values, rtol: float = 0.01):
    """First L from which every successive relative change stays below ``rtol``."""
    L_grid, values = list(L_grid), list(values)
    for i in range(len(values) - 1):
        if all(abs(values[j + 1] - values[j]) < rtol * abs(values[j])
               for j in range(i, len(values) - 1)):
            return L_grid[i]
    return None


def saturation_curve(spec: ExperimentSpec, L_grid=None, jobs: int = 1) -> SaturationCurve:
    """Mean per-operator welfare versus L with the saturation point flagged."""
    grid = tuple(L_grid) if L_grid is not None else tuple(spec.sweep)
    if not grid:
        raise ConfigError("saturation_curve needs a nonempty L grid")
    if min(grid) < max(spec.cfg.c):
        raise ConfigError("every L in the grid must satisfy c_k <= L")
    results = run_experiment(replace(spec, kind="welfare-vs-L", sweep=grid), jobs)
    per_op = [float(r.per_op.mean()) for r in results]
    return SaturationCurve(list(grid), per_op, find_saturation(grid, per_op), results)


def cochannel_pairs(matching: Matching) -> int:
    """Number of child pairs from different parents sharing an RB."""
    total = 0
    for rb in range(matching.n_rbs):
        parents = matching.occupant_parents(rb)
        for i in range(len(parents)):
            for j in range(i + 1, len(parents)):
                total += parents[i] != parents[j]
    return total


# ------------------------------------------------------------------ files


def write_results(results: list[ResultSet], outdir, stem: str = "results") -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.json``; returns both paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        w.writerows(r.csv_rows())
    csv_path = outdir / f"{stem}.csv"
    csv_path.write_text(buf.getvalue())
    json_path = outdir / f"{stem}.json"
    json_path.write_text(json.dumps({"results": [r.sidecar() for r in results]},
                                    indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def read_results(csv_path, json_path=None) -> list[ResultSet]:
    """Inverse of `write_results` (traces are not persisted)."""
    csv_path = Path(csv_path)
    json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
    meta = json.loads(json_path.read_text())["results"]
    rows: dict = {}
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.setdefault(row["experiment_id"], []).append(row)
    out = []
    for m in meta:
        mine = rows.get(m["experiment_id"], [])
        out.append(ResultSet(
            m["experiment_id"], int(m["K"]), int(m["L"]), m["power_mode"], m["algorithm"],
            [int(r["seed"]) for r in mine], [float(r["welfare"]) for r in mine],
            m["config_hash"], m["units"], {int(k): v for k, v in m["errors"].items()},
            m["wall_time"]))
    return out
