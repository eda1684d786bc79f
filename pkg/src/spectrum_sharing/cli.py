"""Command-line front end.

Subcommands: ``run``, ``verify``, ``enumerate``, ``rate-table``.

Exit codes: 0 success, 1 runtime error or failed verification, 2 bad
configuration, 3 instance too large to enumerate.

Configs are YAML files with flat dotted keys (nested mappings are
flattened to the same keys)::

    network.K: 2
    network.L: 4
    network.c: [2, 2]
    experiment.trials: 20
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from .analytic_rate import RateProvider
from .config import ConfigError, NetworkConfig, config_from_flat
from .harness import ExperimentSpec, run_experiment, write_results
from .matching import count_matchings, enumerate_matchings, is_pairwise_stable, social_welfare
from .units import convert_rate
from .verify import SUITES, run_suites

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_TOO_LARGE = 0, 1, 2, 3
OUTDIR_ENV = "SPECTRUM_SHARING_OUT"
ENUMERATE_LIMIT = 10**6

_EXPERIMENT_KEYS = {
    "experiment.kind": ("kind", str),
    "experiment.trials": ("trials", int),
    "experiment.iterations": ("iterations", int),
    "experiment.power_mode": ("power_mode", str),
    "experiment.algorithm": ("algorithm", str),
    "experiment.seed": ("base_seed", int),
    "experiment.sweep": ("sweep", lambda v: tuple(tuple(x) if isinstance(x, list) else x for x in v)),
    "experiment.id": ("experiment_id", str),
}


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def load_flat(path) -> dict:
    """Parse a YAML config into flat dotted keys."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"YAML parse error{where}: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of dotted keys")
    return _flatten(data)


def load_experiment(path, seed=None, units="bits") -> tuple[ExperimentSpec, dict]:
    flat = load_flat(path)
    cfg = config_from_flat(flat)
    kwargs = {}
    for key, value in flat.items():
        if not key.startswith("experiment."):
            continue
        if key not in _EXPERIMENT_KEYS:
            raise ConfigError(f"unknown config field {key!r}")
        name, conv = _EXPERIMENT_KEYS[key]
        try:
            kwargs[name] = conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from None
    spec = ExperimentSpec(cfg, units=units, **kwargs)
    if seed is not None:
        spec = replace(spec, base_seed=int(seed))
    spec.validate()
    return spec, flat


def _outdir(args, flat) -> Path:
    if args.out:
        return Path(args.out)
    if "output.dir" in flat:
        return Path(flat["output.dir"])
    return Path(os.environ.get(OUTDIR_ENV, "results"))


def cmd_run(args) -> int:
    spec, flat = load_experiment(args.config, args.seed, args.units)
    results = run_experiment(spec, jobs=args.jobs)
    csv_path, json_path = write_results(results, _outdir(args, flat), args.stem)
    failed = sum(len(r.errors) for r in results)
    for r in results:
        print(f"{r.experiment_id}: n={len(r.samples)} mean={r.mean:.6g} "
              f"median={r.median:.6g} {spec.units}" if r.samples else
              f"{r.experiment_id}: no successful trials")
    print(f"wrote {csv_path} and {json_path}")
    if failed:
        print(f"{failed} trial(s) failed; see the JSON sidecar", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_verify(args) -> int:
    only = args.only.split(",") if args.only else None
    results = run_suites(only, seed=args.seed or 0, mutate=args.mutate)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.seconds:6.2f}s  {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


def cmd_enumerate(args) -> int:
    cfg = config_from_flat(load_flat(args.config))
    total = count_matchings(cfg)
    if total > ENUMERATE_LIMIT:
        print(f"instance too large: {total} matchings (limit {ENUMERATE_LIMIT})", file=sys.stderr)
        return EXIT_TOO_LARGE
    rates = RateProvider(cfg)
    best = None
    print(f"{total} matchings ({args.units})")
    print("assignment\twelfare\tpotential\tstable")
    for m in enumerate_matchings(cfg):
        rep = social_welfare(m, rates)
        stable, _ = is_pairwise_stable(m, rates)
        S = float(convert_rate(rep.welfare, args.units))
        phi = float(convert_rate(rep.potential, args.units))
        print(f"{list(m.assignment)}\t{S:.6f}\t{phi:.6f}\t{'yes' if stable else 'no'}")
        if best is None or rep.welfare > best[0] + 1e-9 * max(1.0, abs(best[0])):
            best = (rep.welfare, m)
    S = float(convert_rate(best[0], args.units))
    print(f"maximizer: {list(best[1].assignment)} welfare {S:.6f}")
    return EXIT_OK


def cmd_rate_table(args) -> int:
    cfg = config_from_flat(load_flat(args.config)) if args.config else NetworkConfig()
    rates = RateProvider(cfg, units=args.units)
    print(f"children_on_rb\tlambda_l\tchild_rate ({args.units})")
    for n in range(1, max(cfg.b) + 1):
        occupants = [0] + [min(1, cfg.K - 1)] * (n - 1)
        print(f"{n}\t{n * cfg.lam:.6e}\t{rates.child_rate(0, occupants):.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spectrum-sharing", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="YAML config file")
        sp.add_argument("--out", help=f"output directory (default ${OUTDIR_ENV} or ./results)")
        sp.add_argument("--seed", type=int, help="override experiment.seed")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        sp.add_argument("--units", choices=("nats", "bits"), default="bits")

    sp = sub.add_parser("run", help="run an experiment ensemble")
    common(sp)
    sp.add_argument("--stem", default="results", help="output file stem")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("verify", help="run the self-check suites")
    common(sp, config_required=False)
    sp.add_argument("--only", help=f"comma-separated subset of: {', '.join(SUITES)}")
    sp.add_argument("--mutate", action="store_true",
                    help="flip the sign of the MCMC acceptance (must fail)")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("enumerate", help="list all matchings of a small instance")
    common(sp)
    sp.set_defaults(func=cmd_enumerate)

    sp = sub.add_parser("rate-table", help="child rate versus RB occupancy")
    common(sp, config_required=False)
    sp.set_defaults(func=cmd_rate_table)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
