"""Command-line interface: ``ginarcp {simulate,segment,bench,fit}``.

Config files are YAML (or JSON) with two optional top-level keys::

    ga:          # any GaConfig field, e.g. n_islands: 4
      n_islands: 4
      subpop_size: 40
    scenario:    # simulate only: a registered name or an explicit spec
      n: 300
      taus: [120]
      segments:
        - {alphas: [0.5], gamma: 0.5}
        - {alphas: [0.2], gamma: 3.0, thinning: binomial, innovation: poisson}

Command-line flags override values from the file.
"""

from __future__ import annotations

import argparse
import json
import os
import secrets
import sys
import tempfile
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .estimate import SegmentWindow, fit_pqml
from .evaluate import Scenario, run_scenario
from .mdl import FeasibilityError
from .search import GaConfig, run_auto_pginarm_sa
from .sim import (
    McpGinarSpec, ParameterDomainError, SeriesParseError, SpecError, get_scenario,
    read_series_csv, simulate_mcp,
)

SCHEMA_VERSION = 1


class CliError(Exception):
    """A user-facing failure; reported without a traceback."""


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj):
    return json.dumps(obj, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def load_config(path):
    if path is None:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise CliError(f"config {path} is not valid YAML: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise CliError(f"config {path} must be a mapping")
    unknown = set(data) - {"ga", "scenario"}
    if unknown:
        raise CliError(f"unknown config sections: {sorted(unknown)}")
    return data


def _resolve_seed(args):
    if args.seed is not None:
        return args.seed
    return secrets.randbits(32)


def ga_config_from(args, config, seed):
    ga = dict(config.get("ga") or {})
    if getattr(args, "islands", None) is not None:
        ga["n_islands"] = args.islands
    if getattr(args, "max_generations", None) is not None:
        ga["max_generations"] = args.max_generations
    if getattr(args, "subpop_size", None) is not None:
        ga["subpop_size"] = args.subpop_size
    if getattr(args, "max_order", None) is not None:
        ga["P0"] = args.max_order
    if getattr(args, "workers", None) is not None:
        ga["workers"] = args.workers
    ga["seed"] = int(seed)
    try:
        cfg = GaConfig.from_dict(ga)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid GA configuration: {exc}") from None
    if "workers" not in ga:
        cfg = cfg.replace(workers=max(1, min(cfg.n_islands, os.cpu_count() or 1)))
    return cfg


def _read_series(path):
    try:
        return read_series_csv(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from None
    except SeriesParseError as exc:
        raise CliError(f"{path}: {exc}") from None


def _spec_from(args, config):
    raw = config.get("scenario")
    try:
        if args.scenario is not None or isinstance(raw, str):
            tmpl = get_scenario(args.scenario or raw)
            return tmpl.name, tmpl.build(args.n, burn_in=args.burn_in)
        if isinstance(raw, dict):
            d = dict(raw)
            if args.n is not None:
                d["n"] = args.n
            d.setdefault("burn_in", args.burn_in)
            return d.get("name", "custom"), McpGinarSpec.from_dict(d)
    except KeyError as exc:
        raise CliError(str(exc.args[0]) if exc.args else "missing key in scenario") from None
    except (SpecError, ParameterDomainError, TypeError, ValueError) as exc:
        raise CliError(f"invalid scenario spec: {exc}") from None
    raise CliError("simulate needs --scenario or a 'scenario' section in --config")


# ---------------------------------------------------------------- commands


def cmd_simulate(args):
    config = load_config(args.config)
    name, spec = _spec_from(args, config)
    seed = _resolve_seed(args)
    x = simulate_mcp(spec, np.random.default_rng(seed))
    out = Path(args.output)
    csv_text = "x\n" + "".join(f"{int(v)}\n" for v in x)
    truth = {
        "schema_version": SCHEMA_VERSION,
        "scenario": name,
        "seed": seed,
        "n": spec.n,
        "taus": list(spec.taus),
        "lambdas": list(spec.lambdas),
        "orders": [s.order for s in spec.segments],
        "segments": [s.to_dict() for s in spec.segments],
        "burn_in": spec.burn_in,
    }
    _atomic_write(out, csv_text)
    _atomic_write(truth_path(out), _json_text(truth))
    return 0


def truth_path(csv_path):
    p = Path(csv_path)
    return p.with_name(p.stem + ".truth.json")


def cmd_segment(args):
    config = load_config(args.config)
    x = _read_series(args.input)
    seed = _resolve_seed(args)
    cfg = ga_config_from(args, config, seed)
    if args.budget_seconds is not None:
        cfg = cfg.replace(budget_seconds=args.budget_seconds)
    log = open(args.log, "w", encoding="utf-8") if args.log else None
    try:
        res = run_auto_pginarm_sa(x, cfg, log=log)
    except FeasibilityError as exc:
        raise CliError(f"cannot segment {args.input}: {exc}") from None
    finally:
        if log:
            log.close()
    report = {"schema_version": SCHEMA_VERSION, "input": str(args.input), "n": int(x.size),
              "seed": seed, "config": cfg.to_dict(), **res.to_dict()}
    _atomic_write(args.output, _json_text(report))
    if args.plot_data:
        starts = set(res.segmentation.taus)
        seg_id = np.searchsorted(np.asarray(res.segmentation.taus, dtype=int),
                                 np.arange(x.size), side="right")
        lines = ["t,x,segment,change_point\n"]
        lines += [f"{t},{int(v)},{int(seg_id[t]) + 1},{int(t in starts)}\n"
                  for t, v in enumerate(x)]
        _atomic_write(args.plot_data, "".join(lines))
    return 0


def cmd_bench(args):
    config = load_config(args.config)
    try:
        tmpl = get_scenario(args.scenario)
    except KeyError as exc:
        raise CliError(str(exc.args[0])) from None
    seed = _resolve_seed(args)
    cfg = ga_config_from(args, config, seed)
    scen = Scenario.from_template(tmpl, n=args.n, reps=args.reps, ga_config=cfg)
    seeds = [seed + i for i in range(args.reps)]
    report = run_scenario(scen, seeds, budget_seconds=args.budget_seconds)
    prefix = Path(args.output)
    tmp_csv = prefix.with_suffix(".csv")
    report.write_csv(str(tmp_csv) + ".part")
    os.replace(str(tmp_csv) + ".part", tmp_csv)
    agg = dict(schema_version=SCHEMA_VERSION, seed=seed, config=cfg.to_dict(), **report.to_dict())
    _atomic_write(prefix.with_suffix(".json"), _json_text(agg))
    return 0


def cmd_fit(args):
    x = _read_series(args.input)
    try:
        fit = fit_pqml(SegmentWindow(x, 0, x.size, args.order))
    except ValueError as exc:
        raise CliError(f"cannot fit order {args.order}: {exc}") from None
    report = {"schema_version": SCHEMA_VERSION, "input": str(args.input), "n": int(x.size),
              **fit.to_dict()}
    _atomic_write(args.output, _json_text(report))
    return 0


# ---------------------------------------------------------------- parser


def _add_ga_flags(p):
    p.add_argument("--config", help="YAML config file (see module docstring for the schema)")
    p.add_argument("--seed", type=int, help="master seed; a random one is drawn and reported if omitted")
    p.add_argument("--islands", type=int, help="number of GA islands (NI)")
    p.add_argument("--subpop-size", type=int, help="chromosomes per island")
    p.add_argument("--max-generations", type=int)
    p.add_argument("--max-order", type=int, help="largest admissible segment order (P0)")
    p.add_argument("--workers", type=int, help="threads evolving islands in parallel")
    p.add_argument("--budget-seconds", type=float, help="wall-clock budget")


def build_parser():
    parser = argparse.ArgumentParser(prog="ginarcp", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a piecewise GINAR series")
    p.add_argument("--scenario", help="registered scenario name")
    p.add_argument("--config", help="YAML config with a 'scenario' section")
    p.add_argument("--n", type=int, help="series length")
    p.add_argument("--burn-in", type=int, default=500)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", required=True, help="CSV path; a .truth.json sidecar is written next to it")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("segment", help="estimate change-points, orders and parameters")
    p.add_argument("--input", required=True, help="single-column CSV with header")
    p.add_argument("--output", required=True, help="JSON report path")
    p.add_argument("--plot-data", help="optional CSV of the series with segment labels")
    p.add_argument("--log", help="optional NDJSON file of per-generation records")
    _add_ga_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("bench", help="replication study on a registered scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--n", type=int)
    p.add_argument("--output", required=True, help="output prefix; writes PREFIX.csv and PREFIX.json")
    _add_ga_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fit", help="single-segment PQML fit of a whole series")
    p.add_argument("--input", required=True)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "reps", 0) is not None and getattr(args, "reps", 0) < 0:
        parser.error("--reps must be non-negative")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"ginarcp {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ginarcp {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
