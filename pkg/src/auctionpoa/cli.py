"""Command-line front end: ``auctionpoa {synth,curves,epoa,report}``."""
import argparse
import json
import os
import sys

from .dataset import load_dataset
from .epoa import (EmpiricalPoA, bootstrap_ci, compare_correlation_modes, report_from_dict,
                   reports_to_csv, reports_to_markdown)
from .exceptions import BidCapTooLow, ParseError, SpecError, ValidationError, ZeroRevenue
from .interim import BidGrid, estimate_curves
from .synth import SynthSpec, generate, write_synth
from .thresholds import build_thresholds, thresholds_to_csv

EXIT_OK, EXIT_INVALID, EXIT_CAP, EXIT_ZERO_REVENUE = 0, 2, 3, 4

# option name -> default when neither the flag nor --config sets it
DEFAULTS = {
    "seed": None,
    "grid_points": None,
    "value_cap": None,
    "value_points": 200,
    "mode": "joint",
    "mc_profiles": 200,
    "bootstrap": 0,
    "level": 0.9,
    "format": "md",
    "threads": None,
    "out": ".",
    "dataset_config": None,
    "input_format": None,
}


class UsageError(Exception):
    pass


def _parser():
    p = argparse.ArgumentParser(prog="auctionpoa", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, dataset=True):
        if dataset:
            sp.add_argument("dataset", help="auction log (JSONL or CSV)")
            sp.add_argument("--dataset-config", help="JSON sidecar with dataset settings")
            sp.add_argument("--input-format", choices=["jsonl", "csv"])
            sp.add_argument("--grid-points", type=int)
            sp.add_argument("--mode", choices=["joint", "independent", "both"])
            sp.add_argument("--mc-profiles", type=int)
            sp.add_argument("--seed", type=int)
            sp.add_argument("--threads", type=int)
        sp.add_argument("--config", help="JSON file with option overrides (flags win)")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("synth", help="generate a synthetic dataset from a spec file")
    sp.add_argument("spec")
    common(sp, dataset=False)

    sp = sub.add_parser("curves", help="interim curves and thresholds as CSV")
    common(sp)

    sp = sub.add_parser("epoa", help="empirical price of anarchy report")
    common(sp)
    sp.add_argument("--value-cap", type=float)
    sp.add_argument("--value-points", type=int)
    sp.add_argument("--bootstrap", type=int, help="bootstrap replicates (0 = off)")
    sp.add_argument("--level", type=float)
    sp.add_argument("--format", choices=["json", "csv", "md"])

    sp = sub.add_parser("report", help="render saved report JSON files as a table")
    sp.add_argument("reports", nargs="+")
    sp.add_argument("--format", choices=["json", "csv", "md"])
    sp.add_argument("--config")
    sp.add_argument("--out")
    return p


def _options(args):
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise UsageError("--config must contain a JSON object")
    opts = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        opts[key] = flag if flag is not None else cfg.get(key, default)
    if opts["threads"] is None:
        opts["threads"] = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1
    return opts


def _load(args, opts):
    path = args.dataset
    if not os.path.exists(path):
        raise UsageError(f"dataset not found: {path}")
    fmt = opts["input_format"] or ("csv" if path.lower().endswith(".csv") else "jsonl")
    config = {}
    side = opts["dataset_config"]
    if side is None:
        guess = os.path.splitext(path)[0] + ".config.json"
        side = guess if os.path.exists(guess) else None
    if side is not None:
        with open(side) as fh:
            config = json.load(fh)
    return load_dataset(path, format=fmt, config=config)


def _need_seed(opts, stochastic):
    if stochastic and opts["seed"] is None:
        raise UsageError("--seed is required for independent mode or bootstrap")


def _write(out_dir, name, text):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def cmd_synth(args, opts):
    with open(args.spec) as fh:
        spec = SynthSpec.from_json(fh.read())
    ds, truth = generate(spec)
    paths = write_synth(opts["out"], ds, truth, spec)
    for p in paths.values():
        print(p)
    return EXIT_OK


def cmd_curves(args, opts):
    modes = ["joint", "independent"] if opts["mode"] == "both" else [opts["mode"]]
    _need_seed(opts, "independent" in modes)
    ds = _load(args, opts)
    grid = BidGrid.for_dataset(ds, opts["grid_points"])
    for mode in modes:
        curves = estimate_curves(ds, grid, mode, opts["mc_profiles"], opts["seed"],
                                 n_jobs=opts["threads"])
        th = build_thresholds(curves, ds)
        suffix = "" if len(modes) == 1 else f"_{mode}"
        _write(opts["out"], f"curves{suffix}.csv", curves.to_csv())
        _write(opts["out"], f"thresholds{suffix}.csv", thresholds_to_csv(th, ds))
        diag = dict(curves.diagnostics, mode=mode, bid_cap=ds.bid_cap,
                    excluded_bidders=[b for b, t in zip(ds.bidder_ids, th) if t is None])
        _write(opts["out"], f"diagnostics{suffix}.json", json.dumps(diag, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def _table(named, fmt):
    return reports_to_csv(named) if fmt == "csv" else reports_to_markdown(named)


def cmd_epoa(args, opts):
    both = opts["mode"] == "both"
    _need_seed(opts, opts["mode"] != "joint" or opts["bootstrap"] > 0)
    ds = _load(args, opts)
    est = EmpiricalPoA(grid_points=opts["grid_points"], mode="joint" if both else opts["mode"],
                       mc_profiles=opts["mc_profiles"], value_cap=opts["value_cap"],
                       value_points=opts["value_points"],
                       random_state=opts["seed"] if opts["seed"] is not None else 0,
                       n_jobs=opts["threads"])
    seed = opts["seed"] if opts["seed"] is not None else 0
    named = []
    if both:
        reps = opts["bootstrap"] or 50
        cmp = compare_correlation_modes(est, ds, reps, opts["level"], seed, opts["threads"])
        for mode in ("joint", "independent"):
            rep = cmp[f"report_{mode}"]
            _write(opts["out"], f"report_{mode}.json", rep.to_json())
            named.append((mode, rep))
        summary = {k: v for k, v in cmp.items() if not k.startswith("report_")}
        _write(opts["out"], "comparison.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
        print(f"ordering_holds={summary['ordering_holds']}")
    else:
        rep = est.fit(ds).report_
        if opts["bootstrap"] > 0:
            cis, diag = bootstrap_ci(est, ds, opts["bootstrap"], opts["level"], seed,
                                     opts["threads"], point_report=rep)
            rep = rep.with_bootstrap(cis)
            rep.diagnostics.update(diag)
        _write(opts["out"], "report.json", rep.to_json())
        named.append((opts["mode"], rep))
    if opts["format"] != "json":
        _write(opts["out"], f"report.{opts['format']}", _table(named, opts["format"]))
    for name, rep in named:
        print(f"{name}: 1/EPoA = {rep.inv_epoa1:.4f}")
    return EXIT_OK


def cmd_report(args, opts):
    named = []
    for path in args.reports:
        with open(path) as fh:
            named.append((os.path.splitext(os.path.basename(path))[0], report_from_dict(json.load(fh))))
    if opts["format"] == "json":
        text = json.dumps({n: r.to_dict() for n, r in named}, sort_keys=True, indent=2) + "\n"
    else:
        text = _table(named, opts["format"])
    if getattr(args, "out", None) or opts["out"] != ".":
        _write(opts["out"], f"table.{opts['format']}", text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "curves": cmd_curves, "epoa": cmd_epoa, "report": cmd_report}


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        opts = _options(args)
        return COMMANDS[args.command](args, opts)
    except BidCapTooLow as e:
        print(f"error: {e}", file=sys.stderr)
        print(f"bidder: {e.bidder}", file=sys.stderr)
        return EXIT_CAP
    except ZeroRevenue as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ZERO_REVENUE
    except (ParseError, ValidationError, SpecError, UsageError, ValueError, TypeError,
            json.JSONDecodeError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
