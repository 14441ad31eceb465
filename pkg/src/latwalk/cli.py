"""Command line interface.

Subcommands:
  validate  check a config file, print aggregated errors
  run       execute a config, write results.json and CSV series
  presets   list built-in chain and IFS presets
  report    render a results CSV as a plain-text summary table

Exit codes: 0 pass, 1 validation or threshold failure, 2 runtime alarm.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, validate_config
from .presets import preset_names
from .runner import EXIT_VALIDATION, run_experiment


def _cmd_validate(args) -> int:
    try:
        cfg = validate_config(args.config)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"ok: kind={cfg.kind} seed={cfg.seed} replicas={cfg.replicas} "
          f"steps={cfg.steps}")
    return 0


def _cmd_run(args) -> int:
    try:
        cfg = validate_config(args.config)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.seed is not None:
        cfg.seed = args.seed
    if args.replicas is not None:
        cfg.replicas = args.replicas
    results, code = run_experiment(cfg, args.out_dir)
    print(json.dumps({
        "kind": results.get("kind"),
        "pass": results.get("pass"),
        "out_dir": args.out_dir,
    }))
    return code


def _cmd_presets(args) -> int:
    names = preset_names()
    print("chain presets:")
    for n in names["chains"]:
        print(f"  {n}")
    print("IFS presets:")
    for n in names["gdifs"]:
        print(f"  {n}")
    return 0


def _cmd_report(args) -> int:
    import csv

    with open(args.csv) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        print("empty series")
        return 0
    vals = [float(r["value"]) for r in rows]
    lo, hi = min(vals), max(vals)
    mean = sum(vals) / len(vals)
    print(f"{args.csv}: {len(vals)} samples")
    print(f"  first {vals[0]:.6g}  last {vals[-1]:.6g}")
    print(f"  min {lo:.6g}  mean {mean:.6g}  max {hi:.6g}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="latwalk",
        description="lattice random walk experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("presets", help="list built-in presets")
    p.set_defaults(fn=_cmd_presets)

    p = sub.add_parser("report", help="summarize a results CSV")
    p.add_argument("csv")
    p.set_defaults(fn=_cmd_report)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
