"""Command-line entry point.

Subcommands: synth, train, eval, baseline, ablate, report.  Exit codes:
0 success, 1 validation error (bad flags, config, or data), 2 runtime
failure.  IMOT_LOG={error,info,debug} controls verbosity on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import ConfigError, load_config
from .datasets import DatasetError, MotionProfile, generate_dataset
from .metrics import read_metrics_csv
from .training import (
    TrainingDiverged,
    ablate_run,
    baseline_run,
    evaluate_run,
    train_run,
    _emit_method_reports,
)

log = logging.getLogger("imot")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; the contract wants 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="imot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--profiles", required=True, help="JSON list of motion profiles")
    p.add_argument("--out", required=True)
    p.add_argument("--rate", type=int, choices=(100, 200), required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate a checkpoint plus baselines")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true", help="also render CDF plots")

    p = sub.add_parser("baseline", help="run a classical baseline")
    p.add_argument("--method", choices=("sins", "pdr"), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true")

    p = sub.add_parser("ablate", help="train/evaluate a toggle matrix")
    p.add_argument("--config", required=True)
    p.add_argument("--matrix", required=True, help="JSON list of config overrides")
    p.add_argument("--data", required=True, help="directory with train/ and test/")
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="aggregate metric CSVs into reports")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true")
    return parser


def _load_json(path, what):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DatasetError(f"{what} file not found: {path}")
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{what} file {path} is not valid JSON: {exc}")


def _cmd_synth(args) -> int:
    doc = _load_json(args.profiles, "profiles")
    if isinstance(doc, dict):
        doc = doc.get("profiles")
    if not isinstance(doc, list) or not doc:
        raise DatasetError(f"{args.profiles} must hold a non-empty JSON list of profiles")
    profiles = [MotionProfile.from_dict(entry) for entry in doc]
    generate_dataset(profiles, args.rate, args.seed, out_dir=args.out)
    log.info("wrote %d sequences to %s", len(profiles), args.out)
    print(args.out)
    return 0


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    report = train_run(cfg, args.data, args.out)
    log.info("best validation j_vel %.6g after %d steps",
             report["best_val_j_vel"], report["steps"])
    print(os.path.join(args.out, "checkpoint.zip"))
    return 0


def _cmd_eval(args) -> int:
    evaluate_run(args.checkpoint, args.data, args.out, svg=args.svg)
    print(os.path.join(args.out, "summary.csv"))
    return 0


def _cmd_baseline(args) -> int:
    baseline_run(args.method, args.data, args.out, svg=args.svg)
    print(os.path.join(args.out, f"metrics_{args.method}.csv"))
    return 0


def _cmd_ablate(args) -> int:
    cfg = load_config(args.config)
    matrix = _load_json(args.matrix, "matrix")
    if not isinstance(matrix, list) or not matrix:
        raise DatasetError(f"{args.matrix} must hold a non-empty JSON list of override rows")
    for row in matrix:
        if not isinstance(row, dict):
            raise DatasetError("every matrix row must be a JSON object")
    ablate_run(cfg, matrix, args.data, args.out)
    print(os.path.join(args.out, "ablation.csv"))
    return 0


def _cmd_report(args) -> int:
    merged = {}
    for dirpath, _, filenames in os.walk(args.in_dir):
        for name in sorted(filenames):
            if not (name.startswith("metrics_") and name.endswith(".csv")):
                continue
            method = name[len("metrics_") : -len(".csv")]
            rows = read_metrics_csv(os.path.join(dirpath, name))
            rel = os.path.relpath(dirpath, args.in_dir)
            prefix = "" if rel == "." else rel.replace(os.sep, "/") + "/"
            merged.setdefault(method, {}).update(
                {prefix + traj: vals for traj, vals in rows.items()}
            )
    if not merged:
        raise DatasetError(f"no metrics_*.csv files found under {args.in_dir}")
    os.makedirs(args.out, exist_ok=True)
    for method, rows in sorted(merged.items()):
        _emit_method_reports(args.out, method, rows, svg=args.svg)
    print(args.out)
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "baseline": _cmd_baseline,
    "ablate": _cmd_ablate,
    "report": _cmd_report,
}

_VALIDATION_ERRORS = (ConfigError, DatasetError, ValueError)


def main(argv=None) -> int:
    level = os.environ.get("IMOT_LOG", "info").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(
        stream=sys.stderr,
        level=levels.get(level, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except _VALIDATION_ERRORS as exc:
        print(f"imot {args.command}: {exc}", file=sys.stderr)
        return 1
    except TrainingDiverged as exc:
        print(f"imot {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure contract
        log.debug("unhandled failure", exc_info=True)
        print(f"imot {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
