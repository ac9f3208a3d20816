"""Command line entry point: ``run``, ``validate`` and ``export``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config, preset, validate_config
from .experiment import export_maps, load_state, run_experiment


def _parser():
    p = argparse.ArgumentParser(prog="memlstm", description="Memristor crossbar LSTM simulator")
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train and write artifacts")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="airline or gait-synthetic")
    src.add_argument("--config", help="JSON config file")
    run.add_argument("--seed", type=int)
    run.add_argument("--epochs", type=int)
    run.add_argument("--out", default="out", help="output directory (default: out)")

    val = sub.add_parser("validate", help="check a config file")
    val.add_argument("--config", required=True)

    exp = sub.add_parser("export", help="write maps from a saved state")
    exp.add_argument("--state", required=True, help="state.json from a previous run")
    exp.add_argument("--out", required=True)
    return p


def _run(args):
    cfg = preset(args.preset) if args.preset else load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.epochs is not None:
        cfg["epochs"] = args.epochs
    metrics = run_experiment(cfg, args.out)
    for k in sorted(metrics):
        print(f"{k}: {metrics[k]}")
    print(f"artifacts in {args.out}")


def _validate(args):
    errors = validate_config(load_config(args.config))
    if errors:
        for e in errors:
            print(f"violation: {e}")
        return 1
    print(f"{args.config}: ok")
    return 0


def _export(args):
    cfg, hw = load_state(args.state)
    for f in export_maps(hw.xbar, hw.mappings, args.out, hw.net.lstm.wcodec, cfg["seed"]):
        print(f)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            _run(args)
        elif args.command == "validate":
            return _validate(args)
        else:
            _export(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
