"""Command-line entry point: ``branchqd <experiment> --config cfg.json``."""

from __future__ import annotations

import argparse
import logging
import sys

from .experiments import EXPERIMENTS, RUNNERS, ConfigError, ExperimentConfig

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("branchqd")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="branchqd", description="Branching-state and discord experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=_u64, default=None, help="base seed (overrides the config)")
        p.add_argument("--out", default=None, help="output directory (overrides the config)")
        p.add_argument("--threads", type=int, default=1, help="worker processes, 0 = one per CPU")
        p.add_argument("--log-level", choices=sorted(LOG_LEVELS), default="warn")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=LOG_LEVELS[args.log_level], format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 0:
        print("error: --threads must be >= 0", file=sys.stderr)
        return 2
    try:
        cfg = ExperimentConfig.load(args.config)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if cfg.experiment != args.command:
        print(f"error: {cfg.source}: config is for '{cfg.experiment}', not '{args.command}'", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output = args.out
    log.info("running %s -> %s (seed %d)", cfg.experiment, cfg.output, cfg.seed)
    RUNNERS[cfg.experiment](cfg, threads=args.threads)
    return 0


if __name__ == "__main__":
    sys.exit(main())
