"""``iono-lab`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import harness
from .config import ConfigError, ExperimentConfig, load

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iono-lab", description="Ionocraft yaw-control experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in harness.COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON experiment config (defaults apply when omitted)")
        s.add_argument("--seed", type=int, help="override the master seed")
        s.add_argument("--out", help="override the output directory")
        s.add_argument("--paper-scale", action="store_true", help=f"use {harness.PAPER_SCALE_SEEDS} seeds")
        s.add_argument("--force", action="store_true", help="overwrite existing training output")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "mbrl-eval":
            s.add_argument("--model", help="saved model file (overrides eval.model_path)")
    return p


def resolve_config(args) -> ExperimentConfig:
    cfg = load(args.config) if args.config else ExperimentConfig(experiment=args.command)
    cfg = replace(cfg, experiment=args.command)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg = replace(cfg, master_seed=args.seed)
    if args.out:
        cfg = replace(cfg, output_dir=args.out)
    if args.paper_scale:
        cfg = replace(cfg, mbrl=replace(cfg.mbrl, num_seeds=harness.PAPER_SCALE_SEEDS))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        if args.command == "mbrl-train":
            path = harness.cmd_mbrl_train(cfg, force=args.force)
        elif args.command == "mbrl-eval":
            path = harness.cmd_mbrl_eval(cfg, args.model)
        else:
            path = harness.COMMANDS[args.command](cfg)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
