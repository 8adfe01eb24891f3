"""Command-line entry point.

Verbs: prep, train-qnn, train-qsvm, fuse-eval, noise-sweep, print-config.
Exit codes: 0 success, 2 config error, 3 missing artifact, 4 data error.
"""

from __future__ import annotations

import argparse
import sys

from . import pipeline
from .config import RunConfig, apply_overrides, format_config, load_config
from .errors import ConfigError, DataError, MissingArtifactError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qfuse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for verb in ("prep", "train-qnn", "train-qsvm", "fuse-eval", "noise-sweep", "print-config"):
        cmd = sub.add_parser(verb)
        cmd.add_argument("--config", default=None, help="flat key-value config file")
        cmd.add_argument("--seed", type=int, default=None, help="override every stage seed")
        cmd.add_argument("--out", default=None, help="override the output directory")
    return parser


def _load(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    return apply_overrides(config, seed=args.seed, out=args.out)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _load(args)
        if args.command == "print-config":
            sys.stdout.write(format_config(config))
        elif args.command == "prep":
            pipeline.cmd_prep(config)
        elif args.command == "train-qnn":
            pipeline.cmd_train_qnn(config)
        elif args.command == "train-qsvm":
            pipeline.cmd_train_qsvm(config)
        elif args.command == "fuse-eval":
            pipeline.cmd_fuse_eval(config)
        elif args.command == "noise-sweep":
            pipeline.cmd_noise_sweep(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MissingArtifactError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
