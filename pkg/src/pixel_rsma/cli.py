"""Command line entry point ``pixel-rsma``.

Exit codes: 0 success, 1 configuration error, 2 I/O error (including a missing
codebook file), 3 failed selftest.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness, selftest
from .exceptions import ConfigError


def build_parser():
    parser = argparse.ArgumentParser(prog="pixel-rsma", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiments described by a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True, help="results CSV")
    run.add_argument("--no-timing", action="store_true",
                     help="write zero wall times so the CSV is byte-reproducible")

    train = sub.add_parser("train-codebook", help="train and save an antenna codebook")
    train.add_argument("--config", required=True)
    train.add_argument("--out", required=True, help="codebook file")

    sub.add_parser("selftest", help="run the built-in property checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "selftest":
            return 0 if selftest.run() else 3
        if args.command == "train-codebook":
            harness.train_codebook_cmd(args.config, args.out)
            return 0
        cfg = harness.load_config(args.config)
        rows = []
        for spec in harness.spec_from_config(cfg, args.out):
            rows += harness.run_experiment(spec)
        harness.write_results(rows, args.out, timing=not args.no_timing)
        return 0
    except ConfigError as exc:
        print(f"pixel-rsma: config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        # includes MissingCodebook
        print(f"pixel-rsma: I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
