"""``adaprelora`` command line.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""
import argparse
import logging
import sys

from . import __version__
from .errors import ConfigError

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2




def build_parser():
    parser = argparse.ArgumentParser(prog="adaprelora", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--out", default="runs", help="output directory for CSV files (default: runs)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for grid cells (default: 1)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the benchmark grid described by a config file")
    run.add_argument("config", help="path to a run configuration")

    verify = sub.add_parser("verify", help="run the seeded property suite")
    verify.add_argument("--full", action="store_true", help="200 seeds per property instead of 20")
    verify.add_argument("--only", action="append", metavar="NAME", help="run only the named property")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.threads < 1:
        parser.error("--threads must be at least 1")

    if args.command == "verify":
        from .harness.verify import PROPERTY_NAMES, cmd_verify

        unknown = sorted(set(args.only or ()) - set(PROPERTY_NAMES))
        if unknown:
            parser.error(f"unknown property {unknown[0]!r}; choose from {', '.join(PROPERTY_NAMES)}")
        return cmd_verify(full=args.full, stream=sys.stdout, names=args.only)

    from .harness import config
    from .harness.run import cmd_run

    try:
        cfg = config.load(args.config)
        return cmd_run(cfg, args.out, threads=args.threads, stream=sys.stdout)
    except ConfigError as exc:
        print(f"adaprelora: config error in {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
