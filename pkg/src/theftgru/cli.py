"""Command-line entry point: ``theftgru <command> --config run.json``."""

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .pipeline import COMMANDS, MissingArtifact
from .training import TrainingAborted

EXIT_CONFIG, EXIT_MISSING, EXIT_ABORTED, EXIT_DATA = 2, 3, 4, 5


def build_parser():
    p = argparse.ArgumentParser(prog="theftgru", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="run configuration (JSON)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--literal-layer-softmax", action="store_true",
                   help="per-layer softmax projections between GRU layers")
    p.add_argument("--adasyn-after-split", action="store_true",
                   help="oversample training rows only, after the 3:2 split")
    p.add_argument("--jobs", type=int, help="parallel search iterations")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.literal_layer_softmax:
        overrides["model.literal_layer_softmax"] = True
    if args.adasyn_after_split:
        overrides["preprocess.adasyn_after_split"] = True
    try:
        with open(args.config) as fp:
            cfg = load_config(fp.read(), overrides)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = COMMANDS[args.command](cfg)
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except TrainingAborted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ABORTED
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if args.command in ("report", "pipeline"):
        print(result, end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
