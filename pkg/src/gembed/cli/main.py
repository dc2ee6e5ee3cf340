"""
Command-line entry point: gembed {preprocess,train,eval,simulate-ordering}.
"""

import argparse
import logging
import sys
from typing import List, Optional

from ..ordering.generators import ORDERINGS
from ..utils.errors import GembedError
from ..utils.utils import configure_logging
from .commands import cmd_eval, cmd_preprocess, cmd_simulate, cmd_train
from .config import list_presets, load_run_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_INTERNAL_ERROR = 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML run configuration")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="Override one config key, e.g. --set training.lr=0.05 (repeatable)",
    )
    parser.add_argument("--preset", help=f"Benchmark preset: {', '.join(list_presets())}")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--dataset-dir", help="Shortcut for --set dataset_dir=...")
    parser.add_argument("--run-dir", help="Shortcut for --set run_dir=...")
    parser.add_argument("--no-progress", action="store_true", help="Hide progress bars")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gembed",
        description="Out-of-core training and evaluation of multi-relation graph embeddings",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pre = sub.add_parser("preprocess", help="Ingest, partition and bucket an edge list")
    _add_common(pre)
    pre.add_argument("--force", action="store_true", help="Overwrite an existing dataset")
    pre.add_argument("--synthetic", action="store_true", help="Generate dataset.synthetic instead of reading files")

    train = sub.add_parser("train", help="Train embeddings on a preprocessed dataset")
    _add_common(train)
    train.add_argument("--epochs", type=int)
    train.add_argument("--staleness-bound", type=int, help="Pipeline bound; 1 trains bit-identically to sync")
    train.add_argument("--seed", type=int, help="Training seed")

    ev = sub.add_parser("eval", help="Evaluate link prediction on a split")
    _add_common(ev)
    ev.add_argument("--checkpoint", help="Checkpoint directory (default: the dataset's current parameters)")
    ev.add_argument("--split", choices=["train", "valid", "test"])
    ev.add_argument("--assert-mrr-min", type=float, help="Exit with code 1 when MRR is below this value")

    sim = sub.add_parser("simulate-ordering", help="Swap counts and IO of bucket orderings")
    sim.add_argument("-p", "--partitions", type=int, nargs="+", required=True)
    group = sim.add_mutually_exclusive_group(required=True)
    group.add_argument("-c", "--capacity", type=int, nargs="+")
    group.add_argument("--capacity-fraction", type=float, help="c = max(2, round(p * fraction))")
    sim.add_argument(
        "--kind", nargs="+", default=["elimination", "hilbert"],
        choices=[k for k in ORDERINGS if k != "sequential"],
    )
    sim.add_argument("--seed", type=int, nargs="+", default=[0])
    sim.add_argument("--partition-bytes", type=int, default=1)
    sim.add_argument("--output", help="CSV file (printed when omitted)")
    sim.add_argument("--trace", help="Per-step buffer trace CSV of the first valid configuration")
    sim.add_argument("--log-level")
    return parser


def _overrides(args: argparse.Namespace) -> List[str]:
    out = list(args.overrides)
    if args.log_level:
        out.append(f"log_level={args.log_level}")
    if args.dataset_dir:
        out.append(f"dataset_dir={args.dataset_dir}")
    if args.run_dir:
        out.append(f"run_dir={args.run_dir}")
    if args.no_progress:
        out.append("show_progress=false")
    if args.command == "train":
        if args.epochs is not None:
            out.append(f"training.epochs={args.epochs}")
        if args.staleness_bound is not None:
            out.append(f"pipeline.bound={args.staleness_bound}")
        if args.seed is not None:
            out.append(f"training.seed={args.seed}")
    return out


def run(args: argparse.Namespace) -> None:
    if args.command == "simulate-ordering":
        configure_logging(args.log_level)
        frame = cmd_simulate(
            args.partitions, args.capacity, args.capacity_fraction, args.kind, args.seed,
            args.partition_bytes, args.output, args.trace,
        )
        if not args.output:
            print(frame.to_string(index=False))
        return

    config = load_run_config(args.config, _overrides(args), args.preset)
    configure_logging(config.log_level)
    if args.command == "preprocess":
        cmd_preprocess(config, force=args.force, synthetic=args.synthetic)
    elif args.command == "train":
        cmd_train(config)
    elif args.command == "eval":
        cmd_eval(config, args.checkpoint, args.split, args.assert_mrr_min)


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one command and map failures to exit codes 1 (user) or 2 (internal)."""
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except (FileNotFoundError, FileExistsError) as e:
        print(f"❌ {e}")
        return EXIT_USER_ERROR
    except GembedError as e:
        print(f"❌ {e}")
        if isinstance(e, ValueError):
            return EXIT_USER_ERROR
        logger.debug("internal error", exc_info=True)
        return EXIT_INTERNAL_ERROR
    except ValueError as e:
        print(f"❌ {e}")
        return EXIT_USER_ERROR
    except KeyboardInterrupt:
        print("🛑 Interrupted")
        return EXIT_INTERNAL_ERROR
    except Exception as e:
        print(f"❌ Unexpected error: {e}")
        logger.exception("command %s failed", args.command)
        return EXIT_INTERNAL_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
