"""mapf-train: fine-tune a classifier on a benchmark image dataset and emit
per-split prediction files consumable by `mapf-bench evaluate`."""

from __future__ import annotations

import argparse
import logging
import sys

from .data import DataError
from .train import TrainConfig, TrainError, run_all

log = logging.getLogger("mapftrain")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mapf-train", description=__doc__)
    parser.add_argument("--manifest", required=True, help="dataset manifest csv")
    parser.add_argument("--out", default="train_out", help="output directory")
    parser.add_argument("--fraction", type=float, default=0.70, help="train fraction per split")
    parser.add_argument("--splits", type=int, default=10, help="number of random splits")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epochs", type=int, default=20)
    parser.add_argument("--lr", type=float, default=1e-4)
    parser.add_argument("--backbone", default="alexnet", help="alexnet or compact")
    parser.add_argument("--batch-size", type=int, default=8, dest="batch_size")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = TrainConfig(
            manifest=args.manifest,
            out_dir=args.out,
            fraction=args.fraction,
            splits=args.splits,
            seed=args.seed,
            epochs=args.epochs,
            lr=args.lr,
            backbone=args.backbone,
            batch_size=args.batch_size,
        )
        results = run_all(cfg)
    except (DataError, TrainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for k, outcome, path in results:
        print(
            f"split {k}: train_acc={outcome.train_accuracy:.3f} "
            f"test_acc={outcome.test_accuracy:.3f} -> {path}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
