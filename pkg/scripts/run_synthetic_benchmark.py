"""Generate the shipped synthetic corpus and train/evaluate over several rotations.

    python3 scripts/run_synthetic_benchmark.py --out runs/bench --iterations 2000
"""
import argparse
import logging
import time
from pathlib import Path

import numpy as np

from binscan import dataset
from binscan.corpusgen import generate_default_corpus
from binscan.trainer import TrainConfig, class_order, fit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/bench")
    ap.add_argument("--count", type=int, default=120, help="samples per class")
    ap.add_argument("--test-per-class", type=int, default=15)
    ap.add_argument("--iterations", type=int, default=2000)
    ap.add_argument("--rotations", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    out = Path(args.out)
    start = time.perf_counter()
    generate_default_corpus(out / "corpus", args.count, args.seed)
    samples = dataset.balance(dataset.ingest(out / "corpus"), args.seed)
    classes = class_order(dataset.class_counts(samples))

    accs = []
    for k in range(args.rotations):
        train, test = dataset.split(samples, dataset.SplitPlan(args.seed, args.test_per_class, rotation=k))
        config = TrainConfig(iterations=args.iterations, seed=args.seed + k)
        _, report = fit(train, classes, config, eval_set=test)
        accs.append(100 * report.confusion.accuracy())
        print(f"rotation {k}: accuracy {accs[-1]:.2f}%  "
              f"loss {report.loss_first:.4f} -> {report.loss_last:.4f}  train {report.timings['train']:.0f}s")
        print(report.confusion.format())

    elapsed = time.perf_counter() - start
    print(f"\naccuracy mean {np.mean(accs):.2f}% min {min(accs):.2f}% "
          f"rotations >= 90%: {sum(a >= 90 for a in accs)}/{len(accs)}")
    print(f"wall time {elapsed / 60:.1f} min")


if __name__ == "__main__":
    main()
