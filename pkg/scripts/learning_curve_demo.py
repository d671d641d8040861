#!/usr/bin/env python3
"""Training-size scaling: F1 versus the number of training subjects.

For each held-out subject, random subject subsets of each size are trained
and evaluated; linear and logarithmic trends are fitted to the mean curve.
"""

import argparse

from spdalign.dataio import synth_generate
from spdalign.evaluate import run_learning_curve
from spdalign.pipeline import PipelineConfig


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--subjects", type=int, default=8)
    parser.add_argument("--sizes", type=int, nargs="+", default=[3, 5, 7])
    parser.add_argument("--folds", type=int, default=5)
    parser.add_argument("--alignment", default="itsa",
                        choices=["none", "adaptive_m", "ts", "itsa"])
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    subjects = synth_generate(args.subjects, 32, 12, 96, seed=args.seed)
    config = PipelineConfig(alignment=args.alignment, seed=args.seed)
    report = run_learning_curve(subjects, config, sizes=tuple(args.sizes),
                                folds=args.folds, n_threads=args.threads)
    print(f"alignment: {args.alignment}, folds per size: {args.folds}\n")
    print(f"{'n_train':>8s} {'mean F1':>8s}")
    for point in report.aggregate["points"]:
        print(f"{point['size']:8d} {point['mean_f1']:8.2f}")
    fits = report.aggregate["fits"]
    print(f"\nlinear fit: {fits['linear']['intercept']:.2f} "
          f"+ {fits['linear']['slope']:.3f} * n")
    print(f"log fit:    {fits['log']['intercept']:.2f} "
          f"+ {fits['log']['slope']:.3f} * ln n")


if __name__ == "__main__":
    main()
