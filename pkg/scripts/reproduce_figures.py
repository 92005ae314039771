#!/usr/bin/env python3
"""Reproduce every figure-data preset into an output directory.

Usage:
    python scripts/reproduce_figures.py --out results/figures [--trials N] [--seed S]

Each preset writes one CSV (plot with any external tool). At the default
100k trials the full set takes a few minutes; pass --trials 10000 for a
quick pass.
"""

import argparse
import sys
import time

sys.path.insert(0, "src")

from cachecast.experiments import FIGURE_PRESETS, run_figure


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/figures")
    parser.add_argument("--trials", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--only", nargs="*", choices=sorted(FIGURE_PRESETS),
                        help="subset of presets to run")
    args = parser.parse_args()

    names = args.only or sorted(FIGURE_PRESETS)
    for name in names:
        start = time.perf_counter()
        path = run_figure(name, args.out, num_trials=args.trials, base_seed=args.seed)
        print(f"{name}: {path} ({time.perf_counter() - start:.1f}s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
