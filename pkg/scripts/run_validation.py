#!/usr/bin/env python3
"""Run the statistical/structural self-check suite on a few configurations
and print one line per check.

Usage:
    python scripts/run_validation.py [--trials N] [--seed S]
"""

import argparse
import sys

sys.path.insert(0, "src")

from cachecast.experiments import validate_system
from cachecast.system import SystemConfig, snr_from_db


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    configs = [
        ("gain2-b4-0dB", SystemConfig.from_gain(2, 4, snr_from_db(0.0))),
        ("gain4-b1-0dB", SystemConfig.from_gain(4, 1, snr_from_db(0.0))),
        ("gain4-b6-10dB", SystemConfig.from_gain(4, 6, snr_from_db(10.0))),
    ]
    all_ok = True
    for label, config in configs:
        report = validate_system(config, num_trials=args.trials, base_seed=args.seed)
        for check in report.checks:
            status = "PASS" if check.passed else "FAIL"
            print(f"[{status}] {label} :: {check.name}: measured {check.measured:.3e} "
                  f"vs limit {check.limit:.3e}")
        all_ok &= report.passed
    return 0 if all_ok else 1


if __name__ == "__main__":
    sys.exit(main())
