#!/usr/bin/env python3
"""
Reproduce the rejection-rate table for NL(0.5, 2) data.

This script:
1. Runs every method (e-mixture, e-GREE, p-Fisher, p-Simes, e-batch, p-batch)
   against the four shape classes with n=100 and threshold 20
2. Compares each rate with its reference value, within 3 binomial standard errors
3. Flags the p-Fisher cells for the unimodal classes instead of asserting them
4. Writes the full table to data/processed/rejection_table.csv

Usage:
    uv run python scripts/reproduce_rejection_table.py
    uv run python scripts/reproduce_rejection_table.py --runs 200 --jobs 4
"""

import argparse
import math
import sys
from pathlib import Path

import pandas as pd

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from config import get_settings  # noqa: E402
from evidence import Hypothesis, MeanVarSpec, ShapeClass  # noqa: E402
from simharness import NL, DecisionRule, Method, SimConfig, result_row, run_rejection_experiment  # noqa: E402

OUTPUT_PATH = Path(__file__).resolve().parent.parent / "data" / "processed" / "rejection_table.csv"

METHODS = (Method.EMIXTURE, Method.EGREE, Method.PFISHER, Method.PSIMES, Method.EBATCH, Method.PBATCH)
SHAPES = (ShapeClass.PLAIN, ShapeClass.SYMMETRIC, ShapeClass.UNIMODAL, ShapeClass.UNIMODAL_SYMMETRIC)

# Reference rates at n=100, threshold 20, one row per shape class in METHODS order
EXPECTED = {
    ShapeClass.PLAIN: (0.419, 0.274, 0.000, 0.000, 0.639, 0.664),
    ShapeClass.SYMMETRIC: (0.998, 0.990, 0.000, 0.000, 0.900, 0.900),
    ShapeClass.UNIMODAL: (0.419, 0.274, 0.006, 0.000, 0.639, 0.664),
    ShapeClass.UNIMODAL_SYMMETRIC: (0.998, 0.990, 0.763, 0.000, 0.900, 0.900),
}

# Cells whose reference value depends on an unstated p-variable branch
FLAGGED = {
    (ShapeClass.UNIMODAL, Method.PFISHER),
    (ShapeClass.UNIMODAL_SYMMETRIC, Method.PFISHER),
}
FLAG_TOLERANCE = 0.05


def print_header(title: str) -> None:
    """Print a formatted section header."""
    print("\n" + "=" * 70)
    print(f"{title}")
    print("=" * 70)


def tolerance(expected: float, runs: int) -> float:
    # a floor keeps reference rates of 0.000 or 1.000 from demanding exact equality
    return 3.0 * math.sqrt(max(expected * (1.0 - expected), 0.01 * 0.99) / runs)


def run_table(runs: int, n: int, threshold: float, seed: int, jobs: int, progress: bool) -> pd.DataFrame:
    """Run every method x shape cell and return one row per cell."""
    generator = NL(0.5, 2.0)
    spec = MeanVarSpec(0.0, 1.0)
    rows = []
    for shape in SHAPES:
        for method, expected in zip(METHODS, EXPECTED[shape]):
            config = SimConfig(
                generator=generator,
                n=n,
                runs=runs,
                threshold=threshold,
                seed=seed,
                method=method,
                hypothesis=Hypothesis(spec, shape),
                decision=DecisionRule.FINAL,
            )
            result = run_rejection_experiment(config, jobs=jobs, progress=progress)
            row = result_row(config, result)
            row["expected"] = expected
            row["tolerance"] = FLAG_TOLERANCE if (shape, method) in FLAGGED else tolerance(expected, runs)
            row["flagged"] = (shape, method) in FLAGGED
            rows.append(row)
    return pd.DataFrame(rows)


def report(table: pd.DataFrame) -> bool:
    """Print expected vs actual with a status mark per cell."""
    print_header("Rejection rates, NL(0.5, 2)")
    print(f"{'Shape':<11} {'Method':<10} {'Expected':<10} {'Actual':<10} {'Status':<10}")
    print("-" * 55)

    all_passed = True
    for row in table.itertuples(index=False):
        within = abs(row.rate - row.expected) <= row.tolerance
        if row.flagged:
            status = "✓" if within else "⚠ flagged"
        else:
            status = "✓" if within else "✗"
            all_passed = all_passed and within
        print(f"{row.shape:<11} {row.method:<10} {row.expected:<10.3f} {row.rate:<10.3f} {status:<10}")

    print("-" * 55)
    return all_passed


def main():
    settings = get_settings()
    parser = argparse.ArgumentParser(description="Reproduce the NL(0.5, 2) rejection-rate table")
    parser.add_argument("--runs", type=int, default=1000, help="Replicates per cell (default: 1000)")
    parser.add_argument("--n", type=int, default=100, help="Observations per replicate (default: 100)")
    parser.add_argument("--threshold", type=float, default=20.0, help="Rejection threshold (default: 20)")
    parser.add_argument("--seed", type=int, default=settings.seed, help="Master seed")
    parser.add_argument("--jobs", type=int, default=settings.jobs, help="Worker processes")
    parser.add_argument("--output", type=Path, default=OUTPUT_PATH, help="CSV destination")
    args = parser.parse_args()

    print(f"Running {len(METHODS) * len(SHAPES)} cells with {args.runs} runs each (seed {args.seed})")
    table = run_table(args.runs, args.n, args.threshold, args.seed, args.jobs, settings.progress)
    all_passed = report(table)

    args.output.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(args.output, index=False)
    print(f"\nWrote {len(table)} rows to {args.output}")

    if all_passed:
        print("\n✓ All asserted cells within tolerance")
        return 0
    print("\n✗ Some cells fall outside tolerance")
    return 1


if __name__ == "__main__":
    sys.exit(main())
