"""Run every experiment driver and write one tidy CSV per experiment.

Usage: python scripts/run_experiments.py --out results/ [--timings]
"""
import argparse
from pathlib import Path

from spline_radon import experiments
from spline_radon.fourier_algorithm import GriddingConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results", help="output directory")
    ap.add_argument("--timings", action="store_true", help="add wall-clock columns to the complexity table")
    ap.add_argument("--r", type=int, default=1, help="base order r in k = 2**l * r")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tables = {
        "convergence_l": experiments.convergence_l(r=args.r),
        "sinc_limit": experiments.sinc_limit(),
        "jitter_sweep": experiments.jitter_sweep(),
        "complexity": experiments.complexity(cfg=GriddingConfig(), timings=args.timings),
    }
    for name, rows in tables.items():
        path = out / f"{name}.csv"
        path.write_text(experiments.rows_to_csv(rows))
        print(f"{path}: {len(rows)} rows")


if __name__ == "__main__":
    main()
