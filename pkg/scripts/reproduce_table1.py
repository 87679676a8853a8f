"""Relative optimality gap of the simple policy for two stations, buffers (B, 0).

Prints B, the gap, log10 of the gap and the reference value from
configs/table1.json, then a least-squares decay fit over B = 10..50.
"""
import pathlib

import numpy as np

from tandem_pricing.experiments import ExperimentConfig, sweep_b1

ROOT = pathlib.Path(__file__).resolve().parents[1]


def main():
    exp = ExperimentConfig.load(ROOT / "configs" / "table1.json")
    print(f"a* = {sweep_b1(exp)[0].simple_price:g}")
    print(f"{'B':>5} {'gap':>12} {'log10':>7} {'reference':>12}")
    for r in sweep_b1(exp):
        print(f"{r.axis_value:>5} {r.relative_gap:>12.4e} {r.log10_relative_gap:>7.2f} "
              f"{r.reference_gap:>12.4e}")

    exp.grid = tuple(range(10, 51))
    rows = sweep_b1(exp)
    B = np.array([r.axis_value for r in rows], float)
    y = np.log10([r.relative_gap for r in rows])
    slope, icpt = np.polyfit(B, y, 1)
    r2 = 1 - ((y - slope * B - icpt) ** 2).sum() / ((y - y.mean()) ** 2).sum()
    print(f"log10(gap) ~ {icpt:.3f} + {slope:.5f} B over B=10..50 (R^2 = {r2:.5f})")


if __name__ == "__main__":
    main()
