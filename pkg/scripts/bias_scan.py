"""Bias of the Langevin time average of |xi|^2 as the step size shrinks.

    python3 scripts/bias_scan.py --reps 20

Holds K * delta fixed so the O(1/(K delta)) variance term is constant and the
O(delta) discretisation bias is what changes; prints the fitted log-log slope.
"""

import argparse

import numpy as np

from sagd.core_math import RngStream
from sagd.langevin import bias_scan


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--deltas", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.025])
    ap.add_argument("--kdelta", type=float, default=1e4)
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    ks = [int(round(args.kdelta / d)) for d in args.deltas]
    rows = bias_scan(args.deltas, ks, args.reps, RngStream(args.seed))
    print("delta      K        bias       mse")
    for d, k, b, m, _ in rows:
        print(f"{d:<8g} {k:<8d} {b:+.5f}  {m:.2e}")
    slope = np.polyfit(np.log(args.deltas), np.log(np.abs([r[2] for r in rows])), 1)[0]
    print(f"log-log slope of |bias| on delta: {slope:.3f}")


if __name__ == "__main__":
    main()
