#!/usr/bin/env python3
"""Track the rescaled surfaces (f_t - Id)/t against the singly periodic
comparison surface as t -> 0 and report the convergence rate.

    python scripts/blowup_study.py --m 1 --t 1e-2 5e-3 2.5e-3 1.25e-3
"""

import argparse

from dpwlawson.geometry import blowup_compare
from dpwlawson.solver import SolveOptions


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--m", type=int, default=1)
    ap.add_argument("--t", type=float, nargs="+",
                    default=[1e-2, 5e-3, 2.5e-3])
    args = ap.parse_args()

    rep = blowup_compare(args.m, t_values=tuple(args.t), opts=SolveOptions())
    print("t values:   ", " ".join(f"{t:.3e}" for t in rep.t_values))
    print("deviations: ", " ".join(f"{d:.3e}" for d in rep.deviations))
    print("ratios:     ", " ".join(f"{r:.3f}" for r in rep.ratios))
    print("(a ratio of 2 per halving of t is first-order convergence)")


if __name__ == "__main__":
    main()
