#!/usr/bin/env python3
"""Sweep the solved family over a ladder of k and tabulate both area paths.

Writes a CSV with the residue and quadrature areas plus the rescaled
first-order remainder r(k) = (1 - area / (4 pi (m+1))) * 2 (k+1), which
approaches kappa_m like k^-2.

    python scripts/area_sweep.py --m 1 --k-min 10 --k-max 160 --points 6
"""

import argparse
from pathlib import Path

import numpy as np

from dpwlawson.geometry import area_quadrature, area_residue
from dpwlawson.solver import SolveOptions, continuation_solve, kappa, pack_unknowns


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--m", type=int, default=1)
    ap.add_argument("--k-min", type=int, default=10)
    ap.add_argument("--k-max", type=int, default=160)
    ap.add_argument("--points", type=int, default=6)
    ap.add_argument("--quad-resolution", type=int, default=0,
                    help="0 skips the quadrature column")
    ap.add_argument("--out", default="area_sweep.csv")
    args = ap.parse_args()

    opts = SolveOptions()
    km = kappa(args.m)
    ks = np.unique(np.geomspace(args.k_min, args.k_max, args.points).astype(int))
    rows = ["m,k,t,area_residue,area_quadrature,r_k,kappa_m"]
    start = None
    for k in ks:
        res = continuation_solve(args.m, int(k), opts, start=start)
        start = (res.params.t, pack_unknowns(res.params))
        ar = area_residue(res.params, args.m, int(k))
        aq = (area_quadrature(res.params, args.m, int(k),
                              resolution=args.quad_resolution)
              if args.quad_resolution else float("nan"))
        r_k = (1.0 - ar / (4.0 * np.pi * (args.m + 1))) * 2.0 * (k + 1)
        rows.append(f"{args.m},{k},{res.params.t!r},{ar!r},{aq!r},{r_k!r},{km!r}")
        print(f"k={k:4d}  area={ar:.8f}  r(k)={r_k:.8f}  "
              f"r(k)-kappa={r_k - km:+.2e}")
    Path(args.out).write_text("\n".join(rows) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
