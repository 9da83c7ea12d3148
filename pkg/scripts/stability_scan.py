"""Full A-stability scan over C with D = -C, on the reference grid.

    python3 scripts/stability_scan.py --workers 4 --out scan.csv
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from stiffstep.order_conditions import DEFAULT_C
from stiffstep.stability import SCAN_TOL, STRICT_TOL, g_infinity, scan_a_stability, AmplificationParams


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--nc", type=int, default=5000)
    ap.add_argument("--ny", type=int, default=25000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    t0 = time.perf_counter()
    res = scan_a_stability(0.0, 0.1, args.nc, 1e-8, 1e4, args.ny, SCAN_TOL, args.workers)
    print(f"scan: {args.nc} x {args.ny} points in {time.perf_counter() - t0:.1f}s")
    for tol in (SCAN_TOL, STRICT_TOL):
        iv = res.interval_at(tol)
        print(f"  tol {tol:g}: valid C interval {iv}")
    print(f"  C={DEFAULT_C}: valid={res.is_valid(DEFAULT_C)}, G(inf)={g_infinity(AmplificationParams()):.3g}")
    if args.out:
        np.savetxt(args.out, np.column_stack([res.c_values, res.max_abs_g, res.valid_mask]),
                   delimiter=",", header="c,max_abs_g,valid", comments="", fmt=["%.10g", "%.17g", "%d"])


if __name__ == "__main__":
    main()
