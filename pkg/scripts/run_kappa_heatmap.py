#!/usr/bin/env python3
"""Table of the saturation variance constant over (a_max, clip level).

Evaluates the constant at the worst-case rate for each grid cell and
writes the table plus the requested level contour.
"""

import argparse
from pathlib import Path

import numpy as np

from seppnet import io as sio
from seppnet.theory import kappa_heatmap


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--amax-max", type=float, default=1.0)
    ap.add_argument("--amax-step", type=float, default=0.05)
    ap.add_argument("--u", default="3,6,12")
    ap.add_argument("--level", type=float, default=0.01)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    a_grid = np.arange(0.0, args.amax_max + 1e-9, args.amax_step)
    u_grid = np.array([float(v) for v in args.u.split(",")])
    values, contour = kappa_heatmap(a_grid, u_grid, contour_level=args.level)

    rows = [{"u": float(u), "a_max": float(a), "kappa": float(values[i, j])}
            for i, u in enumerate(u_grid) for j, a in enumerate(a_grid)]
    sio.write_table_csv(outdir / "kappa_grid.csv", rows, ["u", "a_max", "kappa"])
    if contour:
        sio.write_table_csv(outdir / "kappa_contour.csv",
                            [{"u": u, "a_max": a} for u, a in contour],
                            ["u", "a_max"])
    for u, a in contour:
        print(f"level {args.level} crossed at a_max={a:.3f} for u={u:g}")


if __name__ == "__main__":
    main()
