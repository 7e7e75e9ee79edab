"""Dirichlet bottom of truncated surfaces against R and mesh resolution.

Writes ``fem_spectrum.csv`` with one row per (geometry, R, rings, angles).
"""

import argparse
import csv
import time
from pathlib import Path

from hypspec.mesh import dirichlet_bottom, polar_mesh
from hypspec.submanifold import builtin_patch


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--geometry", default="geodesic-h2,graph-one")
    ap.add_argument("--R", default="2,3,4,6,8,10")
    ap.add_argument("--resolutions", default="20x32,40x64,80x128")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res = [tuple(int(v) for v in s.split("x")) for s in args.resolutions.split(",")]
    with open(out / "fem_spectrum.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["geometry", "R", "rings", "angles", "interior_vertices", "lambda0", "residual", "seconds"])
        for name in args.geometry.split(","):
            patch = builtin_patch(name)
            for R in (float(v) for v in args.R.split(",")):
                for rings, angles in res:
                    t0 = time.perf_counter()
                    rep = dirichlet_bottom(polar_mesh(patch, R, rings=rings, n_angles=angles))
                    dt = time.perf_counter() - t0
                    w.writerow([name, R, rings, angles, rep.n_interior, repr(rep.bottom), repr(rep.residuals[0]), f"{dt:.2f}"])
                    print(f"{name} R={R:g} {rings}x{angles}: lambda0={rep.bottom:.6f}")


if __name__ == "__main__":
    main()
