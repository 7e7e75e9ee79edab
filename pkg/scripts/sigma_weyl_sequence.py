"""Weyl sequence transplanted from the cone to built-in surfaces.

Writes ``sigma_weyl_sequence.csv``. Patches whose hypotheses fail are run in
non-strict mode so their rows are still recorded.
"""

import argparse
import csv
from pathlib import Path

from hypspec.mesh import SIGMA_HEADER, PreconditionError, sigma_weyl_residual
from hypspec.submanifold import builtin_patch


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--geometry", default="geodesic-h2,graph-one,graph-u1,cap-60")
    ap.add_argument("--lam", type=float, default=2.0)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sigma_weyl_sequence.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["geometry", "strict"] + SIGMA_HEADER)
        for name in args.geometry.split(","):
            patch = builtin_patch(name)
            strict = True
            try:
                rep = sigma_weyl_residual(patch, patch.m, args.lam)
            except PreconditionError as exc:
                print(f"{name}: {exc}")
                strict = False
                rep = sigma_weyl_residual(patch, patch.m, args.lam, strict=False)
            for row in rep.rows:
                w.writerow([name, strict] + [row.k] + [repr(float(v)) for v in (row.R, row.residual, row.norm, row.ratio, row.cone_ratio, row.eps_k, row.eps_hat, row.bound)] + [rep.passed])
            print(f"{name}: passed={rep.passed}")


if __name__ == "__main__":
    main()
