"""Print the dispersion relation and growing modes of a built-in model.

    python scripts/dispersion_table.py benchmark --dim 2 --param D2=30
"""

import argparse

import numpy as np

from turing_lab.errors import AnalysisError
from turing_lab.kinetics import build_model, linearize
from turing_lab.linear_analysis import (
    default_k_grid,
    dispersion_curve,
    growing_mode_summary,
    has_turing_instability,
)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("model")
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--points", type=int, default=21)
    p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
    args = p.parse_args()

    params = {k: float(v) for k, v in (item.split("=", 1) for item in args.param)}
    lin = linearize(build_model(args.model, params))
    print(f"{'k':>10} {'Re lambda+':>14} {'Re lambda-':>14} {'Im':>10}")
    for row in dispersion_curve(lin, default_k_grid(lin, args.points)):
        print(f"{row.k:10.4f} {row.re_plus:14.6e} {row.re_minus:14.6e} {row.imag:10.4f}  {row.kind}")

    w = has_turing_instability(lin, args.dim)
    if not w.unstable:
        print("no admissible unstable mode")
        return
    s = growing_mode_summary(lin, args.dim)
    print(f"unstable band ({w.k_minus:.6g}, {w.k_plus:.6g}), witness q^2 in {w.witness}")
    print(f"lambda_max = {s.lambda_max:.6f} at {list(s.omega_max)}, nu = {s.nu:.6f}")
    print(f"{len(s.growing)} growing modes, largest non-maximal rate {s.next_largest:.6f}")


if __name__ == "__main__":
    try:
        main()
    except AnalysisError as exc:
        raise SystemExit(f"{type(exc).__name__}: {exc}")
