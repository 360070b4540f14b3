#!/usr/bin/env python3
"""Error (or combined residual) versus polynomial degree for a preset.

For problems with a known solution the sampled max error is reported;
otherwise the combined residual, which is the accuracy heuristic for
problems with unknown solutions.
"""

import argparse
import sys

from spectracube.drivers import SolverOptions, solve_stationary
from spectracube.presets import make_problem


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", default="helmholtz-gamma")
    ap.add_argument("--degrees", default="10,20,30,40,50,60")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    lines = ["n,backend,error_or_residual,combined_residual,cp_error,iterations"]
    for n in (int(t) for t in args.degrees.split(",")):
        sol = solve_stationary(make_problem(args.preset, n, SolverOptions()))
        err = sol.error if sol.error is not None else sol.combined_residual
        lines.append(
            f"{n},{sol.report.backend},{err:.17e},{sol.combined_residual:.17e},"
            f"{sol.report.cp_error:.17e},{sol.report.iterations or 0}"
        )
        print(f"# n={n:4d} err={err:.3e} residual={sol.combined_residual:.3e}",
              file=sys.stderr)
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
