#!/usr/bin/env python3
"""Reshape vs recursive backend comparison on the Poisson benchmark.

Writes a CSV with wall time and sampled max error per (degree, backend).
Degrees beyond the reshape size cap are run with the recursive backend only.
"""

import argparse
import sys

from spectracube.drivers import SolverOptions, solve_stationary
from spectracube.presets import make_problem
from spectracube.tensolve import SolverError


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", default="poisson")
    ap.add_argument("--degrees", default="10,30,50", help="comma-separated degrees")
    ap.add_argument("--out", default=None, help="CSV path (default stdout)")
    args = ap.parse_args()

    lines = ["n,backend,wall_seconds,sampled_max_error"]
    for n in (int(t) for t in args.degrees.split(",")):
        for backend in ("reshape", "recursive"):
            try:
                sol = solve_stationary(
                    make_problem(args.preset, n, SolverOptions(backend=backend))
                )
            except SolverError as exc:
                print(f"# n={n} {backend}: skipped ({exc})", file=sys.stderr)
                continue
            lines.append(
                f"{n},{backend},{sol.report.wall_seconds:.6f},{sol.error:.17e}"
            )
            print(f"# n={n:4d} {backend:9s} {sol.report.wall_seconds:8.3f}s "
                  f"err={sol.error:.3e}", file=sys.stderr)
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
