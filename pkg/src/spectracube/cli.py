"""Command-line front end.

Subcommands: ``solve`` (stationary), ``evolve`` (implicit Euler), ``eig``
(inverse iteration), ``bench`` (reshape vs recursive wall times), and
``convergence`` (error vs degree sweep).  Problems come from ``--preset`` or
a config file; results are written as CSV with the fixed column schema

    n, backend, wall_seconds, sampled_max_error_or_residual, iterations, cp_error

where floats are formatted ``%.17e``.  All columns except ``wall_seconds``
are deterministic for a fixed config and seed.  The environment variable
``SPECTRACUBE_SEED`` overrides the configured seed.

Exit codes: 0 success, 1 configuration error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import expr as expr_mod
from .bc import BoundaryConditionError
from .cheb import eval_cheb_3d
from .drivers import (
    FaceBC,
    ProblemSpec,
    SolverOptions,
    evolve_implicit_euler,
    inverse_iteration,
    solve_stationary,
)
from .opdisc import DiffOperator3
from .presets import PRESETS, heat_exact, make_problem
from .tensolve import SolverError
from .tensor3 import dump_text

CSV_HEADER = "n,backend,wall_seconds,sampled_max_error_or_residual,iterations,cp_error"


class ConfigError(ValueError):
    """Invalid CLI or config-file input."""


def _fmt_row(n, backend, wall, err, iters, cp_err) -> str:
    return ",".join(
        [
            str(n),
            backend,
            "%.17e" % wall,
            "%.17e" % err,
            str(iters if iters is not None else 0),
            "%.17e" % cp_err,
        ]
    )


def _write_output(lines: list[str], path: str | None) -> None:
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# config files: [section] headers over key = value lines
# ---------------------------------------------------------------------------


def parse_config(text: str) -> dict:
    """Parse the flat key=value config format into {section: {key: value}}."""
    sections: dict[str, dict[str, str]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if not current:
                raise ConfigError(f"line {lineno}: empty section name")
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside of any [section]")
        key, value = line.split("=", 1)
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if len(value) >= 2 and value[0] == value[-1] == '"':
            value = value[1:-1]
        sections[current][key] = value
    return sections


_FACE_KEYS = {
    ("x", "min"): (1, -1), ("x", "max"): (1, 1),
    ("y", "min"): (2, -1), ("y", "max"): (2, 1),
    ("z", "min"): (3, -1), ("z", "max"): (3, 1),
}
_FACE_VARS = {1: ("y", "z"), 2: ("x", "z"), 3: ("x", "y")}


def _face_data(mode: int, src: str):
    try:
        ast = expr_mod.parse(src)
    except expr_mod.ExprError as exc:
        raise ConfigError(f"boundary data {src!r}: {exc}") from exc
    va, vb = _FACE_VARS[mode]

    def data(a, b):
        br = np.broadcast(np.asarray(a), np.asarray(b))
        out = np.empty(br.shape)
        flat = out.ravel()
        for i, (ai, bi) in enumerate(br):
            point = {"x": 0.0, "y": 0.0, "z": 0.0, va: float(ai), vb: float(bi)}
            flat[i] = expr_mod.evaluate(ast, point["x"], point["y"], point["z"])
        return out

    return data


def _problem_from_config(cfg: dict, n_override=None, options=None) -> ProblemSpec:
    prob = cfg.get("problem", {})
    preset = prob.get("preset")
    inline_keys = [k for k in prob if k.startswith("coeff.") or k.startswith("bc.")]
    if preset and inline_keys:
        raise ConfigError("config must use exactly one of a preset or inline problem keys")
    if preset:
        return make_problem(preset, n_override, options)
    if not inline_keys:
        raise ConfigError("config has neither a preset nor inline problem keys")

    coeffs = {}
    for key, value in prob.items():
        if not key.startswith("coeff."):
            continue
        parts = key.split(".")
        if len(parts) != 4:
            raise ConfigError(f"bad coefficient key {key!r}; want coeff.a.b.c")
        try:
            idx = tuple(int(p) for p in parts[1:])
        except ValueError:
            raise ConfigError(f"bad coefficient key {key!r}; orders must be integers") from None
        try:
            ast = expr_mod.parse(value)
        except expr_mod.ExprError as exc:
            raise ConfigError(f"coefficient {key}: {exc}") from exc
        coeffs[idx] = ast.value if isinstance(ast, expr_mod.Const) else ast
    if not coeffs:
        raise ConfigError("inline problem defines no coefficients")
    orders = tuple(max(k[m] for k in coeffs) for m in range(3))
    operator = DiffOperator3(orders=orders, coeffs=coeffs)

    boundary = {}
    for key, value in prob.items():
        if not key.startswith("bc."):
            continue
        parts = key.split(".")
        if len(parts) != 3 or (parts[1], parts[2]) not in _FACE_KEYS:
            raise ConfigError(f"bad boundary key {key!r}; want bc.<x|y|z>.<min|max>")
        mode, side = _FACE_KEYS[(parts[1], parts[2])]
        toks = value.split(None, 1)
        kind = toks[0].lower()
        if kind not in ("dirichlet", "neumann"):
            raise ConfigError(f"boundary {key}: unknown kind {toks[0]!r}")
        src = toks[1].strip() if len(toks) > 1 else "0"
        if len(src) >= 2 and src[0] == src[-1] == '"':
            src = src[1:-1].strip()
        data = _face_data(mode, src) if src not in ("", "0") else 0.0
        boundary[(mode, side)] = FaceBC(kind, data)

    rhs_src = prob.get("rhs", "0")
    try:
        rhs_ast = expr_mod.parse(rhs_src)
    except expr_mod.ExprError as exc:
        raise ConfigError(f"rhs: {exc}") from exc
    rhs = expr_mod.to_callable(rhs_ast)

    if n_override is not None:
        degrees = (n_override,) * 3
    elif "degrees" in prob:
        try:
            degrees = tuple(int(t) for t in prob["degrees"].split())
            assert len(degrees) == 3
        except (ValueError, AssertionError):
            raise ConfigError(f"bad degrees {prob['degrees']!r}; want three integers") from None
    else:
        raise ConfigError("inline problem needs 'degrees = n1 n2 n3'")
    try:
        return ProblemSpec(
            operator=operator, rhs=rhs, boundary=boundary, degrees=degrees,
            options=options or SolverOptions(),
        )
    except (ValueError, BoundaryConditionError) as exc:
        raise ConfigError(str(exc)) from exc


def _options_from_config(cfg: dict, args) -> SolverOptions:
    opts = SolverOptions()
    solver = cfg.get("solver", {})
    casts = {
        "backend": str, "base_cap": int, "reshape_cap": int,
        "gmres_restart": int, "gmres_tol": float, "gmres_max_outer": int,
        "cp_rank": int, "mult_rank": int, "split_identity": lambda s: s.lower() in ("1", "true", "yes"),
        "cp_restarts": int, "cp_max_iter": int, "cp_seed": int,
        "precond": str, "seed": int, "samples": int,
    }
    for key, value in solver.items():
        if key not in casts:
            raise ConfigError(f"unknown solver option {key!r}")
        try:
            setattr(opts, key, casts[key](value))
        except ValueError:
            raise ConfigError(f"bad value for solver option {key!r}: {value!r}") from None
    if args.backend:
        opts.backend = args.backend
    if args.samples is not None:
        opts.samples = args.samples
    if args.seed is not None:
        opts.seed = args.seed
    env_seed = os.environ.get("SPECTRACUBE_SEED")
    if env_seed is not None:
        try:
            opts.seed = int(env_seed)
        except ValueError:
            raise ConfigError(f"SPECTRACUBE_SEED must be an integer, got {env_seed!r}") from None
    return opts


def _load_config(args) -> dict:
    if not args.config:
        return {}
    try:
        with open(args.config) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc


def _parse_n_list(spec: str) -> list[int]:
    try:
        return [int(tok) for tok in spec.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"bad degree list {spec!r}; want comma-separated integers") from None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_solve(args) -> int:
    cfg = _load_config(args)
    options = _options_from_config(cfg, args)
    if args.preset:
        if cfg.get("problem", {}).get("preset") or any(
            k.startswith(("coeff.", "bc.")) for k in cfg.get("problem", {})
        ):
            raise ConfigError("give the problem either on the command line or in the config")
        n = args.n[0] if args.n else None
        spec = make_problem(args.preset, n, options)
    else:
        spec = _problem_from_config(cfg, args.n[0] if args.n else None, options)
    sol = solve_stationary(spec)
    err = sol.error if sol.error is not None else sol.combined_residual
    lines = [CSV_HEADER, _fmt_row(
        max(spec.degrees), sol.report.backend, sol.report.wall_seconds, err,
        sol.report.iterations, sol.report.cp_error,
    )]
    out = args.out or cfg.get("output", {}).get("csv")
    _write_output(lines, out)
    dump = args.dump or cfg.get("output", {}).get("dump")
    if dump:
        with open(dump, "w") as fh:
            fh.write(dump_text(sol.u))
    return 0


def _cmd_bench(args) -> int:
    cfg = _load_config(args)
    options = _options_from_config(cfg, args)
    if not args.n:
        raise ConfigError("bench needs --n n1,n2,...")
    preset = args.preset or cfg.get("problem", {}).get("preset")
    if not preset:
        raise ConfigError("bench needs a preset")
    lines = [CSV_HEADER]
    for n in args.n:
        for backend in ("reshape", "recursive"):
            spec = make_problem(preset, n, replace(options, backend=backend))
            sol = solve_stationary(spec)
            err = sol.error if sol.error is not None else sol.combined_residual
            lines.append(_fmt_row(
                n, backend, sol.report.wall_seconds, err,
                sol.report.iterations, sol.report.cp_error,
            ))
    _write_output(lines, args.out or cfg.get("output", {}).get("csv"))
    return 0


def _cmd_convergence(args) -> int:
    cfg = _load_config(args)
    options = _options_from_config(cfg, args)
    if not args.n:
        raise ConfigError("convergence needs --n n1,n2,...")
    preset = args.preset or cfg.get("problem", {}).get("preset")
    lines = [CSV_HEADER]
    for n in args.n:
        if preset:
            spec = make_problem(preset, n, replace(options))
        else:
            spec = _problem_from_config(cfg, n, replace(options))
        sol = solve_stationary(spec)
        err = sol.error if sol.error is not None else sol.combined_residual
        lines.append(_fmt_row(
            n, sol.report.backend, sol.report.wall_seconds, err,
            sol.report.iterations, sol.report.cp_error,
        ))
    _write_output(lines, args.out or cfg.get("output", {}).get("csv"))
    return 0


def _cmd_evolve(args) -> int:
    cfg = _load_config(args)
    options = _options_from_config(cfg, args)
    name = args.preset or cfg.get("problem", {}).get("preset") or "heat"
    preset = PRESETS.get(name)
    if preset is None or preset.kind != "parabolic":
        raise ConfigError(f"evolve needs a parabolic preset, got {name!r}")
    n = args.n[0] if args.n else preset.default_n
    h = args.h if args.h is not None else preset.extras["h"]
    steps = args.steps if args.steps is not None else preset.extras["steps"]
    t0 = time.perf_counter()
    states, _solver = evolve_implicit_euler(
        preset.operator, preset.u0, h, steps, (n, n, n), options
    )
    wall = time.perf_counter() - t0
    rng = np.random.default_rng(options.seed)
    pts = rng.uniform(-1, 1, (options.samples, 3))
    lines = [CSV_HEADER]
    for tau, u in enumerate(states):
        vals = eval_cheb_3d(u, pts[:, 0], pts[:, 1], pts[:, 2])
        ref = heat_exact(pts[:, 0], pts[:, 1], pts[:, 2], tau * h)
        err = float(np.max(np.abs(vals - ref)))
        lines.append(_fmt_row(n, "recursive", wall, err, tau, 0.0))
    _write_output(lines, args.out or cfg.get("output", {}).get("csv"))
    if args.dump:
        with open(args.dump, "w") as fh:
            fh.write(dump_text(states[-1]))
    return 0


def _cmd_eig(args) -> int:
    cfg = _load_config(args)
    options = _options_from_config(cfg, args)
    name = args.preset or cfg.get("problem", {}).get("preset") or "eig-potential"
    preset = PRESETS.get(name)
    if preset is None or preset.kind != "eigen":
        raise ConfigError(f"eig needs an eigenvalue preset, got {name!r}")
    hook = preset.extras.get("options_hook")
    if hook:
        options = hook(options)
    n = args.n[0] if args.n else preset.default_n
    iters = args.iters if args.iters is not None else preset.extras["iters"]
    t0 = time.perf_counter()
    lam, vec, history = inverse_iteration(
        preset.operator, preset.u0, iters, (n, n, n), options
    )
    wall = time.perf_counter() - t0
    lines = [CSV_HEADER]
    for s, est in enumerate(history, start=1):
        lines.append(_fmt_row(n, "gmres", wall, abs(est - lam), s, 0.0))
    _write_output(lines, args.out or cfg.get("output", {}).get("csv"))
    if args.dump:
        with open(args.dump, "w") as fh:
            fh.write(dump_text(vec))
    sys.stderr.write(f"eigenvalue estimate: {lam:.17e}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectracube",
        description="Global spectral solver for linear PDEs on the cube",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", help=f"problem preset: {', '.join(sorted(PRESETS))}")
    common.add_argument("--config", help="config file (key = value with [sections])")
    common.add_argument("--n", type=_parse_n_list, help="polynomial degree(s), comma separated")
    common.add_argument("--backend", choices=["auto", "recursive", "gmres", "reshape"])
    common.add_argument("--out", help="CSV output path (default stdout)")
    common.add_argument("--dump", help="write the solution tensor dump here")
    common.add_argument("--seed", type=int, help="sampling seed")
    common.add_argument("--samples", type=int, help="number of sample points")

    p = sub.add_parser("solve", parents=[common], help="solve a stationary problem")
    p.set_defaults(func=_cmd_solve)
    p = sub.add_parser("bench", parents=[common], help="reshape vs recursive timings")
    p.set_defaults(func=_cmd_bench)
    p = sub.add_parser("convergence", parents=[common], help="error vs degree sweep")
    p.set_defaults(func=_cmd_convergence)
    p = sub.add_parser("evolve", parents=[common], help="implicit Euler time stepping")
    p.add_argument("--h", type=float, help="time step")
    p.add_argument("--steps", type=int, help="number of steps")
    p.set_defaults(func=_cmd_evolve)
    p = sub.add_parser("eig", parents=[common], help="inverse-iteration eigensolver")
    p.add_argument("--iters", type=int, help="inverse iteration count")
    p.set_defaults(func=_cmd_eig)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, BoundaryConditionError, KeyError, ValueError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return 1
    except SolverError as exc:
        sys.stderr.write(f"solver error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
