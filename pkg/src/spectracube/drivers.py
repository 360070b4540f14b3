"""End-to-end problem pipelines.

``StationarySolver`` prepares a problem once (discretization, boundary
substitution, backend factorizations) and solves repeatedly for new right
sides; ``solve_stationary`` is the one-shot wrapper.  On top of it sit the
residual-driven adaptive loop, the implicit Euler time stepper, and the
inverse-iteration eigensolver.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np

from . import expr as expr_mod
from .bc import (
    BoundaryConditionError,
    assemble_boundary_set,
    constraint_residual,
    dirichlet,
    neumann,
    normalize_leading_identity,
    reconstruct,
    reduce,
)
from .cheb import (
    cheb_interp_3d,
    conv_chain,
    eval_cheb_3d,
    inner_product_3d,
    l2_norm_3d,
)
from .opdisc import (
    DiffOperator3,
    SplitOptions,
    _coeff_fn1,
    _coeff_fn3,
    _is_const,
    apply_operator,
    discretize,
    discretize_separable_diffusion,
    scale_shift_operator,
    split_operator,
)
from .tensolve import (
    ReducedLaplaceSolver,
    SolveReport,
    SolverError,
    apply_reduced_operator,
    make_preconditioner,
    solve_gmres_system,
    solve_reshape,
)
from .tensor3 import mode_mult


@dataclass(frozen=True)
class DiffusionForm:
    """Operator ``-div(a grad u)`` with ``a`` a sum of separable terms."""

    terms: tuple

    @property
    def orders(self) -> tuple[int, int, int]:
        return (2, 2, 2)


Operator = Union[DiffOperator3, DiffusionForm]


@dataclass(frozen=True)
class FaceBC:
    """Boundary condition on one face: kind 'dirichlet' or 'neumann', data a
    constant or a bivariate function of the remaining coordinates."""

    kind: str
    data: object = 0.0

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann"):
            raise BoundaryConditionError(f"unknown boundary kind {self.kind!r}")


def zero_dirichlet_boundary(orders: tuple[int, int, int]) -> dict:
    """Homogeneous Dirichlet data on every face of modes with order 2."""
    faces = {}
    for mode in range(1, 4):
        if orders[mode - 1] == 2:
            faces[(mode, -1)] = FaceBC("dirichlet", 0.0)
            faces[(mode, 1)] = FaceBC("dirichlet", 0.0)
        elif orders[mode - 1] == 1:
            faces[(mode, -1)] = FaceBC("dirichlet", 0.0)
        elif orders[mode - 1] != 0:
            raise BoundaryConditionError(
                f"no default boundary for operator order {orders[mode - 1]}"
            )
    return faces


@dataclass
class SolverOptions:
    """Backend and discretization knobs for one problem."""

    backend: str = "auto"  # auto | recursive | gmres | reshape
    base_cap: int = 128
    reshape_cap: int = 32768
    gmres_restart: int = 15
    gmres_tol: float = 1e-12
    gmres_max_outer: int = 200
    cp_rank: int = 10
    mult_rank: int = 7
    split_identity: bool = True
    zero_order_separable: Sequence | None = None
    cp_max_iter: int = 500
    cp_tol: float = 1e-12
    cp_restarts: int = 5
    cp_seed: int = 0
    precond: object = "auto"  # auto | separable | constant | none | Operator
    seed: int = 1234
    samples: int = 1000


@dataclass
class ProblemSpec:
    """A stationary problem: operator, right side, boundary data, degrees."""

    operator: Operator
    rhs: object  # trivariate callable or Chebyshev coefficient tensor
    boundary: dict  # {(mode, side): FaceBC}
    degrees: tuple[int, int, int]
    options: SolverOptions = field(default_factory=SolverOptions)
    exact: Callable | None = None

    def __post_init__(self):
        orders = self.operator.orders
        for mode in range(3):
            if self.degrees[mode] < orders[mode]:
                raise ValueError(
                    f"degrees {self.degrees} must be at least the operator "
                    f"orders {orders}"
                )
            have = sum(1 for (m, _s) in self.boundary if m == mode + 1)
            if have != orders[mode]:
                raise BoundaryConditionError(
                    f"mode {mode + 1} has {have} boundary faces but operator "
                    f"order {orders[mode]}"
                )


@dataclass
class Solution:
    u: np.ndarray
    report: SolveReport
    combined_residual: float
    degrees: tuple[int, int, int]
    error: float | None = None


class _Stage:
    """Context tagging errors with the pipeline stage that raised them."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, Exception) and not isinstance(exc, _Tagged):
            raise _Tagged(f"[{self.name}] {exc}", exc) from exc
        return False


class _Tagged(SolverError):
    def __init__(self, message, original):
        super().__init__(message)
        self.original = original


def _boundary_rows(boundary: dict, degrees, orders):
    rows = [[], [], []]
    for mode in range(1, 4):
        for side in (-1, 1):
            face = boundary.get((mode, side))
            if face is None:
                continue
            if face.kind == "dirichlet":
                rows[mode - 1].append(dirichlet(mode, side, face.data, degrees))
            else:
                rows[mode - 1].append(neumann(mode, side, face.data, degrees))
    return rows


def to_output_basis(u_cheb: np.ndarray, orders: tuple[int, int, int]) -> np.ndarray:
    """Convert a Chebyshev coefficient tensor into the operator's output
    ultraspherical basis (parameter = differential order, per mode)."""
    out = np.asarray(u_cheb, dtype=float)
    for mode in range(3):
        if orders[mode] > 0:
            out = mode_mult(out, conv_chain(0, orders[mode], out.shape[mode] - 1), mode + 1)
    return out


def _auto_surrogate(operator: Operator, degrees, options: SolverOptions):
    """Surrogate operator for preconditioning.

    Diffusion forms keep their first separable term ('separable', the
    default) or collapse to the constant coefficient given by the L2 norm of
    the full coefficient ('constant').  General operators replace every
    non-constant coefficient by its L2 norm.
    """
    spec = options.precond
    if isinstance(spec, (DiffOperator3, DiffusionForm)):
        return spec
    if isinstance(spec, tuple):
        return DiffusionForm(terms=(spec,))
    if spec not in ("auto", "separable", "constant"):
        raise SolverError(f"cannot build a preconditioner surrogate from {spec!r}")
    if isinstance(operator, DiffusionForm):
        if spec in ("auto", "separable"):
            return DiffusionForm(terms=(operator.terms[0],))
        n1, n2, n3 = degrees
        total = np.zeros((n1 + 1, n2 + 1, n3 + 1))
        for term in operator.terms:
            fns = [_univariate_callable(f, v) for f, v in zip(term, "xyz")]
            total += cheb_interp_3d(
                lambda x, y, z: fns[0](x) * fns[1](y) * fns[2](z), n1, n2, n3
            )
        return DiffusionForm(terms=((l2_norm_3d(total), 1.0, 1.0),))
    coeffs = {}
    for key, val in operator.coeffs.items():
        if _is_const(val):
            coeffs[key] = val
        else:
            k = cheb_interp_3d(_coeff_fn3(val), *degrees)
            coeffs[key] = l2_norm_3d(k)
    return DiffOperator3(orders=operator.orders, coeffs=coeffs)


def _univariate_callable(f, var: str):
    if isinstance(f, (int, float)):
        c = float(f)
        return lambda t: np.full_like(np.asarray(t, dtype=float), c)
    if isinstance(f, (expr_mod.Const, expr_mod.Var, expr_mod.Neg, expr_mod.BinOp, expr_mod.Call)):
        return _coeff_fn1(f, var)
    return f


def _discretize_operator(operator: Operator, degrees, options: SolverOptions):
    if isinstance(operator, DiffusionForm):
        return discretize_separable_diffusion(list(operator.terms), degrees)
    split = split_operator(
        operator,
        degrees,
        SplitOptions(
            cp_rank=options.cp_rank,
            mult_rank=options.mult_rank,
            split_identity=options.split_identity,
            zero_order_separable=options.zero_order_separable,
            max_iter=options.cp_max_iter,
            tol=options.cp_tol,
            restarts=options.cp_restarts,
            seed=options.cp_seed,
        ),
    )
    return discretize(operator, degrees, split)


class StationarySolver:
    """Prepared stationary pipeline, reusable across right sides.

    All right-side-independent work (operator discretization, boundary
    normalization and substitution, Schur/LU/sparse factorizations of the
    chosen backend) happens in the constructor.
    """

    def __init__(
        self,
        operator: Operator,
        boundary: dict,
        degrees: tuple[int, int, int],
        options: SolverOptions | None = None,
    ):
        self.options = options or SolverOptions()
        self.degrees = degrees
        with _Stage("discretize"):
            self.disc = _discretize_operator(operator, degrees, self.options)
        with _Stage("boundary"):
            rows = _boundary_rows(boundary, degrees, self.disc.orders)
            bset = assemble_boundary_set(rows, degrees, self.disc.orders)
            self.bset = normalize_leading_identity(bset)
        with _Stage("reduce"):
            zero = np.zeros(tuple(n + 1 for n in degrees))
            self.reduced = reduce(self.disc, zero, self.bset)
        backend = self.options.backend
        auto = backend == "auto"
        if auto:
            backend = "recursive" if self.reduced.laplace_like else "gmres"
        self.fallback_note = None
        if backend == "gmres":
            if self.options.precond == "none":
                self._precond = None
            else:
                try:
                    with _Stage("preconditioner"):
                        surrogate_op = _auto_surrogate(operator, degrees, self.options)
                        sdisc = _discretize_operator(surrogate_op, degrees, self.options)
                        sreduced = reduce(sdisc, zero, self.bset)
                        self._precond = make_preconditioner(
                            sreduced, base_cap=self.options.base_cap
                        )
                except SolverError as exc:
                    # auto-selected gmres falls back to the direct backend
                    # when no usable surrogate exists
                    size = int(np.prod(self.reduced.interior_dims))
                    if not (auto and size <= self.options.reshape_cap):
                        raise
                    backend = "reshape"
                    self.fallback_note = f"gmres preconditioner unavailable ({exc})"
        if backend == "recursive":
            with _Stage("factorize"):
                self._solve_interior = ReducedLaplaceSolver(
                    self.reduced, base_cap=self.options.base_cap
                )
        self.backend = backend

    def solve_output_rhs(self, f_out: np.ndarray) -> tuple[np.ndarray, SolveReport]:
        """Solve for a right side already in the operator's output basis."""
        sys = self.reduced.with_rhs(f_out)
        t0 = time.perf_counter()
        if self.backend == "recursive":
            with _Stage("solve"):
                x, depth = self._solve_interior.solve(sys.fhat)
            wall = time.perf_counter() - t0
            res = float(np.max(np.abs(apply_reduced_operator(sys, x) - sys.fhat)))
            report = SolveReport(
                backend="recursive", residual=res, wall_seconds=wall,
                iterations=depth, cp_error=sys.cp_error,
            )
        elif self.backend == "gmres":
            with _Stage("solve"):
                x, report = solve_gmres_system(
                    sys,
                    precond_fn=self._precond,
                    restart=self.options.gmres_restart,
                    tol=self.options.gmres_tol,
                    max_outer=self.options.gmres_max_outer,
                    base_cap=self.options.base_cap,
                )
        elif self.backend == "reshape":
            with _Stage("solve"):
                x, report = solve_reshape(sys, size_cap=self.options.reshape_cap)
        else:
            raise SolverError(f"unknown backend {self.backend!r}")
        with _Stage("reconstruct"):
            u = reconstruct(x, self.bset)
        report.warnings = list(self.bset.warnings)
        if self.fallback_note:
            report.warnings.append(self.fallback_note)
        return u, report

    def solve_cheb_rhs(self, f_cheb: np.ndarray) -> tuple[np.ndarray, SolveReport]:
        return self.solve_output_rhs(to_output_basis(f_cheb, self.disc.orders))

    def combined_residual(self, u: np.ndarray, f_out: np.ndarray) -> float:
        """Max of the discretized-PDE residual and all constraint residuals."""
        pde = float(np.max(np.abs(apply_operator(self.disc, u) - f_out)))
        return max(pde, constraint_residual(u, self.bset))


def _rhs_output_tensor(spec: ProblemSpec, solver: StationarySolver) -> np.ndarray:
    if callable(spec.rhs):
        f_cheb = cheb_interp_3d(spec.rhs, *spec.degrees)
    else:
        f_cheb = np.asarray(spec.rhs, dtype=float)
    return to_output_basis(f_cheb, solver.disc.orders)


def sample_points(seed: int, count: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-1.0, 1.0, (count, 3))


def sampled_max_error(u: np.ndarray, exact, seed: int, count: int) -> float:
    pts = sample_points(seed, count)
    vals = eval_cheb_3d(u, pts[:, 0], pts[:, 1], pts[:, 2])
    ref = exact(pts[:, 0], pts[:, 1], pts[:, 2])
    return float(np.max(np.abs(vals - ref)))


def solve_stationary(spec: ProblemSpec) -> Solution:
    """Full pipeline: discretize, substitute boundaries, solve, reconstruct."""
    solver = StationarySolver(spec.operator, spec.boundary, spec.degrees, spec.options)
    with _Stage("rhs"):
        f_out = _rhs_output_tensor(spec, solver)
    u, report = solver.solve_output_rhs(f_out)
    combined = solver.combined_residual(u, f_out)
    err = None
    if spec.exact is not None:
        err = sampled_max_error(u, spec.exact, spec.options.seed, spec.options.samples)
    return Solution(
        u=u, report=report, combined_residual=combined, degrees=spec.degrees, error=err
    )


def _tail_mass(u: np.ndarray) -> float:
    """Largest coefficient among the trailing 10% of indices of any mode."""
    out = 0.0
    for mode in range(3):
        n = u.shape[mode]
        start = max(n - max(n // 10, 1), 0)
        sl = [slice(None)] * 3
        sl[mode] = slice(start, None)
        out = max(out, float(np.max(np.abs(u[tuple(sl)]))))
    return out


def adaptive_solve(spec: ProblemSpec, residual_tol: float, n_max: int) -> Solution:
    """Double the degrees until the combined residual and the trailing
    coefficient mass both drop below the tolerance (or the cap is hit)."""
    if n_max < max(spec.degrees):
        raise ValueError(f"n_max {n_max} below initial degrees {spec.degrees}")
    degrees = spec.degrees
    history = []
    while True:
        sol = solve_stationary(replace(spec, degrees=degrees))
        tail = _tail_mass(sol.u)
        history.append((degrees, sol.combined_residual, tail))
        sol.report.extra["degree_history"] = history
        if sol.combined_residual <= residual_tol and tail <= residual_tol:
            return sol
        if all(n >= n_max for n in degrees):
            sol.report.warnings.append(
                f"adaptive degree cap {n_max} reached with combined residual "
                f"{sol.combined_residual:.3e} and tail mass {tail:.3e} above "
                f"tolerance {residual_tol:.3e}"
            )
            return sol
        degrees = tuple(min(2 * n, n_max) for n in degrees)


def evolve_implicit_euler(
    generator: DiffOperator3,
    u0: Callable,
    h: float,
    steps: int,
    degrees: tuple[int, int, int],
    options: SolverOptions | None = None,
    boundary: dict | None = None,
) -> tuple[list, StationarySolver]:
    """Backward Euler states for ``du/dt = L u`` with homogeneous boundaries.

    Each step solves the stationary problem ``(I - h L) u_next = u_prev``;
    the step operator is discretized once and its factorizations reused.
    Returns the list ``[U_0, ..., U_steps]`` and the prepared solver.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    step_op = scale_shift_operator(generator, -h, 1.0)
    if boundary is None:
        boundary = zero_dirichlet_boundary(step_op.orders)
    solver = StationarySolver(step_op, boundary, degrees, options)
    u = cheb_interp_3d(u0, *degrees)
    states = [u]
    for _ in range(steps):
        u, _report = solver.solve_cheb_rhs(u)
        states.append(u)
    return states, solver


def inverse_iteration(
    operator: Operator,
    u0: Callable,
    iters: int,
    degrees: tuple[int, int, int],
    options: SolverOptions | None = None,
    boundary: dict | None = None,
) -> tuple[float, np.ndarray, list]:
    """Smallest eigenpair of ``L u = lambda u`` by inverse iteration.

    Each step solves ``L u_s = u_{s-1} / ||u_{s-1}||`` with cached
    factorizations; the eigenvalue estimate is the reciprocal Rayleigh
    quotient against the normalized predecessor.  Returns the final
    estimate, the normalized eigenfunction tensor, and the estimate history.
    """
    if iters < 1:
        raise ValueError("inverse iteration needs at least one step")
    if boundary is None:
        boundary = zero_dirichlet_boundary(operator.orders)
    solver = StationarySolver(operator, boundary, degrees, options)
    v = cheb_interp_3d(u0, *degrees)
    history = []
    for _ in range(iters):
        nrm = l2_norm_3d(v)
        if nrm < 1e-300:
            raise SolverError("inverse iteration breakdown: iterate norm underflow")
        vhat = v / nrm
        w, _report = solver.solve_cheb_rhs(vhat)
        mu = inner_product_3d(vhat, w)
        if mu == 0.0:
            raise SolverError("inverse iteration breakdown: zero Rayleigh quotient")
        history.append(1.0 / mu)
        v = w
    return history[-1], v / l2_norm_3d(v), history
