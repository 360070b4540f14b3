"""Discretization of linear differential operators on the cube.

The operator ``sum_abc alpha_abc(x,y,z) d^(a+b+c)/dx^a dy^b dz^c`` is turned
into a rank-R list of one-dimensional coefficient-space matrices
``(Lx_r, Ly_r, Lz_r)`` so that applying the operator to a Chebyshev
coefficient tensor is ``sum_r u x1 Lx_r x2 Ly_r x3 Lz_r`` with output in the
ultraspherical basis of parameter ``(Nx, Ny, Nz)`` per mode.

The split of the coefficient tensor is either closed-form (no mixed
derivatives, each coefficient univariate in its own mode's variable), exact
rank-1 for separable zero-order terms, or an alternating-least-squares CP
decomposition.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.linalg import solve_triangular

from . import expr as expr_mod
from .cheb import (
    cheb_interp_1d,
    cheb_interp_3d,
    cheb_points,
    conv_chain,
    conv_matrix,
    diff_matrix,
    mult_matrix_cheb,
    mult_matrix_ultra,
)
from .tensor3 import ShapeError, mode_mult

Coefficient = Union[float, expr_mod.ExprAst]


class NotSeparableError(ValueError):
    """Raised when the closed-form rank-3 split does not apply."""


@dataclass(frozen=True)
class DiffOperator3:
    """Differential orders per mode plus a coefficient for each multi-index.

    Coefficients are real constants or expression ASTs in (x, y, z).
    Orders are tight: some coefficient at the maximal order of each mode is
    nonzero.
    """

    orders: tuple[int, int, int]
    coeffs: dict[tuple[int, int, int], Coefficient]

    def __post_init__(self):
        nx, ny, nz = self.orders
        tight = [False, False, False]
        for (a, b, c), val in self.coeffs.items():
            if not (0 <= a <= nx and 0 <= b <= ny and 0 <= c <= nz):
                raise ValueError(f"coefficient index {(a, b, c)} outside orders {self.orders}")
            if _is_zero(val):
                continue
            tight[0] |= a == nx
            tight[1] |= b == ny
            tight[2] |= c == nz
        for mode, ok in enumerate(tight):
            if self.orders[mode] > 0 and not ok:
                raise ValueError(
                    f"orders {self.orders} not tight: no nonzero coefficient at the "
                    f"maximal order of mode {mode + 1}"
                )


def _is_zero(val: Coefficient) -> bool:
    return isinstance(val, (int, float)) and float(val) == 0.0


def _is_const(val: Coefficient) -> bool:
    return isinstance(val, (int, float)) or isinstance(val, expr_mod.Const)


def _const_value(val: Coefficient) -> float:
    return float(val.value) if isinstance(val, expr_mod.Const) else float(val)


def _vars_used(ast) -> set:
    if isinstance(ast, expr_mod.Var):
        return {ast.name}
    if isinstance(ast, expr_mod.Neg):
        return _vars_used(ast.operand)
    if isinstance(ast, expr_mod.Call):
        return _vars_used(ast.arg)
    if isinstance(ast, expr_mod.BinOp):
        return _vars_used(ast.left) | _vars_used(ast.right)
    return set()


def _coeff_fn3(val: Coefficient):
    if _is_const(val):
        c = _const_value(val)
        return lambda x, y, z: np.full(np.broadcast(x, y, z).shape, c)
    return expr_mod.to_callable(val)


def _coeff_fn1(val: Coefficient, var: str):
    """Univariate view of a coefficient known to depend only on ``var``."""
    if _is_const(val):
        c = _const_value(val)
        return lambda t: np.full_like(np.asarray(t, dtype=float), c)
    f = expr_mod.to_callable(val)
    args = {"x": 0, "y": 1, "z": 2}[var]

    def g(t):
        pts = [np.zeros_like(t)] * 3
        pts[args] = t
        return f(*pts)

    return g


def scale_shift_operator(op: DiffOperator3, scale: float, shift: float) -> DiffOperator3:
    """The operator ``shift * identity + scale * op`` with tightened orders.

    Used to form the implicit Euler step operator.  Expression coefficients
    are wrapped in a multiplication node; all-zero maximal orders are
    dropped so the result stays tight.
    """
    coeffs: dict[tuple[int, int, int], Coefficient] = {}
    for key, val in op.coeffs.items():
        if _is_zero(val) or scale == 0.0:
            continue
        if _is_const(val):
            coeffs[key] = scale * _const_value(val)
        elif scale == 1.0:
            coeffs[key] = val
        else:
            coeffs[key] = expr_mod.BinOp("*", expr_mod.Const(scale), val)
    zero = (0, 0, 0)
    if shift != 0.0:
        if zero in coeffs:
            base = coeffs[zero]
            if _is_const(base):
                coeffs[zero] = shift + _const_value(base)
            else:
                coeffs[zero] = expr_mod.BinOp("+", expr_mod.Const(shift), base)
        else:
            coeffs[zero] = shift
    coeffs = {k: v for k, v in coeffs.items() if not _is_zero(v)}
    orders = tuple(
        max((k[m] for k in coeffs), default=0) for m in range(3)
    )
    return DiffOperator3(orders=orders, coeffs=coeffs)


# ---------------------------------------------------------------------------
# coefficient tensor and CP factors
# ---------------------------------------------------------------------------


@dataclass
class CpFactors:
    """Rank-R factors of the operator's coefficient tensor, in operator form.

    ``factors[mode][r]`` is either a vector of per-derivative-order constants
    (length ``N_mode + 1``) or a matrix whose row ``a`` holds the Chebyshev
    coefficients of the order-``a`` coefficient function of that mode's
    variable (shape ``(N_mode + 1, n_mode + 1)``).

    ``laplace_like`` records the rank-3 symmetric layout in which term ``r``
    carries its differential payload in mode ``r`` and identical companion
    factors elsewhere.
    """

    rank: int
    factors: tuple[list, list, list]
    error: float = 0.0
    laplace_like: bool = False
    regularized: bool = False

    def term(self, r: int) -> tuple:
        return self.factors[0][r], self.factors[1][r], self.factors[2][r]


def build_coeff_tensor(op: DiffOperator3, degrees: tuple[int, int, int]) -> np.ndarray:
    """Coefficient tensor of the operator.

    Constant case: shape ``(Nx+1, Ny+1, Nz+1)`` holding the constants.
    Non-constant case: the order-6 tensor of per-coefficient interpolants,
    reshaped to 3 modes with index fusion ``(order, degree) -> order * (n+1)
    + degree`` (derivative order slowest).
    """
    nx, ny, nz = op.orders
    n1, n2, n3 = degrees
    if all(_is_const(v) for v in op.coeffs.values()):
        t = np.zeros((nx + 1, ny + 1, nz + 1))
        for (a, b, c), val in op.coeffs.items():
            t[a, b, c] = _const_value(val)
        return t
    a6 = np.zeros((nx + 1, n1 + 1, ny + 1, n2 + 1, nz + 1, n3 + 1))
    e = np.zeros((n1 + 1, n2 + 1, n3 + 1))
    for (a, b, c), val in op.coeffs.items():
        if _is_zero(val):
            continue
        if _is_const(val):
            e[:] = 0.0
            e[0, 0, 0] = _const_value(val)
            a6[a, :, b, :, c, :] += e
        else:
            a6[a, :, b, :, c, :] += cheb_interp_3d(_coeff_fn3(val), n1, n2, n3)
    return a6.reshape((nx + 1) * (n1 + 1), (ny + 1) * (n2 + 1), (nz + 1) * (n3 + 1))


# ---------------------------------------------------------------------------
# CP decomposition by alternating least squares
# ---------------------------------------------------------------------------


def _unfold(t: np.ndarray, mode: int) -> np.ndarray:
    return np.reshape(np.moveaxis(t, mode, 0), (t.shape[mode], -1), order="F")


def _khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # columnwise outer products; the first argument's index varies fastest,
    # matching the column ordering of _unfold
    r = a.shape[1]
    return (b[:, None, :] * a[None, :, :]).reshape(-1, r)


def _rebalance(facs: list) -> None:
    norms = [np.linalg.norm(f, axis=0) for f in facs]
    weight = norms[0] * norms[1] * norms[2]
    target = np.cbrt(np.where(weight > 0, weight, 1.0))
    for m in range(3):
        nz = norms[m] > 0
        facs[m][:, nz] *= (target[nz] / norms[m][nz])


def _cp_reconstruct(facs: Sequence[np.ndarray]) -> np.ndarray:
    return np.einsum("ir,jr,kr->ijk", *facs, optimize=True)


def cp_decompose(
    t: np.ndarray,
    rank: int,
    max_iter: int = 500,
    tol: float = 1e-12,
    restarts: int = 5,
    seed: int = 0,
) -> tuple[list, float, bool]:
    """Best-of-``restarts`` ALS fit of a rank-``rank`` CP model.

    Returns ``(factor_matrices, max_norm_error, regularized)`` where the
    factor matrices have shape ``(dim, rank)``.  The first restart is
    initialized from the leading singular vectors of the unfoldings, the
    rest from seeded Gaussian noise; the best run by max-norm reconstruction
    error wins.  Deterministic for a fixed seed.
    """
    t = np.asarray(t, dtype=float)
    if rank < 1:
        raise ValueError(f"CP rank must be >= 1, got {rank}")
    rng = np.random.default_rng(seed)
    dims = t.shape
    unfs = [_unfold(t, m) for m in range(3)]
    norm_t = np.linalg.norm(t)
    if norm_t == 0.0:
        return [np.zeros((d, rank)) for d in dims], 0.0, False
    best_facs, best_err, best_reg = None, np.inf, False
    for restart in range(restarts):
        if restart == 0:
            # deterministic SVD-based start; columns belonging to negligible
            # singular values get noise instead, so rank-deficient unfoldings
            # do not pin those components at zero
            facs = []
            for m in range(3):
                u, s, _ = np.linalg.svd(unfs[m], full_matrices=False)
                f = np.empty((dims[m], rank))
                for j in range(rank):
                    if j < len(s) and s[j] > 1e-12 * s[0]:
                        f[:, j] = u[:, j]
                    else:
                        f[:, j] = 1e-3 * rng.standard_normal(dims[m])
                facs.append(f)
        else:
            facs = [rng.standard_normal((d, rank)) for d in dims]
        regularized = False
        prev_fit = np.inf
        fit = np.inf
        for _ in range(max_iter):
            for m in range(3):
                others = [facs[j] for j in range(3) if j != m]
                gram = (others[0].T @ others[0]) * (others[1].T @ others[1])
                kr = _khatri_rao(others[0], others[1])
                rhs = unfs[m] @ kr
                try:
                    facs[m] = np.linalg.solve(gram, rhs.T).T
                except np.linalg.LinAlgError:
                    ridge = 1e-12 * max(np.trace(gram) / rank, 1.0)
                    facs[m] = np.linalg.solve(gram + ridge * np.eye(rank), rhs.T).T
                    regularized = True
                if m == 2:
                    # exact residual from the unfolded model, taken before the
                    # rebalance invalidates this khatri-rao product
                    fit = np.linalg.norm(unfs[2] - facs[2] @ kr.T) / norm_t
                _rebalance(facs)
            if not np.isfinite(fit) or abs(prev_fit - fit) < tol * max(fit, 1e-300):
                break
            prev_fit = fit
        err = float(np.max(np.abs(_cp_reconstruct(facs) - t)))
        if np.isfinite(err) and err < best_err:
            best_facs, best_err, best_reg = [f.copy() for f in facs], err, regularized
    return best_facs, best_err, best_reg


def cp_factors_from_tensor(
    t: np.ndarray,
    rank: int,
    orders: tuple[int, int, int],
    degrees: tuple[int, int, int] | None,
    **als_opts,
) -> CpFactors:
    """CP-decompose a coefficient tensor and reshape into operator form.

    ``degrees=None`` marks the constant case (factor vectors of per-order
    constants); otherwise each fused factor vector is reshaped to
    ``(order + 1, degree + 1)``.
    """
    facs, err, reg = cp_decompose(t, rank, **als_opts)
    per_mode: tuple[list, list, list] = ([], [], [])
    for mode in range(3):
        for r in range(rank):
            v = facs[mode][:, r]
            if degrees is None:
                per_mode[mode].append(v.copy())
            else:
                per_mode[mode].append(
                    v.reshape(orders[mode] + 1, degrees[mode] + 1).copy()
                )
    return CpFactors(rank=rank, factors=per_mode, error=err, regularized=reg)


# ---------------------------------------------------------------------------
# closed-form splittings
# ---------------------------------------------------------------------------

_MODE_VAR = ("x", "y", "z")


def closed_form_split(op: DiffOperator3, degrees: tuple[int, int, int]) -> CpFactors:
    """Rank-3 symmetric split for operators without mixed derivatives whose
    coefficients depend only on their own mode's variable.

    Term ``r`` carries the payload in mode ``r`` (all of that mode's
    per-order coefficients); companion factors are the constant 1.  A
    constant zero-order coefficient is assigned to the mode-1 payload.
    Raises :class:`NotSeparableError` when the structure does not apply.
    """
    payload_vals: list[dict[int, Coefficient]] = [{}, {}, {}]
    for (a, b, c), val in op.coeffs.items():
        if _is_zero(val):
            continue
        active = [m for m, o in enumerate((a, b, c)) if o > 0]
        if len(active) > 1:
            raise NotSeparableError(
                f"not separable: coefficient {(a, b, c)} multiplies a mixed "
                f"derivative; use cp_decompose instead"
            )
        used = set() if _is_const(val) else _vars_used(val)
        if len(used) > 1:
            raise NotSeparableError(
                f"not separable: coefficient {(a, b, c)} depends on variables "
                f"{sorted(used)}; use cp_decompose instead"
            )
        if active:
            mode = active[0]
            if used and used != {_MODE_VAR[mode]}:
                raise NotSeparableError(
                    f"not separable: coefficient {(a, b, c)} of mode {mode + 1} "
                    f"depends on {sorted(used)}; use cp_decompose instead"
                )
            payload_vals[mode][(a, b, c)[mode]] = val
        else:
            mode = _MODE_VAR.index(next(iter(used))) if used else 0
            payload_vals[mode][0] = val

    nonconst = any(not _is_const(v) for d in payload_vals for v in d.values())
    factors: tuple[list, list, list] = ([], [], [])
    for r in range(3):
        for mode in range(3):
            n_ord = op.orders[mode]
            deg = degrees[mode]
            if mode == r:
                if nonconst:
                    mat = np.zeros((n_ord + 1, deg + 1))
                    for a, val in payload_vals[mode].items():
                        if _is_const(val):
                            mat[a, 0] = _const_value(val)
                        else:
                            mat[a, :] = cheb_interp_1d(
                                _coeff_fn1(val, _MODE_VAR[mode]), deg
                            )
                    factors[mode].append(mat)
                else:
                    vec = np.zeros(n_ord + 1)
                    for a, val in payload_vals[mode].items():
                        vec[a] = _const_value(val)
                    factors[mode].append(vec)
            else:
                if nonconst:
                    mat = np.zeros((n_ord + 1, deg + 1))
                    mat[0, 0] = 1.0
                    factors[mode].append(mat)
                else:
                    vec = np.zeros(n_ord + 1)
                    vec[0] = 1.0
                    factors[mode].append(vec)
    return CpFactors(rank=3, factors=factors, error=0.0, laplace_like=True)


def combine_splits(*parts: CpFactors) -> CpFactors:
    """Concatenate CP terms of several splits of operators with equal orders."""
    factors: tuple[list, list, list] = ([], [], [])
    for part in parts:
        for mode in range(3):
            factors[mode].extend(part.factors[mode])
    rank = sum(p.rank for p in parts)
    err = float(np.sqrt(sum(p.error**2 for p in parts))) if len(parts) > 1 else parts[0].error
    # combined max-norm error is bounded by the sum; keep the conservative sum
    err = float(sum(p.error for p in parts))
    return CpFactors(
        rank=rank,
        factors=factors,
        error=err,
        laplace_like=len(parts) == 1 and parts[0].laplace_like,
        regularized=any(p.regularized for p in parts),
    )


def zero_order_separable_split(
    triples: Sequence[tuple], orders: tuple[int, int, int], degrees: tuple[int, int, int]
) -> CpFactors:
    """Exact rank-1-per-term split of a zero-order coefficient given as a sum
    of products of univariate functions, embedded at the stated operator
    orders (rows above order zero are zero)."""
    factors: tuple[list, list, list] = ([], [], [])
    for triple in triples:
        for mode, f in enumerate(triple):
            mat = np.zeros((orders[mode] + 1, degrees[mode] + 1))
            if isinstance(f, (int, float)):
                mat[0, 0] = float(f)
            elif isinstance(f, (expr_mod.Const, expr_mod.Var, expr_mod.Neg, expr_mod.BinOp, expr_mod.Call)):
                mat[0, :] = cheb_interp_1d(_coeff_fn1(f, _MODE_VAR[mode]), degrees[mode])
            else:
                mat[0, :] = cheb_interp_1d(f, degrees[mode])
            factors[mode].append(mat)
    return CpFactors(rank=len(triples), factors=factors, error=0.0)


# ---------------------------------------------------------------------------
# 1-D assembly and the discretized operator
# ---------------------------------------------------------------------------


def assemble_L_1d(coeff_per_order: Sequence, n: int) -> np.ndarray:
    """Coefficient-space matrix of a 1-D operator of order ``N = len - 1``.

    ``coeff_per_order[a]`` is ``None`` (absent term), a scalar, or the
    coefficient function's vector in the parameter-``a`` basis (Chebyshev for
    ``a = 0``).  The result maps Chebyshev coefficients of ``u`` to
    parameter-``N`` coefficients of the operator applied to ``u``,
    degree-truncated.
    """
    order = len(coeff_per_order) - 1
    out = np.zeros((n + 1, n + 1))
    for a, coeff in enumerate(coeff_per_order):
        if coeff is None:
            continue
        if np.isscalar(coeff):
            if float(coeff) == 0.0:
                continue
            core = float(coeff) * (diff_matrix(a, n) if a >= 1 else np.eye(n + 1))
        else:
            v = np.asarray(coeff, dtype=float)
            if v.shape != (n + 1,):
                raise ShapeError(
                    f"order-{a} coefficient vector has length {v.size}, expected {n + 1}"
                )
            if not np.any(v):
                continue
            mult = mult_matrix_cheb(v) if a == 0 else mult_matrix_ultra(a, v)
            core = mult @ diff_matrix(a, n) if a >= 1 else mult
        out += conv_chain(a, order, n) @ core
    return out


@dataclass
class DiscretizedOperator:
    """Rank-R family of per-mode coefficient-space matrices."""

    rank: int
    degrees: tuple[int, int, int]
    orders: tuple[int, int, int]
    lx: list = field(default_factory=list)
    ly: list = field(default_factory=list)
    lz: list = field(default_factory=list)
    laplace_like: bool = False
    cp_error: float = 0.0

    def mats(self, mode: int) -> list:
        return (self.lx, self.ly, self.lz)[mode]

    def __post_init__(self):
        for mode, ms in enumerate((self.lx, self.ly, self.lz)):
            want = self.degrees[mode] + 1
            for m in ms:
                if m.shape != (want, want):
                    raise ShapeError(
                        f"mode-{mode + 1} operator matrix has shape {m.shape}, "
                        f"expected ({want}, {want})"
                    )


def discretize(
    op: DiffOperator3, degrees: tuple[int, int, int], split: CpFactors
) -> DiscretizedOperator:
    """Build the per-term 1-D matrices from an operator-form split.

    Vector factors are per-order constants; matrix factors hold Chebyshev
    rows that are converted to the parameter-``a`` basis before assembly.
    """
    mats: list[list[np.ndarray]] = [[], [], []]
    for mode in range(3):
        n = degrees[mode]
        chains = {}
        for r in range(split.rank):
            fac = split.factors[mode][r]
            coeffs: list = []
            if fac.ndim == 1:
                coeffs = [float(v) if v != 0.0 else None for v in fac]
            else:
                for a in range(fac.shape[0]):
                    row = fac[a]
                    if not np.any(row):
                        coeffs.append(None)
                    elif a == 0:
                        coeffs.append(row)
                    else:
                        if a not in chains:
                            chains[a] = conv_chain(0, a, n)
                        coeffs.append(chains[a] @ row)
            mats[mode].append(assemble_L_1d(coeffs, n))
    return DiscretizedOperator(
        rank=split.rank,
        degrees=degrees,
        orders=op.orders,
        lx=mats[0],
        ly=mats[1],
        lz=mats[2],
        laplace_like=split.laplace_like,
        cp_error=split.error,
    )


def apply_operator(d: DiscretizedOperator, u: np.ndarray) -> np.ndarray:
    """Apply the discretized operator to a Chebyshev coefficient tensor."""
    u = np.asarray(u, dtype=float)
    want = tuple(n + 1 for n in d.degrees)
    if u.shape != want:
        raise ShapeError(f"tensor dims {u.shape} do not match operator degrees + 1 = {want}")
    out = np.zeros_like(u)
    for r in range(d.rank):
        out += mode_mult(mode_mult(mode_mult(u, d.lx[r], 1), d.ly[r], 2), d.lz[r], 3)
    return out


# ---------------------------------------------------------------------------
# diffusion operators in divergence form
# ---------------------------------------------------------------------------


def discretize_separable_diffusion(
    terms, degrees: tuple[int, int, int]
) -> DiscretizedOperator:
    """Discretization of ``-div(a grad u)`` for ``a = sum_r a1_r(x) a2_r(y) a3_r(z)``.

    ``terms`` is one ``(a1, a2, a3)`` triple of univariate functions or a list
    of such triples.  Each triple contributes three terms: the payload of
    mode ``m`` is the negated matrix of ``d/dm (a_m d/dm .)`` and the
    companions multiply by the other factors in the parameter-2 basis.  A
    single triple keeps the Laplace-like layout; the triangular
    Chebyshev-to-parameter-1 system is solved directly, no inverse is formed.
    """
    if not isinstance(terms, list):
        terms = [terms]
    n1, n2, n3 = degrees
    degs = (n1, n2, n3)
    grids = [cheb_points(n) for n in degs]
    s0 = [conv_matrix(0, n) for n in degs]
    s10 = [conv_chain(0, 2, n) for n in degs]
    d1 = [diff_matrix(1, n) for n in degs]
    s1 = [conv_matrix(1, n) for n in degs]

    mats: list[list[np.ndarray]] = [[], [], []]
    for a_triple in terms:
        coeff_vecs = []
        for mode, f in enumerate(a_triple):
            if isinstance(f, (expr_mod.Const, expr_mod.Var, expr_mod.Neg, expr_mod.BinOp, expr_mod.Call)):
                f = _coeff_fn1(f, _MODE_VAR[mode])
            elif isinstance(f, (int, float)):
                c = float(f)
                f = (lambda cc: (lambda t: np.full_like(np.asarray(t, float), cc)))(c)
            vals = np.asarray(f(grids[mode]), dtype=float)
            if np.any(vals <= 0.0):
                warnings.warn(
                    f"diffusion coefficient factor for mode {mode + 1} is not positive "
                    f"on the grid (min {vals.min():.3g}); ellipticity is not guaranteed",
                    stacklevel=2,
                )
            coeff_vecs.append(cheb_interp_1d(f, degs[mode]))
        payloads, companions = [], []
        for mode in range(3):
            v = coeff_vecs[mode]
            v_c1 = s0[mode] @ v
            inner = mult_matrix_ultra(1, v_c1) @ d1[mode]
            inner = solve_triangular(s0[mode], inner)
            payloads.append(-(s1[mode] @ d1[mode] @ inner))
            v_c2 = s10[mode] @ v
            companions.append(mult_matrix_ultra(2, v_c2) @ s10[mode])
        for r in range(3):
            for mode in range(3):
                mats[mode].append(payloads[mode] if mode == r else companions[mode])
    return DiscretizedOperator(
        rank=3 * len(terms),
        degrees=degrees,
        orders=(2, 2, 2),
        lx=mats[0],
        ly=mats[1],
        lz=mats[2],
        laplace_like=len(terms) == 1,
        cp_error=0.0,
    )


# ---------------------------------------------------------------------------
# splitting strategy
# ---------------------------------------------------------------------------


@dataclass
class SplitOptions:
    """Knobs for turning a DiffOperator3 into CP factors."""

    cp_rank: int = 10
    mult_rank: int = 7
    split_identity: bool = True
    zero_order_separable: Sequence[tuple] | None = None
    max_iter: int = 500
    tol: float = 1e-12
    restarts: int = 5
    seed: int = 0


def _split_identity_eligible(op: DiffOperator3) -> bool:
    """True when only the zero-order coefficient is non-constant and the
    constant part is closed-form separable (no mixed derivatives)."""
    has_var_zero = False
    for (a, b, c), val in op.coeffs.items():
        if _is_zero(val):
            continue
        if (a, b, c) == (0, 0, 0):
            has_var_zero = not _is_const(val)
            continue
        if not _is_const(val):
            return False
        if sum(o > 0 for o in (a, b, c)) > 1:
            return False
    return has_var_zero


def split_operator(
    op: DiffOperator3, degrees: tuple[int, int, int], options: SplitOptions | None = None
) -> CpFactors:
    """Choose a splitting: closed form when eligible, then exact handling of
    a separable or CP-decomposed zero-order part, else full CP."""
    options = options or SplitOptions()
    try:
        return closed_form_split(op, degrees)
    except NotSeparableError:
        pass
    als = dict(
        max_iter=options.max_iter,
        tol=options.tol,
        restarts=options.restarts,
        seed=options.seed,
    )
    if options.zero_order_separable is not None or (
        options.split_identity and _split_identity_eligible(op)
    ):
        rest = DiffOperator3(
            orders=op.orders,
            coeffs={k: v for k, v in op.coeffs.items() if k != (0, 0, 0)},
        )
        base = closed_form_split(rest, degrees)
        if options.zero_order_separable is not None:
            mult = zero_order_separable_split(
                options.zero_order_separable, op.orders, degrees
            )
        else:
            n1, n2, n3 = degrees
            b000 = cheb_interp_3d(_coeff_fn3(op.coeffs[(0, 0, 0)]), n1, n2, n3)
            raw, err, reg = cp_decompose(b000, options.mult_rank, **als)
            factors: tuple[list, list, list] = ([], [], [])
            for mode in range(3):
                for r in range(options.mult_rank):
                    mat = np.zeros((op.orders[mode] + 1, degrees[mode] + 1))
                    mat[0, :] = raw[mode][:, r]
                    factors[mode].append(mat)
            mult = CpFactors(
                rank=options.mult_rank, factors=factors, error=err, regularized=reg
            )
        return combine_splits(base, mult)
    tensor = build_coeff_tensor(op, degrees)
    constant = all(_is_const(v) for v in op.coeffs.values())
    return cp_factors_from_tensor(
        tensor, options.cp_rank, op.orders, None if constant else degrees, **als
    )
