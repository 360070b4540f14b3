"""Boundary constraints and their substitution into the discretized PDE.

Boundary conditions are per-mode linear constraints ``u x_k B_k = G_k``.
After normalizing each ``B_k`` to a leading identity block, substitution
eliminates the leading coefficient rows and leaves a square system for the
trailing interior block, from which the full coefficient tensor is
reconstructed.
"""

from __future__ import annotations

import warnings as _warnings
from dataclasses import dataclass, field

import numpy as np

from .cheb import cheb_points, vals_to_coeffs
from .opdisc import DiscretizedOperator
from .tensor3 import ShapeError, mode_mult


class BoundaryConditionError(ValueError):
    """Invalid or inconsistent boundary-condition configuration."""


@dataclass
class BoundaryOperator:
    """Constraint rows for one mode: ``u x_mode b = g``.

    ``b`` has one row per constraint; ``g`` is an order-3 tensor whose
    mode-``mode`` extent equals the number of rows (slab ``i`` belongs to row
    ``i`` of ``b``).
    """

    mode: int
    b: np.ndarray
    g: np.ndarray

    @property
    def nrows(self) -> int:
        return self.b.shape[0]


@dataclass
class BoundarySet:
    ops: tuple[BoundaryOperator, BoundaryOperator, BoundaryOperator]
    normalized: bool = False
    warnings: list = field(default_factory=list)

    def row_counts(self) -> tuple[int, int, int]:
        return tuple(op.nrows for op in self.ops)


def _bivariate_coeffs(data, na: int, nb: int) -> np.ndarray:
    """Chebyshev coefficient matrix of face data on the (na, nb) grid."""
    if data is None or (np.isscalar(data) and float(data) == 0.0):
        return np.zeros((na + 1, nb + 1))
    if np.isscalar(data):
        h = np.zeros((na + 1, nb + 1))
        h[0, 0] = float(data)
        return h
    sa, sb = cheb_points(na), cheb_points(nb)
    vals = np.asarray(data(sa[:, None], sb[None, :]), dtype=float)
    vals = np.broadcast_to(vals, (na + 1, nb + 1)).copy()
    if not np.all(np.isfinite(vals)):
        raise BoundaryConditionError("boundary data returned non-finite samples")
    return vals_to_coeffs(vals_to_coeffs(vals, axis=0), axis=1)


def dirichlet(mode: int, side: int, data, degrees: tuple[int, int, int]):
    """One Dirichlet constraint row: value on the face ``x_mode = side``.

    Returns ``(row, slab)``: the row ``(T_0(side), ..., T_n(side))`` and the
    bivariate interpolant coefficients of ``data`` over the other two modes
    (in mode order).
    """
    if mode not in (1, 2, 3) or side not in (-1, 1):
        raise BoundaryConditionError(f"bad face: mode={mode} side={side}")
    n = degrees[mode - 1]
    i = np.arange(n + 1)
    row = np.ones(n + 1) if side == 1 else (-1.0) ** i
    others = [degrees[m] for m in range(3) if m != mode - 1]
    return row, _bivariate_coeffs(data, *others)


def neumann(mode: int, side: int, data, degrees: tuple[int, int, int]):
    """One Neumann constraint row: normal-direction derivative on a face.

    Row entries are ``T_i'(side)``: ``i^2`` at the right face and
    ``(-1)^(i+1) i^2`` at the left (odd reflection of the derivative).
    """
    if mode not in (1, 2, 3) or side not in (-1, 1):
        raise BoundaryConditionError(f"bad face: mode={mode} side={side}")
    n = degrees[mode - 1]
    i = np.arange(n + 1)
    row = i.astype(float) ** 2
    if side == -1:
        row = row * (-1.0) ** (i + 1)
    others = [degrees[m] for m in range(3) if m != mode - 1]
    return row, _bivariate_coeffs(data, *others)


def assemble_boundary_set(
    rows_by_mode, degrees: tuple[int, int, int], orders: tuple[int, int, int],
    compat_tol: float = 1e-8,
) -> BoundarySet:
    """Stack per-mode constraint rows into a BoundarySet.

    ``rows_by_mode[m]`` is the list of ``(row, slab)`` pairs for mode
    ``m + 1`` in stacking order (convention: side -1 before side +1 for
    two-sided conditions).  The number of rows must equal the operator order
    of the mode.  Full row rank is required; cross-mode data compatibility is
    checked and attaches a warning when violated.
    """
    ops = []
    for m in range(3):
        rows = rows_by_mode[m]
        n = degrees[m]
        if len(rows) != orders[m]:
            raise BoundaryConditionError(
                f"mode {m + 1} needs {orders[m]} boundary rows (operator order), "
                f"got {len(rows)}"
            )
        gdims = [degrees[0] + 1, degrees[1] + 1, degrees[2] + 1]
        gdims[m] = len(rows)
        b = np.zeros((len(rows), n + 1))
        g = np.zeros(gdims)
        for k, (row, slab) in enumerate(rows):
            row = np.asarray(row, dtype=float)
            if row.shape != (n + 1,):
                raise ShapeError(f"mode {m + 1} row {k} has length {row.size}, expected {n + 1}")
            b[k] = row
            sl = [slice(None)] * 3
            sl[m] = k
            g[tuple(sl)] = slab
        if len(rows) > 0:
            svals = np.linalg.svd(b, compute_uv=False)
            if svals[-1] <= 1e-10 * svals[0]:
                raise BoundaryConditionError(
                    f"mode {m + 1} boundary rows are (nearly) linearly dependent: "
                    f"sigma_min/sigma_max = {svals[-1] / svals[0]:.2e}"
                )
        ops.append(BoundaryOperator(mode=m + 1, b=b, g=g))

    warns = []
    mismatch = 0.0
    for ma in range(3):
        for mb in range(ma + 1, 3):
            if ops[ma].nrows == 0 or ops[mb].nrows == 0:
                continue
            lhs = mode_mult(ops[ma].g, ops[mb].b, mb + 1)
            rhs = mode_mult(ops[mb].g, ops[ma].b, ma + 1)
            mismatch = max(mismatch, float(np.max(np.abs(lhs - rhs))))
    if mismatch > compat_tol:
        msg = f"boundary data incompatible along shared edges: max mismatch {mismatch:.3e}"
        warns.append(msg)
        _warnings.warn(msg, stacklevel=2)
    return BoundarySet(ops=tuple(ops), normalized=False, warnings=warns)


def normalize_leading_identity(bset: BoundarySet, cond_limit: float = 1e10) -> BoundarySet:
    """Equivalent constraints whose leading N x N block is exactly the identity."""
    ops = []
    changed = False
    for op in bset.ops:
        nr = op.nrows
        if nr == 0:
            ops.append(BoundaryOperator(op.mode, op.b.copy(), op.g.copy()))
            continue
        lead = op.b[:, :nr]
        if np.allclose(lead, np.eye(nr), rtol=0.0, atol=0.0):
            ops.append(BoundaryOperator(op.mode, op.b.copy(), op.g.copy()))
            continue
        cond = np.linalg.cond(lead)
        if not np.isfinite(cond) or cond >= cond_limit:
            raise BoundaryConditionError(
                f"mode {op.mode}: leading {nr}x{nr} block of the boundary rows is "
                f"ill-conditioned (cond {cond:.2e}); reorder the rows so the leading "
                f"block is invertible"
            )
        b = np.linalg.solve(lead, op.b)
        b[:, :nr] = np.eye(nr)
        g = mode_mult(op.g, np.linalg.solve(lead, np.eye(nr)), op.mode)
        ops.append(BoundaryOperator(op.mode, b, g))
        changed = True
    return BoundarySet(ops=tuple(ops), normalized=True, warnings=list(bset.warnings)) if (
        changed or not bset.normalized
    ) else bset


def constraint_residual(u: np.ndarray, bset: BoundarySet) -> float:
    """Max-norm violation of all three constraint equations."""
    res = 0.0
    for op in bset.ops:
        if op.nrows == 0:
            continue
        res = max(res, float(np.max(np.abs(mode_mult(u, op.b, op.mode) - op.g))))
    return res


@dataclass
class ReducedSystem:
    """Square tensor-valued system for the trailing interior block.

    Carries the reduction provenance (full and substituted matrices plus the
    normalized boundary set) so right sides can be re-reduced cheaply and
    solutions reconstructed.
    """

    rank: int
    degrees: tuple[int, int, int]
    orders: tuple[int, int, int]
    lhat: tuple[list, list, list]
    fhat: np.ndarray
    bset: BoundarySet
    op: DiscretizedOperator
    ltilde: tuple[list, list, list]
    laplace_like: bool
    cp_error: float

    @property
    def interior_dims(self) -> tuple[int, int, int]:
        return tuple(n + 1 - nr for n, nr in zip(self.degrees, self.orders))

    def with_rhs(self, f: np.ndarray) -> "ReducedSystem":
        """Same operator and constraints, new right side."""
        fhat = _reduce_rhs(self.op, f, self.bset, self.ltilde)
        return ReducedSystem(
            rank=self.rank, degrees=self.degrees, orders=self.orders,
            lhat=self.lhat, fhat=fhat, bset=self.bset, op=self.op,
            ltilde=self.ltilde, laplace_like=self.laplace_like,
            cp_error=self.cp_error,
        )


def _reduce_rhs(d, f, bset, ltilde) -> np.ndarray:
    nr = bset.row_counts()
    f = np.asarray(f, dtype=float)
    want = tuple(n + 1 for n in d.degrees)
    if f.shape != want:
        raise ShapeError(f"right side dims {f.shape} do not match degrees + 1 = {want}")
    ftil = f.copy()
    gs = [op.g for op in bset.ops]
    nonzero_g = [op.nrows > 0 and np.any(op.g) for op in bset.ops]
    for r in range(d.rank):
        lx, ly, lz = d.lx[r], d.ly[r], d.lz[r]
        ltx, lty = ltilde[0][r], ltilde[1][r]
        if nonzero_g[0]:
            t = mode_mult(gs[0], lx[:, : nr[0]], 1)
            t = mode_mult(t, ly, 2)
            ftil -= mode_mult(t, lz, 3)
        if nonzero_g[1]:
            t = mode_mult(gs[1], ltx, 1)
            t = mode_mult(t, ly[:, : nr[1]], 2)
            ftil -= mode_mult(t, lz, 3)
        if nonzero_g[2]:
            t = mode_mult(gs[2], ltx, 1)
            t = mode_mult(t, lty, 2)
            ftil -= mode_mult(t, lz[:, : nr[2]], 3)
    d1, d2, d3 = (want[i] - nr[i] for i in range(3))
    return ftil[:d1, :d2, :d3].copy()


def reduce(d: DiscretizedOperator, f: np.ndarray, bset: BoundarySet) -> ReducedSystem:
    """Substitute normalized boundary constraints into the discretized PDE.

    Builds the substituted matrices, asserts their structurally-zero leading
    columns (then zeroes them exactly), extracts the square interior
    matrices, and reduces the right side with the three correction sums.
    """
    if not bset.normalized:
        raise BoundaryConditionError("boundary set must be normalized before reduction")
    nr = bset.row_counts()
    if nr != d.orders:
        raise BoundaryConditionError(
            f"boundary rows per mode {nr} do not match operator orders {d.orders}"
        )
    ltilde: tuple[list, list, list] = ([], [], [])
    lhat: tuple[list, list, list] = ([], [], [])
    for mode in range(3):
        n = d.degrees[mode]
        b = bset.ops[mode].b
        for r in range(d.rank):
            l_full = d.mats(mode)[r]
            if nr[mode] == 0:
                lt = l_full.copy()
            else:
                lt = l_full - l_full[:, : nr[mode]] @ b
                scale = max(np.max(np.abs(l_full)), 1.0)
                lead_max = np.max(np.abs(lt[:, : nr[mode]]))
                if lead_max > 1e-12 * scale:
                    raise BoundaryConditionError(
                        f"substitution left non-zero leading columns in mode {mode + 1} "
                        f"(max {lead_max:.2e}); boundary set appears unnormalized"
                    )
                lt[:, : nr[mode]] = 0.0
            ltilde[mode].append(lt)
            lhat[mode].append(lt[: n + 1 - nr[mode], nr[mode]:].copy())
    fhat = _reduce_rhs(d, f, bset, ltilde)
    return ReducedSystem(
        rank=d.rank, degrees=d.degrees, orders=d.orders, lhat=lhat, fhat=fhat,
        bset=bset, op=d, ltilde=ltilde, laplace_like=d.laplace_like,
        cp_error=d.cp_error,
    )


def reconstruct(u222: np.ndarray, bset: BoundarySet) -> np.ndarray:
    """Assemble the full coefficient tensor from the interior block and the
    normalized constraints, in dependency order."""
    if not bset.normalized:
        raise BoundaryConditionError("boundary set must be normalized for reconstruction")
    b1, b2, b3 = (op.b for op in bset.ops)
    g1, g2, g3 = (op.g for op in bset.ops)
    n1r, n2r, n3r = bset.row_counts()
    d1 = u222.shape[0] + n1r
    d2 = u222.shape[1] + n2r
    d3 = u222.shape[2] + n3r
    bb1, bb2, bb3 = b1[:, n1r:], b2[:, n2r:], b3[:, n3r:]
    u = np.zeros((d1, d2, d3))
    u[n1r:, n2r:, n3r:] = u222
    if n1r:
        u[:n1r, n2r:, n3r:] = g1[:, n2r:, n3r:] - mode_mult(u222, bb1, 1)
    if n2r:
        u[n1r:, :n2r, n3r:] = g2[n1r:, :, n3r:] - mode_mult(u222, bb2, 2)
    if n3r:
        u[n1r:, n2r:, :n3r] = g3[n1r:, n2r:, :] - mode_mult(u222, bb3, 3)
    if n1r and n2r:
        u[:n1r, :n2r, n3r:] = g1[:, :n2r, n3r:] - mode_mult(u[n1r:, :n2r, n3r:], bb1, 1)
    if n1r and n3r:
        u[:n1r, n2r:, :n3r] = g1[:, n2r:, :n3r] - mode_mult(u[n1r:, n2r:, :n3r], bb1, 1)
    if n2r and n3r:
        u[n1r:, :n2r, :n3r] = g3[n1r:, :n2r, :] - mode_mult(u[n1r:, :n2r, n3r:], bb3, 3)
    if n1r and n2r and n3r:
        u[:n1r, :n2r, :n3r] = g1[:, :n2r, :n3r] - mode_mult(u[n1r:, :n2r, :n3r], bb1, 1)
    return u
