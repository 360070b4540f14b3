"""Chebyshev and ultraspherical basis machinery.

Interpolation on second-kind Chebyshev grids (DCT-I based), Clenshaw-style
evaluation, the sparse differentiation / basis-conversion / multiplication
matrices acting on coefficient vectors, and exact integration of Chebyshev
series.

Conventions: coefficient vectors are 0-indexed, length ``n + 1`` for degree
``n``.  ``diff_matrix(lam, n)`` maps Chebyshev coefficients to coefficients
of the ``lam``-th derivative in the ultraspherical family with parameter
``lam``; ``conv_matrix(0, n)`` maps Chebyshev to parameter-1 coefficients and
``conv_matrix(lam, n)`` raises the parameter by one.
"""

from __future__ import annotations

from math import factorial

import numpy as np
import numpy.polynomial.chebyshev as npcheb
from scipy.fft import dct


def cheb_points(n: int) -> np.ndarray:
    """Second-kind Chebyshev points cos(j*pi/n), j = 0..n; {0} for n = 0."""
    if n < 0:
        raise ValueError(f"degree must be non-negative, got {n}")
    if n == 0:
        return np.zeros(1)
    return np.cos(np.pi * np.arange(n + 1) / n)


def vals_to_coeffs(vals: np.ndarray, axis: int = 0) -> np.ndarray:
    """Chebyshev coefficients from values on the second-kind grid (one axis)."""
    vals = np.asarray(vals, dtype=float)
    n = vals.shape[axis] - 1
    if n == 0:
        return vals.copy()
    c = dct(vals, type=1, axis=axis) / n
    edge = [slice(None)] * vals.ndim
    edge[axis] = slice(0, None, n)
    c[tuple(edge)] /= 2.0
    return c


def coeffs_to_vals(c: np.ndarray, axis: int = 0) -> np.ndarray:
    """Inverse of :func:`vals_to_coeffs` (synthesis on the same grid)."""
    c = np.asarray(c, dtype=float)
    n = c.shape[axis] - 1
    if n == 0:
        return c.copy()
    ch = c.copy()
    mid = [slice(None)] * c.ndim
    mid[axis] = slice(1, n)
    ch[tuple(mid)] /= 2.0
    return dct(ch, type=1, axis=axis)


def cheb_interp_1d(f, n: int) -> np.ndarray:
    """Degree-n Chebyshev interpolant of a scalar function on [-1, 1]."""
    x = cheb_points(n)
    vals = np.asarray(f(x), dtype=float)
    if vals.shape != x.shape:
        vals = np.array([f(xi) for xi in x], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("function returned non-finite samples on the Chebyshev grid")
    return vals_to_coeffs(vals)


def cheb_interp_3d(f, n1: int, n2: int, n3: int) -> np.ndarray:
    """Tensorized interpolant of ``f(x, y, z)``; exact at all grid points.

    ``f`` must accept broadcast ndarray arguments.
    """
    x, y, z = cheb_points(n1), cheb_points(n2), cheb_points(n3)
    vals = np.asarray(
        f(x[:, None, None], y[None, :, None], z[None, None, :]), dtype=float
    )
    vals = np.broadcast_to(vals, (n1 + 1, n2 + 1, n3 + 1)).copy()
    if not np.all(np.isfinite(vals)):
        raise ValueError("function returned non-finite samples on the Chebyshev grid")
    for ax in range(3):
        vals = vals_to_coeffs(vals, axis=ax)
    return vals


def eval_cheb_3d(u: np.ndarray, x, y, z):
    """Evaluate a coefficient tensor at points (scalars or equal-length arrays).

    Points outside [-1, 1]^3 are evaluated as-is (polynomial extrapolation).
    """
    u = np.asarray(u, dtype=float)
    scalar = np.isscalar(x) and np.isscalar(y) and np.isscalar(z)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    tx = npcheb.chebvander(xs, u.shape[0] - 1)
    ty = npcheb.chebvander(ys, u.shape[1] - 1)
    tz = npcheb.chebvander(zs, u.shape[2] - 1)
    a = np.tensordot(tx, u, axes=([1], [0]))
    b = np.einsum("pjk,pj->pk", a, ty)
    out = np.einsum("pk,pk->p", b, tz)
    return float(out[0]) if scalar else out


def eval_ultra_1d(lam: int, c: np.ndarray, x) -> np.ndarray:
    """Evaluate an ultraspherical series by the three-term recurrence.

    Test-oracle quality; adequate for degrees up to a few hundred.
    """
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    p_prev = np.ones_like(x)
    total = c[0] * p_prev
    if len(c) == 1:
        return total
    p_cur = 2.0 * lam * x
    total = total + c[1] * p_cur
    for k in range(1, len(c) - 1):
        p_next = (2.0 * (k + lam) * x * p_cur - (k + 2 * lam - 1) * p_prev) / (k + 1)
        total = total + c[k + 1] * p_next
        p_prev, p_cur = p_cur, p_next
    return total


def eval_ultra_3d(lams: tuple[int, int, int], u: np.ndarray, x, y, z) -> np.ndarray:
    """Evaluate a tensor of mixed ultraspherical coefficients (lam = 0 means Chebyshev)."""
    u = np.asarray(u, dtype=float)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    zs = np.atleast_1d(np.asarray(z, dtype=float))

    def basis(lam, pts, n):
        if lam == 0:
            return npcheb.chebvander(pts, n)
        cols = [eval_ultra_1d(lam, np.eye(n + 1)[k], pts) for k in range(n + 1)]
        return np.column_stack(cols)

    tx = basis(lams[0], xs, u.shape[0] - 1)
    ty = basis(lams[1], ys, u.shape[1] - 1)
    tz = basis(lams[2], zs, u.shape[2] - 1)
    a = np.tensordot(tx, u, axes=([1], [0]))
    b = np.einsum("pjk,pj->pk", a, ty)
    return np.einsum("pk,pk->p", b, tz)


def diff_matrix(lam: int, n: int) -> np.ndarray:
    """Sparse differentiation matrix: Chebyshev coefficients to the
    parameter-``lam`` coefficients of the ``lam``-th derivative.

    Entries ``(k, k + lam) = 2^(lam-1) (lam-1)! (k + lam)``; all-zero when
    ``lam > n`` (the derivative annihilates the whole space).
    """
    if lam < 1:
        raise ValueError(f"differentiation order must be >= 1, got {lam}")
    d = np.zeros((n + 1, n + 1))
    pref = 2.0 ** (lam - 1) * factorial(lam - 1)
    k = np.arange(0, n + 1 - lam)
    d[k, k + lam] = pref * (k + lam)
    return d


def conv_matrix(lam: int, n: int) -> np.ndarray:
    """Basis-raising matrix: Chebyshev -> parameter 1 for ``lam = 0``,
    parameter ``lam`` -> ``lam + 1`` for ``lam >= 1``.  Upper triangular,
    bandwidth 2.
    """
    if lam < 0:
        raise ValueError(f"basis parameter must be >= 0, got {lam}")
    s = np.zeros((n + 1, n + 1))
    k = np.arange(n + 1)
    if lam == 0:
        s[k, k] = 0.5
        s[0, 0] = 1.0
        s[k[:-2], k[:-2] + 2] = -0.5
    else:
        s[k, k] = lam / (lam + k)
        s[k[:-2], k[:-2] + 2] = -lam / (lam + k[:-2] + 2)
    return s


def conv_chain(lam_from: int, lam_to: int, n: int) -> np.ndarray:
    """Product of conversion matrices raising the parameter from
    ``lam_from`` to ``lam_to`` (identity when equal)."""
    m = np.eye(n + 1)
    for lam in range(lam_from, lam_to):
        m = conv_matrix(lam, n) @ m
    return m


def mult_matrix_cheb(v: np.ndarray) -> np.ndarray:
    """Multiplication matrix in the Chebyshev basis: half Toeplitz plus a
    Hankel part with zeroed first row; ``mult_matrix_cheb(v) @ u`` are the
    coefficients of the degree-truncated product ``v * u``."""
    v = np.asarray(v, dtype=float)
    n = len(v) - 1
    i = np.arange(n + 1)
    toep = v[np.abs(i[:, None] - i[None, :])]
    toep[i, i] = 2.0 * v[0]
    hank = np.zeros((n + 1, n + 1))
    rows, cols = np.nonzero((i[:, None] + i[None, :] <= n) & (i[:, None] >= 1))
    hank[rows, cols] = v[rows + cols]
    return 0.5 * (toep + hank)


def shift_matrix_ultra(lam: int, n: int) -> np.ndarray:
    """Tridiagonal multiplication-by-x matrix in the parameter-``lam`` basis."""
    m = np.zeros((n + 1, n + 1))
    k = np.arange(n + 1)
    m[k[:-1], k[:-1] + 1] = (k[:-1] + 2 * lam) / (2.0 * (lam + k[:-1] + 1))
    m[k[1:], k[1:] - 1] = k[1:] / (2.0 * (lam + k[1:] - 1))
    return m


def mult_matrix_ultra(lam: int, v: np.ndarray) -> np.ndarray:
    """Multiplication matrix in the parameter-``lam`` basis.

    ``v`` holds the multiplier's coefficients in the same basis.  Built from
    the matrix three-term recurrence seeded by the identity and twice-lambda
    times the shift matrix.
    """
    if lam < 1:
        raise ValueError(f"basis parameter must be >= 1, got {lam}")
    v = np.asarray(v, dtype=float)
    n = len(v) - 1
    shift = shift_matrix_ultra(lam, n)
    m_prev = np.eye(n + 1)
    out = v[0] * m_prev
    if n == 0:
        return out
    m_cur = 2.0 * lam * shift
    out = out + v[1] * m_cur
    for i in range(n - 1):
        m_next = (2.0 * (i + lam + 1) * (shift @ m_cur) - (i + 2 * lam) * m_prev) / (i + 2)
        out = out + v[i + 2] * m_next
        m_prev, m_cur = m_cur, m_next
    return out


def cheb_integral_weights(n: int) -> np.ndarray:
    """Integrals of T_k over [-1, 1]: 2/(1 - k^2) for even k, zero for odd."""
    k = np.arange(n + 1)
    w = np.zeros(n + 1)
    even = k % 2 == 0
    w[even] = 2.0 / (1.0 - k[even] ** 2)
    return w


def cheb_integral(c: np.ndarray) -> float:
    """Exact integral of a Chebyshev series over [-1, 1]."""
    c = np.asarray(c, dtype=float)
    return float(c @ cheb_integral_weights(len(c) - 1))


def inner_product_3d(u: np.ndarray, v: np.ndarray) -> float:
    """L2 inner product over the cube of two Chebyshev coefficient tensors.

    The product polynomial is re-interpolated at the summed degrees per mode
    (exact for polynomial times polynomial) and integrated with the
    tensorized Chebyshev weights.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    dims = tuple(u.shape[i] + v.shape[i] - 1 for i in range(3))
    up = np.zeros(dims)
    up[: u.shape[0], : u.shape[1], : u.shape[2]] = u
    vp = np.zeros(dims)
    vp[: v.shape[0], : v.shape[1], : v.shape[2]] = v
    for ax in range(3):
        up = coeffs_to_vals(up, axis=ax)
        vp = coeffs_to_vals(vp, axis=ax)
    pw = up * vp
    for ax in range(3):
        pw = vals_to_coeffs(pw, axis=ax)
    w = [cheb_integral_weights(d - 1) for d in dims]
    return float(np.einsum("ijk,i,j,k->", pw, *w))


def l2_norm_3d(u: np.ndarray) -> float:
    return float(np.sqrt(max(inner_product_3d(u, u), 0.0)))
