"""Dense order-3 tensor arithmetic: matricization, mode products, blocks.

A coefficient tensor is a ``float64`` ndarray of shape ``(d1, d2, d3)``.
Its canonical linearization is mode-1 fastest, ``index = i + j*d1 + k*d1*d2``,
i.e. Fortran ravel order.  Under this convention the reshaped system matrix
is ``Lz (x) Ly (x) Lx`` with ``(x)`` the Kronecker product, and
``vec(t x1 A x2 B x3 C) == (C (x) B (x) A) vec(t)``.

All operations are pure functions on immutable inputs; no shared state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Dimension mismatch between a tensor and an operand."""


BLOCK_IDS = (111, 112, 121, 122, 211, 212, 221, 222)


@dataclass(frozen=True)
class BlockSplit:
    """Boundary-row counts per mode for the eight-block decomposition.

    Block id digit 1 selects the leading ``n*`` indices of a mode, digit 2
    the trailing ``dim - n*`` indices; the first digit refers to mode 1.
    """

    nx: int
    ny: int
    nz: int
    dims: tuple[int, int, int]

    def __post_init__(self):
        for n, d, name in zip((self.nx, self.ny, self.nz), self.dims, "xyz"):
            if not 0 <= n < d:
                raise ShapeError(
                    f"invalid split: n{name}={n} must lie in [0, {d}) for dims {self.dims}"
                )

    def ranges(self, which: int) -> tuple[slice, slice, slice]:
        digits = [int(c) for c in str(which)]
        if len(digits) != 3 or any(c not in (1, 2) for c in digits):
            raise ValueError(f"block id must be three digits of 1/2, got {which}")
        cuts = (self.nx, self.ny, self.nz)
        return tuple(
            slice(0, c) if dig == 1 else slice(c, d)
            for dig, c, d in zip(digits, cuts, self.dims)
        )


def _as_tensor3(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim != 3:
        raise ShapeError(f"expected an order-3 tensor, got ndim={t.ndim}")
    return t


def mode_matricize(t: np.ndarray, mode: int) -> np.ndarray:
    """Unfold the mode-``mode`` fibers of ``t`` into the columns of a matrix.

    Column ordering follows the canonical linearization of the remaining
    modes, so :func:`mode_refold` is the exact inverse.
    """
    t = _as_tensor3(t)
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    ax = mode - 1
    return np.reshape(np.moveaxis(t, ax, 0), (t.shape[ax], -1), order="F")


def mode_refold(m: np.ndarray, mode: int, dims: tuple[int, int, int]) -> np.ndarray:
    """Inverse of :func:`mode_matricize` for a tensor of shape ``dims``."""
    ax = mode - 1
    rest = [d for i, d in enumerate(dims) if i != ax]
    if m.shape != (dims[ax], rest[0] * rest[1]):
        raise ShapeError(
            f"matrix shape {m.shape} does not refold into dims {dims} along mode {mode}"
        )
    t = np.reshape(m, (dims[ax], *rest), order="F")
    return np.moveaxis(t, 0, ax)


def mode_mult(t: np.ndarray, m: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` product: multiply ``m`` against every mode fiber.

    Satisfies ``mode_matricize(mode_mult(t, m, mode), mode)
    == m @ mode_matricize(t, mode)``.
    """
    t = _as_tensor3(t)
    m = np.asarray(m, dtype=float)
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    ax = mode - 1
    if m.ndim != 2 or m.shape[1] != t.shape[ax]:
        raise ShapeError(
            f"mode-{mode} product needs a matrix with {t.shape[ax]} columns, "
            f"got shape {m.shape} against tensor dims {t.shape}"
        )
    return np.moveaxis(np.tensordot(m, t, axes=([1], [ax])), 0, ax)


def vectorize(t: np.ndarray) -> np.ndarray:
    """Flatten in the canonical (mode-1 fastest) linearization order."""
    return _as_tensor3(t).ravel(order="F")


def unvectorize(v: np.ndarray, dims: tuple[int, int, int]) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.size != dims[0] * dims[1] * dims[2]:
        raise ShapeError(f"vector of length {v.size} does not fold into dims {dims}")
    return v.reshape(dims, order="F")


def kron3_matvec(a: np.ndarray, b: np.ndarray, c: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Compute ``(C (x) B (x) A) vec(t)`` via three mode products.

    Never materializes the Kronecker matrix.
    """
    return vectorize(mode_mult(mode_mult(mode_mult(t, a, 1), b, 2), c, 3))


def extract_block(t: np.ndarray, split: BlockSplit, which: int) -> np.ndarray:
    """One of the eight blocks of ``t`` under ``split``; 222 is the trailing box."""
    t = _as_tensor3(t)
    if t.shape != split.dims:
        raise ShapeError(f"split dims {split.dims} do not match tensor dims {t.shape}")
    return t[split.ranges(which)].copy()


def insert_block(t: np.ndarray, split: BlockSplit, which: int, block: np.ndarray) -> np.ndarray:
    """Return a copy of ``t`` with block ``which`` replaced."""
    t = _as_tensor3(t).copy()
    if t.shape != split.dims:
        raise ShapeError(f"split dims {split.dims} do not match tensor dims {t.shape}")
    sl = split.ranges(which)
    target_shape = t[sl].shape
    block = np.asarray(block, dtype=float)
    if block.shape != target_shape:
        raise ShapeError(f"block {which} must have shape {target_shape}, got {block.shape}")
    t[sl] = block
    return t


def dump_text(t: np.ndarray) -> str:
    """Serialize in the interchange format: header then one scalar per line."""
    t = _as_tensor3(t)
    lines = ["tensor3 %d %d %d" % t.shape]
    lines.extend("%.17e" % v for v in vectorize(t))
    return "\n".join(lines) + "\n"


def load_text(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("tensor3 "):
        raise ValueError("not a tensor3 dump: missing 'tensor3 d1 d2 d3' header")
    try:
        dims = tuple(int(tok) for tok in lines[0].split()[1:])
        if len(dims) != 3:
            raise ValueError
    except ValueError:
        raise ValueError(f"malformed tensor3 header: {lines[0]!r}") from None
    vals = np.array([float(ln) for ln in lines[1:]])
    if vals.size != dims[0] * dims[1] * dims[2]:
        raise ValueError(
            f"tensor3 dump has {vals.size} values, header says {dims[0] * dims[1] * dims[2]}"
        )
    if not np.all(np.isfinite(vals)):
        raise ValueError("tensor3 dump contains non-finite values")
    return unvectorize(vals, dims)
