import numpy as np
import numpy.testing as npt
import pytest

from spectracube.bc import ReducedSystem, normalize_leading_identity, assemble_boundary_set, dirichlet, reduce
from spectracube.cheb import cheb_interp_3d
from spectracube.opdisc import DiffOperator3, closed_form_split, discretize
from spectracube.tensolve import (
    GmresError,
    LaplaceLikeSolver,
    LaplaceLikeSystem,
    NotLaplaceLikeError,
    SingularOperatorError,
    SolverError,
    apply_reduced_operator,
    gmres_solve,
    make_preconditioner,
    quasi_tri_eigvals,
    real_schur,
    solve_laplace_like,
    solve_laplace_recursive,
    solve_reshape,
    to_laplace_like,
)
from spectracube.tensor3 import mode_mult, vectorize

rng = np.random.default_rng(31)

LAPLACE = {(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): 1.0}


def synthetic_system(lx, ly, lz, fhat, laplace_like=False) -> ReducedSystem:
    """Reduced system stub with given interior matrices (no boundary rows)."""
    return ReducedSystem(
        rank=len(lx),
        degrees=tuple(d - 1 for d in fhat.shape),
        orders=(0, 0, 0),
        lhat=(list(lx), list(ly), list(lz)),
        fhat=fhat,
        bset=None,
        op=None,
        ltilde=None,
        laplace_like=laplace_like,
        cp_error=0.0,
    )


def poisson_system(n):
    op = DiffOperator3(orders=(2, 2, 2), coeffs=dict(LAPLACE))
    d = discretize(op, (n, n, n), closed_form_split(op, (n, n, n)))
    degrees = (n, n, n)
    rows = [
        [dirichlet(m, -1, 0.0, degrees), dirichlet(m, 1, 0.0, degrees)]
        for m in (1, 2, 3)
    ]
    bset = normalize_leading_identity(
        assemble_boundary_set(rows, degrees, (2, 2, 2))
    )
    u_star = lambda x, y, z: np.sin(np.pi * x) * np.sin(np.pi * y) * np.sin(np.pi * z)
    f = cheb_interp_3d(lambda x, y, z: -3 * np.pi**2 * u_star(x, y, z), n, n, n)
    from spectracube.drivers import to_output_basis

    return reduce(d, to_output_basis(f, (2, 2, 2)), bset), u_star


# --- reshape backend ---------------------------------------------------------


def test_reshape_identity_system():
    f = rng.standard_normal((3, 4, 5))
    eye = [np.eye(3)], [np.eye(4)], [np.eye(5)]
    x, report = solve_reshape(synthetic_system(*eye, f))
    npt.assert_allclose(x, f, atol=1e-14)
    assert report.backend == "reshape"


def test_reshape_random_rank2_residual():
    dims = (3, 4, 5)
    f = rng.standard_normal(dims)
    lx = [rng.standard_normal((3, 3)) + 4 * np.eye(3) for _ in range(2)]
    ly = [rng.standard_normal((4, 4)) + 4 * np.eye(4) for _ in range(2)]
    lz = [rng.standard_normal((5, 5)) + 4 * np.eye(5) for _ in range(2)]
    sys = synthetic_system(lx, ly, lz, f)
    x, report = solve_reshape(sys)
    assert report.residual <= 1e-11 * np.max(np.abs(f))


def test_reshape_size_cap():
    f = np.zeros((40, 40, 40))
    eye = [np.eye(40)], [np.eye(40)], [np.eye(40)]
    with pytest.raises(SolverError, match="exceeds cap"):
        solve_reshape(synthetic_system(*eye, f), size_cap=1000)


def test_reshape_singular_matrix_error():
    f = rng.standard_normal((2, 2, 2))
    zero = np.zeros((2, 2))
    with pytest.raises(SolverError):
        solve_reshape(synthetic_system([zero], [np.eye(2)], [np.eye(2)], f))


# --- real Schur ---------------------------------------------------------------


def test_schur_triangular_input():
    t = np.triu(rng.standard_normal((6, 6)))
    fac = real_schur(t)
    npt.assert_allclose(np.abs(fac.q), np.eye(6), atol=1e-12)
    npt.assert_allclose(fac.q @ fac.t @ fac.q.T, t, atol=1e-12)


def test_schur_rotation_keeps_complex_pair():
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    fac = real_schur(rot)
    assert fac.t[1, 0] != 0.0  # one 2x2 block
    assert np.trace(fac.t) == pytest.approx(0.0, abs=1e-14)
    assert np.linalg.det(fac.t) == pytest.approx(1.0, abs=1e-14)


def test_schur_invariants_random():
    a = rng.standard_normal((20, 20))
    fac = real_schur(a)
    assert np.max(np.abs(fac.q.T @ fac.q - np.eye(20))) <= 1e-12
    err = np.linalg.norm(fac.q @ fac.t @ fac.q.T - a, "fro")
    assert err <= 1e-12 * np.linalg.norm(a, "fro")
    assert np.all(np.tril(fac.t, -2) == 0.0)
    sub = np.diag(fac.t, -1)
    assert not np.any((sub[:-1] != 0) & (sub[1:] != 0))


def _charpoly_coeffs(a):
    """Faddeev-LeVerrier characteristic polynomial coefficients."""
    n = a.shape[0]
    coeffs = [1.0]
    m = np.zeros_like(a)
    for k in range(1, n + 1):
        m = a @ m + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(a @ m) / k)
    return np.array(coeffs)


def test_schur_eigenvalues_match_charpoly_roots():
    for _ in range(5):
        a = rng.standard_normal((4, 4))
        fac = real_schur(a)
        got = np.sort_complex(quasi_tri_eigvals(fac.t))
        want = np.sort_complex(np.roots(_charpoly_coeffs(a)))
        npt.assert_allclose(got, want, atol=1e-8)


def test_schur_property_suite():
    # orthogonality, reconstruction, quasi-triangularity over many matrices
    r = np.random.default_rng(99)
    for trial in range(1000):
        n = int(r.integers(2, 51))
        a = r.standard_normal((n, n))
        fac = real_schur(a)
        assert np.max(np.abs(fac.q.T @ fac.q - np.eye(n))) <= 1e-12
        assert np.linalg.norm(fac.q @ fac.t @ fac.q.T - a) <= 1e-11 * max(
            np.linalg.norm(a), 1.0
        )
        assert np.all(np.tril(fac.t, -2) == 0.0)
        sub = np.diag(fac.t, -1)
        assert not np.any((sub[:-1] != 0) & (sub[1:] != 0))


# --- recursive solver ------------------------------------------------------------


def test_identity_laplace_like():
    f = rng.standard_normal((4, 4, 4))
    lls = LaplaceLikeSystem(np.eye(4), np.eye(4), np.eye(4), f)
    x, _ = solve_laplace_like(lls, base_cap=8)
    npt.assert_allclose(x, f / 3.0, atol=1e-14)


def test_diagonal_closed_form():
    dims = (5, 6, 7)
    du = rng.uniform(1, 2, 5)
    dv = rng.uniform(1, 2, 6)
    dw = rng.uniform(1, 2, 7)
    f = rng.standard_normal(dims)
    lls = LaplaceLikeSystem(np.diag(du), np.diag(dv), np.diag(dw), f)
    x, _ = solve_laplace_like(lls, base_cap=8)
    want = f / (du[:, None, None] + dv[None, :, None] + dw[None, None, :])
    npt.assert_allclose(x, want, atol=1e-12)


def test_dense_shifted_matches_explicit_kronecker():
    n = 9
    mats = [rng.standard_normal((n, n)) + 5 * np.eye(n) for _ in range(3)]
    f = rng.standard_normal((n, n, n))
    lls = LaplaceLikeSystem(*mats, f)
    x, report = solve_laplace_like(lls, base_cap=64)
    big = (
        np.kron(np.eye(n * n), mats[0])
        + np.kron(np.eye(n), np.kron(mats[1], np.eye(n)))
        + np.kron(mats[2], np.eye(n * n))
    )
    want = np.linalg.solve(big, vectorize(f)).reshape((n, n, n), order="F")
    assert np.max(np.abs(x - want)) <= 1e-10 * np.max(np.abs(want))
    assert report.iterations >= 1  # recursion actually happened


def test_singular_eigenvalue_sum_detected():
    d = np.diag([1.0, -2.0])  # 1 + 1 - 2 = 0
    f = rng.standard_normal((2, 2, 2))
    with pytest.raises(SingularOperatorError, match="eigenvalue sum"):
        LaplaceLikeSolver(d, d, d, base_cap=8).solve(f)


def test_recursive_residual_property():
    for _ in range(5):
        dims = tuple(rng.integers(8, 31, 3))
        mats = [
            rng.standard_normal((d, d)) + 4 * np.sqrt(d) * np.eye(d) for d in dims
        ]
        f = rng.standard_normal(dims)
        lls = LaplaceLikeSystem(*mats, f)
        x, report = solve_laplace_like(lls, base_cap=64)
        assert report.residual <= 1e-10 * np.max(np.abs(f))


# --- laplace-like transform --------------------------------------------------------


def test_poisson_recursive_equals_reshape():
    sys, _ = poisson_system(10)
    x1, _ = solve_reshape(sys)
    x2, _ = solve_laplace_recursive(sys)
    assert np.max(np.abs(x1 - x2)) <= 1e-11 * np.max(np.abs(x1))


def test_helmholtz_recursive_equals_reshape():
    n = 10
    op = DiffOperator3(orders=(2, 2, 2), coeffs={**LAPLACE, (0, 0, 0): 4.0})
    d = discretize(op, (n, n, n), closed_form_split(op, (n, n, n)))
    degrees = (n, n, n)
    rows = [
        [dirichlet(m, -1, 0.0, degrees), dirichlet(m, 1, 0.0, degrees)]
        for m in (1, 2, 3)
    ]
    bset = normalize_leading_identity(assemble_boundary_set(rows, degrees, (2, 2, 2)))
    f = rng.standard_normal((n + 1,) * 3)
    sys = reduce(d, f, bset)
    x1, _ = solve_reshape(sys)
    x2, _ = solve_laplace_recursive(sys)
    assert np.max(np.abs(x1 - x2)) <= 1e-11 * np.max(np.abs(x1))


def test_rank6_system_not_eligible():
    from spectracube.opdisc import discretize_separable_diffusion

    n = 6
    sq = lambda t: 1.0 + t**2
    d = discretize_separable_diffusion([(sq, sq, sq), (np.exp, np.exp, np.exp)], (n, n, n))
    degrees = (n, n, n)
    rows = [
        [dirichlet(m, -1, 0.0, degrees), dirichlet(m, 1, 0.0, degrees)]
        for m in (1, 2, 3)
    ]
    bset = normalize_leading_identity(assemble_boundary_set(rows, degrees, (2, 2, 2)))
    sys = reduce(d, np.zeros((n + 1,) * 3), bset)
    with pytest.raises(NotLaplaceLikeError):
        to_laplace_like(sys)


def test_distinct_companions_diffusion_recursive_equals_reshape():
    # separable diffusion with three different factors exercises the
    # per-mode companion inversion
    from spectracube.opdisc import discretize_separable_diffusion

    n = 10
    terms = (lambda t: 1.0 + t**2, lambda t: 2.0 + np.sin(t), lambda t: np.exp(t / 2))
    d = discretize_separable_diffusion(terms, (n, n, n))
    degrees = (n, n, n)
    rows = [
        [dirichlet(m, -1, 0.0, degrees), dirichlet(m, 1, 0.0, degrees)]
        for m in (1, 2, 3)
    ]
    bset = normalize_leading_identity(assemble_boundary_set(rows, degrees, (2, 2, 2)))
    f = rng.standard_normal((n + 1,) * 3)
    sys = reduce(d, f, bset)
    x1, _ = solve_reshape(sys)
    x2, _ = solve_laplace_recursive(sys)
    assert np.max(np.abs(x1 - x2)) <= 1e-10 * np.max(np.abs(x1))


# --- matrix-free operator -----------------------------------------------------------


def test_apply_reduced_zero_and_additivity():
    dims = (4, 4, 4)
    lx = [rng.standard_normal((4, 4)) for _ in range(2)]
    ly = [rng.standard_normal((4, 4)) for _ in range(2)]
    lz = [rng.standard_normal((4, 4)) for _ in range(2)]
    sys2 = synthetic_system(lx, ly, lz, np.zeros(dims))
    npt.assert_array_equal(apply_reduced_operator(sys2, np.zeros(dims)), np.zeros(dims))
    x = rng.standard_normal(dims)
    parts = [
        apply_reduced_operator(synthetic_system([lx[r]], [ly[r]], [lz[r]], np.zeros(dims)), x)
        for r in range(2)
    ]
    npt.assert_allclose(apply_reduced_operator(sys2, x), parts[0] + parts[1], atol=1e-13)


def test_apply_reduced_matches_kronecker():
    dims = (4, 4, 4)
    lx = [rng.standard_normal((4, 4))]
    ly = [rng.standard_normal((4, 4))]
    lz = [rng.standard_normal((4, 4))]
    sys = synthetic_system(lx, ly, lz, np.zeros(dims))
    x = rng.standard_normal(dims)
    big = np.kron(lz[0], np.kron(ly[0], lx[0]))
    npt.assert_allclose(
        vectorize(apply_reduced_operator(sys, x)), big @ vectorize(x), atol=1e-13
    )


# --- GMRES ---------------------------------------------------------------------


def test_gmres_identity_single_iteration():
    rhs = rng.standard_normal((3, 3, 3))
    x, report = gmres_solve(lambda t: t, None, rhs)
    npt.assert_allclose(x, rhs, atol=1e-13)
    assert report.iterations == 1


def test_gmres_matches_dense_solve():
    dims = (3, 4, 5)
    mats = [rng.standard_normal((d, d)) + 4 * np.eye(d) for d in dims]

    def op(t):
        return mode_mult(mode_mult(mode_mult(t, mats[0], 1), mats[1], 2), mats[2], 3)

    rhs = rng.standard_normal(dims)
    x, report = gmres_solve(op, None, rhs, restart=20, tol=1e-13, max_outer=50)
    big = np.kron(mats[2], np.kron(mats[1], mats[0]))
    want = np.linalg.solve(big, vectorize(rhs)).reshape(dims, order="F")
    assert np.max(np.abs(x - want)) <= 1e-10 * np.max(np.abs(want))


def test_gmres_exact_preconditioner_one_iteration():
    sys, _ = poisson_system(8)
    precond = make_preconditioner(sys)
    x, report = gmres_solve(
        lambda t: apply_reduced_operator(sys, t), precond, sys.fhat, restart=15
    )
    assert report.iterations == 1
    direct, _ = solve_reshape(sys)
    assert np.max(np.abs(x - direct)) <= 1e-9 * np.max(np.abs(direct))


def test_gmres_poisson_preconditions_helmholtz():
    n = 12
    op = DiffOperator3(orders=(2, 2, 2), coeffs={**LAPLACE, (0, 0, 0): 1.0})
    d = discretize(op, (n, n, n), closed_form_split(op, (n, n, n)))
    degrees = (n, n, n)
    rows = [
        [dirichlet(m, -1, 0.0, degrees), dirichlet(m, 1, 0.0, degrees)]
        for m in (1, 2, 3)
    ]
    bset = normalize_leading_identity(assemble_boundary_set(rows, degrees, (2, 2, 2)))
    f = rng.standard_normal((n + 1,) * 3)
    sys = reduce(d, f, bset)
    psys, _ = poisson_system(n)
    x, report = gmres_solve(
        lambda t: apply_reduced_operator(sys, t),
        make_preconditioner(psys),
        sys.fhat,
    )
    assert report.iterations <= 10 * 15
    assert report.residual <= 1e-9 * np.max(np.abs(sys.fhat))


def test_gmres_stagnation_reports_best_iterate():
    # a cyclic shift makes GMRES(2) sit at the initial residual
    dims = (8, 1, 1)
    perm = np.roll(np.eye(8), 1, axis=0)

    def op(t):
        return mode_mult(t, perm, 1)

    rhs = np.zeros(dims)
    rhs[0, 0, 0] = 1.0
    with pytest.raises(GmresError) as err:
        gmres_solve(op, None, rhs, restart=2, tol=1e-12, max_outer=50)
    assert err.value.best.shape == dims
    assert err.value.iterations > 0


def test_gmres_iteration_budget_exhaustion():
    dims = (6, 6, 6)
    mats = [rng.standard_normal((6, 6)) + 8 * np.eye(6) for _ in range(3)]

    def op(t):
        return mode_mult(mode_mult(mode_mult(t, mats[0], 1), mats[1], 2), mats[2], 3)

    with pytest.raises(GmresError, match="did not converge"):
        gmres_solve(op, None, rng.standard_normal(dims), restart=2, tol=1e-14, max_outer=1)


# --- backend equivalence (module-level slice of acceptance #3) ------------------------


def test_backend_equivalence_random_systems():
    r = np.random.default_rng(5)
    for _ in range(10):
        dims = tuple(int(d) for d in r.integers(3, 13, 3))
        mats = [r.standard_normal((d, d)) + 4 * np.sqrt(d) * np.eye(d) for d in dims]
        f = r.standard_normal(dims)
        lls = LaplaceLikeSystem(*mats, f)
        x, _ = solve_laplace_like(lls, base_cap=32)
        big = (
            np.kron(np.eye(dims[2] * dims[1]), mats[0])
            + np.kron(np.eye(dims[2]), np.kron(mats[1], np.eye(dims[0])))
            + np.kron(mats[2], np.eye(dims[1] * dims[0]))
        )
        want = np.linalg.solve(big, vectorize(f)).reshape(dims, order="F")
        assert np.max(np.abs(x - want)) <= 1e-9 * np.max(np.abs(want))
