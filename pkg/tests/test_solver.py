import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bilaplace.lattice import GridFunction, LatticeDomain
from bilaplace.operators import bilaplacian, delta_function
from bilaplace.solver import (DENSE_CAP, NonConvergenceError, SizeError, assemble_bilaplacian, dense_matrix,
                              dense_solve, energy_norm, solve_bilaplacian)


def test_matrix_is_symmetric_positive_definite():
    d = LatticeDomain(2, 6)
    A = dense_matrix(d)
    np.testing.assert_allclose(A, A.T)
    assert np.linalg.eigvalsh(A).min() > 0


def test_matrix_matches_grid_operator_columns():
    d = LatticeDomain(2, 5)
    A = assemble_bilaplacian(d).toarray()
    e = np.zeros(d.num_interior)
    e[7] = 1.0
    col = bilaplacian(GridFunction.interior(d, e)).interior_values().ravel()
    np.testing.assert_allclose(A[:, 7], col)


@pytest.mark.parametrize("pc", ["jacobi", "dirichlet", "none"])
def test_cg_matches_dense(pc):
    d = LatticeDomain(2, 10)
    rng = np.random.default_rng(1)
    f = rng.standard_normal(d.interior_shape)
    u, rep = solve_bilaplacian(d, f, tol=1e-12, preconditioner=pc)
    ref = dense_solve(d, f)
    err = np.abs(u.interior_values() - ref.interior_values()).max() / np.abs(ref.interior_values()).max()
    assert err < 1e-8
    assert rep.residual <= 1e-12 and rep.method == "cg"


def test_dirichlet_preconditioner_is_faster():
    d = LatticeDomain(2, 32)
    f = delta_function(d, (16, 16))
    _, jac = solve_bilaplacian(d, f, preconditioner="jacobi")
    _, dst = solve_bilaplacian(d, f, preconditioner="dirichlet")
    assert dst.iterations < jac.iterations / 5


def test_zero_rhs_gives_zero():
    d = LatticeDomain(3, 4)
    u, rep = solve_bilaplacian(d, np.zeros(d.interior_shape))
    assert u.max_abs() == 0 and rep.iterations == 0


def test_nonconvergence_carries_best_iterate():
    d = LatticeDomain(2, 16)
    f = delta_function(d, (8, 8))
    with pytest.raises(NonConvergenceError) as info:
        solve_bilaplacian(d, f, tol=1e-14, maxiter=3)
    assert info.value.report.iterations == 3
    assert info.value.best.max_abs() > 0


def test_bad_arguments():
    d = LatticeDomain(2, 4)
    with pytest.raises(ValueError):
        solve_bilaplacian(d, np.ones(d.interior_shape), tol=0)
    with pytest.raises(ValueError):
        solve_bilaplacian(d, np.ones(d.interior_shape), method="lu")
    with pytest.raises(ValueError):
        solve_bilaplacian(d, np.ones(d.interior_shape), preconditioner="ilu")


def test_dense_cap():
    big = LatticeDomain(3, 19)
    assert big.num_interior > DENSE_CAP
    with pytest.raises(SizeError):
        dense_matrix(big)
    with pytest.raises(SizeError):
        solve_bilaplacian(big, np.ones(big.interior_shape), method="dense")


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 3), st.integers(3, 7), st.integers(0, 2 ** 31))
def test_solution_satisfies_equation(n, M, seed):
    d = LatticeDomain(n, M)
    f = np.random.default_rng(seed).standard_normal(d.interior_shape)
    u, _ = solve_bilaplacian(d, f, tol=1e-12)
    back = bilaplacian(u).interior_values()
    assert np.abs(back - f).max() <= 1e-9 * np.abs(f).max()


def test_energy_estimate():
    # testing the equation with u itself: ||hess u||^2 = (f, u)
    d = LatticeDomain(2, 12)
    f = np.random.default_rng(4).standard_normal(d.interior_shape)
    u, _ = solve_bilaplacian(d, f, tol=1e-12)
    rhs = float(np.sum(f * u.interior_values())) * d.h ** 2
    assert energy_norm(u) == pytest.approx(rhs, rel=1e-9)
