import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bilaplace.lattice import GridFunction, LatticeDomain
from bilaplace.operators import (backward_diff, bilaplacian, bilaplacian_interior, bilaplacian_stencil,
                                 box_diff, delta_function, div_div, forward_diff, gradient, hessian,
                                 inner, laplacian, multi_diff, shift)


def _random(d, seed):
    rng = np.random.default_rng(seed)
    return GridFunction.interior(d, rng.standard_normal(d.interior_shape))


def test_forward_and_backward_difference_of_quadratic():
    d = LatticeDomain(1, 10)
    u = GridFunction.from_callable(d, lambda x: x[..., 0] ** 2)
    h = d.h
    fd = forward_diff(u, 0)
    bd = backward_diff(u, 0)
    for k in range(1, 9):
        x = k * h
        assert fd((k,)) == pytest.approx(2 * x + h)
        assert bd((k,)) == pytest.approx(2 * x - h)


def test_shift_moves_values():
    d = LatticeDomain(2, 6)
    u = _random(d, 0)
    s = shift(u, 1, 1)
    assert s((2, 2)) == u((2, 3))


def test_stencil_sums_and_centre():
    assert bilaplacian_stencil(2)[2, 2] == 20
    assert bilaplacian_stencil(3)[2, 2, 2] == 42
    assert bilaplacian_stencil(2).sum() == 0


@pytest.mark.parametrize("n", [1, 2, 3])
def test_bilaplacian_is_div_div_of_hessian(n):
    d = LatticeDomain(n, 6)
    u = _random(d, n)
    a = bilaplacian(u).on_lattice()
    b = div_div(hessian(u)).on_lattice()
    c = bilaplacian(u, fused=False).on_lattice()
    np.testing.assert_allclose(a, b, atol=1e-8 * np.abs(a).max())
    np.testing.assert_allclose(a, c, atol=1e-8 * np.abs(a).max())


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(3, 7), st.integers(0, 2 ** 31))
def test_summation_by_parts(n, M, seed):
    d = LatticeDomain(n, M)
    u, v = _random(d, seed), _random(d, seed + 1)
    lhs = inner(bilaplacian(u), v)
    rhs = inner(hessian(u), hessian(v))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)
    # the Laplacian form gives the same energy
    assert inner(laplacian(u), laplacian(v)) == pytest.approx(rhs, rel=1e-9, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(3, 7), st.integers(0, 2 ** 31))
def test_interior_matvec_matches_grid_operator(n, M, seed):
    d = LatticeDomain(n, M)
    u = _random(d, seed)
    full = bilaplacian(u).interior_values()
    np.testing.assert_allclose(bilaplacian_interior(u.interior_values(), d.h), full,
                               rtol=1e-12, atol=1e-9 * np.abs(full).max())


def test_box_diff_matches_grid_operators():
    d = LatticeDomain(2, 7)
    u = _random(d, 3)
    arr = u.on_lattice()
    for i in range(2):
        np.testing.assert_allclose(box_diff(arr, i, 1, d.h),
                                   forward_diff(u, i).on_box((0, 0), d.lattice_shape))
        np.testing.assert_allclose(box_diff(arr, i, -1, d.h),
                                   backward_diff(u, i).on_box((0, 0), d.lattice_shape))


def test_hessian_layout_and_symmetry_of_mixed_terms():
    d = LatticeDomain(2, 6)
    u = GridFunction.from_callable(d, lambda x: x[..., 0] * x[..., 1])
    H = hessian(u)
    assert H.component_shape == (2, 2)
    # D_{-0} D_1 (xy) = 1 for this bilinear function at points away from box edges
    assert H((3, 3))[0, 1] == pytest.approx(1.0)
    assert H((3, 3))[0, 0] == pytest.approx(0.0, abs=1e-9)
    g = gradient(u)
    assert g((2, 2))[0] == pytest.approx(2 / 6)


def test_multi_diff_order():
    d = LatticeDomain(1, 8)
    u = GridFunction.from_callable(d, lambda x: x[..., 0] ** 3)
    third = multi_diff(u, (3,))
    assert third((3,)) == pytest.approx(6.0)
    with pytest.raises(ValueError):
        multi_diff(u, (-1,))


def test_delta_function():
    d = LatticeDomain(2, 4)
    f = delta_function(d, (2, 2))
    assert f((2, 2)) == 16.0 and f.values.sum() == 16.0
    with pytest.raises(ValueError):
        delta_function(d, (0, 2))
