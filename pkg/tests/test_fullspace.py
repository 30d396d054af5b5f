import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bilaplace import fullspace as fs
from bilaplace.lattice import DomainError


def test_expansion_is_vectorised_and_symmetric():
    z = np.array([[20.0, 3.0], [3.0, 20.0], [-20.0, -3.0]])
    v = fs.mangad_expansion(2, z)
    assert v.shape == (3,)
    assert v[0] == pytest.approx(v[1]) == pytest.approx(v[2])
    w = fs.mangad_expansion(3, np.array([[7.0, 1.0, 2.0], [2.0, 7.0, 1.0]]))
    assert w[0] == pytest.approx(w[1])


def test_leading_terms():
    z = np.array([40.0, 0.0])
    r = 40.0
    gamma = 0.5772156649015329
    lead = r ** 2 * (math.log(r) + gamma - 1 + math.log(math.pi)) / (8 * math.pi)
    assert fs.mangad_expansion(2, z) == pytest.approx(lead, rel=1e-3)
    z3 = np.array([0.0, 0.0, 50.0])
    assert fs.mangad_expansion(3, z3) == pytest.approx(-50 / (8 * math.pi), rel=1e-3)


def test_printed_and_corrected_forms_differ_only_in_last_group():
    z = np.array([25.0, 9.0])
    a = fs.mangad_expansion(2, z, form="printed")
    b = fs.mangad_expansion(2, z, form="corrected")
    assert a != b
    with pytest.raises(ValueError):
        fs.mangad_expansion(2, z, form="other")


def test_pattern_stencils():
    p = fs.axial_fourth(2)
    st_ = p.stencil()
    assert st_ == {(2, 0): 1.0, (1, 0): -4.0, (0, 0): 6.0, (-1, 0): -4.0, (-2, 0): 1.0}
    lap2 = fs.bilaplacian_pattern(2).stencil()
    assert lap2[(0, 0)] == 20 and sum(lap2.values()) == 0
    assert p.order == 4 and fs.single(2, (0, 1)).order == 1


def test_y_to_z():
    sign, ops = fs.y_to_z(((0, 1), (1, -1)))
    assert sign == 1.0 and ops == ((0, -1), (1, 1))
    sign, ops = fs.y_to_z(((0, 1),))
    assert sign == -1.0 and ops == ((0, -1),)


@pytest.mark.parametrize("n", [2, 3])
def test_oracle_reproduces_delta(n):
    pat = fs.bilaplacian_pattern(n)
    assert fs.fourth_difference_oracle(n, (0,) * n, pat) == pytest.approx(1.0, abs=1e-8)
    off = (1,) + (0,) * (n - 1)
    assert abs(fs.fourth_difference_oracle(n, off, pat)) < 1e-8


def test_oracle_rejects_low_order_and_far_points():
    with pytest.raises(ValueError):
        fs.fourth_difference_oracle(2, (3, 0), fs.single(2, (0, 1), (0, -1)))
    with pytest.raises(ValueError):
        fs.fourth_difference_oracle(2, (500, 0), fs.axial_fourth(2))


def test_expansion_matches_oracle_n2():
    for z in [(20, 0), (25, 7), (42, 42)]:
        pat = fs.axial_fourth(2)
        o = fs.fourth_difference_oracle(2, z, pat)
        e = pat.apply(lambda q: float(fs.mangad_expansion(2, q)), z)
        assert abs(e - o) <= 1e-3 * abs(o)


def test_printed_coefficient_fails_the_oracle():
    z = (20, 5)
    pat = fs.single(2, (0, 1), (0, -1), (1, 1), (1, -1))
    o = fs.fourth_difference_oracle(2, z, pat)
    printed = pat.apply(lambda q: float(fs.mangad_expansion(2, q, form="printed")), z)
    corrected = pat.apply(lambda q: float(fs.mangad_expansion(2, q)), z)
    assert abs(corrected - o) < abs(printed - o)


def test_tilde_green_refuses_near_origin():
    with pytest.raises(DomainError):
        fs.tilde_green(2, 1 / 16, 0.5, (0, 0), (1, 1))
    with pytest.raises(ValueError):
        fs.tilde_green(2, 1 / 16, 0.1, (10, 0), (0, 0))
    assert math.isfinite(fs.tilde_green(3, 1 / 16, None, (10, 0, 0), (0, 0, 0)))


def test_near_origin_differences_use_oracle():
    h = 1 / 16
    near = fs.tilde_green_difference(2, h, 0.5, (1, 0), x_ops=((0, -1), (0, 1)), y_ops=((1, 1),))
    assert math.isfinite(near)
    with pytest.raises(DomainError):
        fs.tilde_green_difference(2, h, 0.5, (1, 0), x_ops=((0, 1),))


@settings(max_examples=15, deadline=None)
@given(st.integers(-60, 60), st.integers(-60, 60), st.floats(0.3, 3.0))
def test_r_shift_invisible_to_third_differences(a, b, r2):
    h = 1 / 16
    if math.hypot(a, b) < 8:
        return
    ops = [(((0, 1), (1, -1)), ((0, 1),))]
    v1 = fs.tilde_green_differences(2, h, 0.5, (a, b), ops)[0]
    v2 = fs.tilde_green_differences(2, h, r2, (a, b), ops)[0]
    assert abs(v1 - v2) <= 1e-9 * max(1.0, abs(v1))


def test_tilde_bounds_structure():
    b = fs.tilde_green_bounds(2, 1 / 8)
    assert set(b) == {"hess_x_grad_y", "hess_x_hess_y"}
    assert all(v[0] > 0 for v in b.values())
