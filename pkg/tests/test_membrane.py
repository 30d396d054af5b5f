import numpy as np
import pytest

from bilaplace.membrane import (BATCH, MembraneModel, continuity_ratios, entropic_repulsion_mc, hamiltonian,
                                hamiltonian_N, holder_statistic, increment_variance, log_density_ratio,
                                positive_fraction, repulsion_exponent_fit, sample_field, sample_values)


def test_single_point_model():
    m = MembraneModel(2, 0)
    assert m.size == 1
    assert m.covariance[0, 0] == pytest.approx(1 / 20)


def test_points_are_centred():
    m = MembraneModel(2, 2)
    pts = m.points()
    assert pts.min() == -2 and pts.max() == 2 and len(pts) == 25


def test_samples_are_reproducible_and_batch_aligned():
    m = MembraneModel(2, 2)
    a = sample_values(m, 7, 100)
    b = sample_values(m, 7, 100)
    np.testing.assert_array_equal(a, b)
    whole = sample_values(m, 7, BATCH + 50)
    tail = sample_values(m, 7, 80, start=BATCH - 30)
    np.testing.assert_array_equal(whole[BATCH - 30:BATCH + 50], tail)
    np.testing.assert_array_equal(sample_values(m, 7, BATCH + 50, jobs=2), whole)
    assert not np.array_equal(sample_values(m, 8, 100), a)


def test_empirical_variance():
    m = MembraneModel(2, 2)
    vals = sample_values(m, 0, 40000)
    dev = np.abs(vals.var(axis=0) / np.diag(m.covariance) - 1).max()
    assert dev < 0.05


def test_hamiltonian_is_quadratic_form_of_inverse_covariance():
    m = MembraneModel(2, 3)
    psi = np.random.default_rng(0).standard_normal(m.size)
    direct = hamiltonian_N(m, psi)
    via_inverse = 0.5 * psi @ np.linalg.solve(m.covariance, psi)
    assert direct == pytest.approx(via_inverse, rel=1e-9)
    # dropping boundary terms breaks the identity
    assert hamiltonian_N(m, psi, interior_only=True) < direct


def test_density_ratio_matches_energy_difference():
    m = MembraneModel(2, 2)
    rng = np.random.default_rng(3)
    p1, p2 = rng.standard_normal(m.size), rng.standard_normal(m.size)
    assert log_density_ratio(m, p1, p2) == pytest.approx(hamiltonian_N(m, p2) - hamiltonian_N(m, p1),
                                                         rel=1e-8, abs=1e-8)


def test_sample_field_objects():
    m = MembraneModel(3, 1)
    fs = sample_field(m, 2, 3)
    assert [f.index for f in fs] == [0, 1, 2]
    assert fs[0].energy == pytest.approx(hamiltonian_N(m, fs[0].psi.interior_values()))
    assert hamiltonian(fs[0].psi) > 0


def test_increment_variance_symmetry_and_boundary():
    m = MembraneModel(2, 3)
    assert increment_variance(m, (0, 0), (1, 2)) == pytest.approx(increment_variance(m, (1, 2), (0, 0)))
    # points of the outer layer carry a zero field
    assert increment_variance(m, (4, 0), (-4, 1)) == 0.0
    centre = int(np.flatnonzero((m.points() == 0).all(axis=1))[0])
    assert increment_variance(m, (0, 0), (4, 0)) == pytest.approx(m.covariance[centre, centre])


def test_continuity_ratio_positive():
    sup, pair = continuity_ratios(MembraneModel(2, 4))
    assert 0 < sup < 10 and pair[0] != pair[1]


def test_holder_statistic_shape():
    m = MembraneModel(2, 2)
    stat = holder_statistic(m, sample_values(m, 0, 5), 0.5)
    assert stat.shape == (5,) and np.all(stat > 0)


def test_positive_fraction_single_point():
    m = MembraneModel(2, 0)
    hits = positive_fraction(m, 1, 20000)
    assert abs(hits / 20000 - 0.5) < 3 * np.sqrt(0.25 / 20000)


def test_repulsion_rows_and_zero_hits():
    rows = entropic_repulsion_mc(2, [1, 8], 2000, seed=0)
    assert rows[0].hits > 0
    zero = rows[1]
    assert zero.hits == 0 and zero.lower_bound_only and zero.ci_low == 0
    assert zero.neg_log_p == pytest.approx(-np.log(zero.ci_high))
    assert repulsion_exponent_fit(rows) is not None
