"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Tolerances are the stated ones.  A failing criterion fails its test.
"""
import time

import numpy as np
import pytest

from bilaplace import verify as v
from bilaplace.green import green_matrix, green_value
from bilaplace.lattice import GridFunction, LatticeDomain
from bilaplace.membrane import MembraneModel, entropic_repulsion_mc, positive_fraction, sample_values
from bilaplace.operators import delta_function
from bilaplace.solver import dense_solve, energy_norm, solve_bilaplacian
from bilaplace.splines import (SplineOperator, bspline_eval, commutation_check, hessian_bridge, interp_eval,
                               spline_derivative_identity_check)


def test_criterion_01_cg_matches_dense(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    rng = np.random.default_rng(0)
    for n, Ms in ((2, (4, 8, 16)), (3, (4, 6))):
        for M in Ms:
            d = LatticeDomain(n, M)
            mid = (M // 2,) * n
            for f in (delta_function(d, mid), rng.standard_normal(d.interior_shape)):
                u, _ = solve_bilaplacian(d, f, tol=1e-12)
                ref = dense_solve(d, f).interior_values()
                worst = max(worst, np.abs(u.interior_values() - ref).max() / np.abs(ref).max())
    dt = time.perf_counter() - t0
    verdict(1, worst <= 1e-7 and dt <= 60, f"max rel sup diff {worst:.2e}, {dt:.1f} s")


def test_criterion_02_exact_small_cases(verdict):
    d2, d3 = LatticeDomain(2, 2), LatticeDomain(3, 2)
    e2 = abs(green_value(d2, (1, 1), (1, 1)) - d2.h ** 2 / 20)
    e3 = abs(green_value(d3, (1, 1, 1), (1, 1, 1)) - d3.h / 42)
    verdict(2, max(e2, e3) <= 1e-12, f"errors {e2:.1e} (n=2), {e3:.1e} (n=3)")


def test_criterion_03_energy_identity(verdict):
    d = LatticeDomain(2, 16)
    G = green_matrix(d)
    worst = 0.0
    for y in map(tuple, d.interior_indices()):
        col = G.column(y)
        worst = max(worst, abs(col(y) - energy_norm(col)) / col(y))
    verdict(3, worst <= 1e-8, f"max relative gap {worst:.2e} over {d.num_interior} sources")


def test_criterion_04_symmetry(verdict):
    d = LatticeDomain(2, 16)
    A = green_matrix(d).matrix
    gap = np.abs(A - A.T).max() / np.abs(A).max()
    verdict(4, gap <= 1e-10, f"max |G(x,y)-G(y,x)|/max|G| = {gap:.1e}")


def test_criterion_05_green_bound_stability(verdict):
    t0 = time.perf_counter()
    lines, ok = [], True
    for n, Ms in ((2, [8, 16, 32]), (3, [6, 10, 14])):
        reps = v.verify_green_bounds(n, Ms, keep_records=False)
        for name, rep in reps.items():
            cs = rep.constant_per_grid
            good = rep.verdict == "stable" if name != "lower" else min(cs) > 0
            ok &= good
            lines.append(f"n={n} {name}: " + "/".join(f"{c:.3g}" for c in cs) + ("" if good else " (growing)"))
    dt = time.perf_counter() - t0
    ok &= dt <= 600
    verdict(5, ok, f"{dt:.0f} s; " + "; ".join(lines))


@pytest.mark.parametrize("n", [2, 3])
def test_criterion_06_interior_estimates(n, verdict):
    Ms = [16, 32, 64] if n == 2 else [16, 24, 32]
    reps = {"caccioppoli": v.verify_caccioppoli(n, Ms),
            "inner-decay": v.verify_inner_decay(n, Ms)}
    reps.update({f"outer-{k}": r for k, r in v.verify_outer_decay(n, Ms).items()})
    regimes = {p[0] for p in v.placements(n)}
    ok, parts = True, []
    for name, rep in reps.items():
        counts = [sum(1 for r in rep.records if r["M"] == M) for M in Ms]
        seen = {r["regime"] for r in rep.records}
        finite = all(np.isfinite(rep.constant_per_grid))
        good = finite and rep.verdict == "stable" and min(counts) >= 50 and seen == regimes
        ok &= good
        parts.append(f"{name} " + "/".join(f"{c:.3g}" for c in rep.constant_per_grid)
                     + f" (valid trials >= {min(counts)}, regimes {len(seen)}/{len(regimes)})")
    verdict(6, ok, f"n={n}: " + "; ".join(parts))


def test_criterion_07_spline_identities(verdict):
    rng = np.random.default_rng(7)
    worst = 0.0
    x = np.linspace(-3, 7, 501)
    for m in range(1, 6):
        total = sum(bspline_eval(m, x - k) for k in range(-10, 12))
        worst = max(worst, np.abs(total - 1).max())
    for m in range(2, 7):
        for t in rng.uniform(-1, 7, 40):
            a, b = spline_derivative_identity_check(m, t)
            worst = max(worst, abs(a - b))
    const_exact = True
    for n in (2, 3):
        d = LatticeDomain(n, 6)
        for _ in range(4):
            u = GridFunction.interior(d, rng.standard_normal(d.interior_shape))
            op = SplineOperator((3,) * n, d.h)
            pts = rng.random((12, n))
            for alpha in [(1,) + (0,) * (n - 1), (2,) + (0,) * (n - 1), (1, 1) + (0,) * (n - 2)]:
                a, b = commutation_check(op, alpha, u, pts)
                worst = max(worst, np.abs(a - b).max() / max(1.0, np.abs(a).max()))
            a, b = hessian_bridge(u, pts)
            worst = max(worst, np.abs(a - b).max() / max(1.0, np.abs(a).max()))
        c = GridFunction(d, np.full((d.M + 21,) * n, 1.0), (-10,) * n)
        vals = interp_eval(SplineOperator((4,) * n, d.h), c, rng.random((50, n)))
        const_exact &= bool(np.all(vals == 1.0))
    verdict(7, worst <= 1e-11 and const_exact,
            f"max identity error {worst:.1e}; constants reproduced exactly: {const_exact}")


def test_criterion_08_fullspace(verdict):
    t0 = time.perf_counter()
    rel = {n: max(r["rel_diff"] for r in v.expansion_vs_oracle(n)) for n in (2, 3)}
    delta = max(v.delta_check(2), v.delta_check(3))
    shift = v.r_shift_check()
    dt = time.perf_counter() - t0
    ok = max(rel.values()) <= 1e-2 and delta <= 1e-8 and shift <= 1e-12 and dt <= 300
    verdict(8, ok, f"expansion rel diff {rel[2]:.1e} (n=2), {rel[3]:.1e} (n=3); "
                   f"delta {delta:.1e}; r-shift {shift:.1e}; {dt:.0f} s")


def test_criterion_09_membrane(verdict):
    m = MembraneModel(2, 4)
    vals = sample_values(m, 11, 10 ** 5)
    var_dev = float(np.abs(vals.var(axis=0) / np.diag(m.covariance) - 1).max())
    del vals
    count = 10 ** 5
    p0 = positive_fraction(MembraneModel(2, 0), 12, count) / count
    p_ok = abs(p0 - 0.5) <= 3 * np.sqrt(0.25 / count)
    rows = entropic_repulsion_mc(2, [2, 3, 4], 10 ** 6, seed=13)
    neg = [r.neg_log_p for r in rows]
    mono = all(b > a for a, b in zip(neg, neg[1:]))
    cont = v.continuity_report(2, [8, 16, 32])
    ok = var_dev <= 0.05 and p_ok and mono and cont.verdict == "stable"
    verdict(9, ok, f"var dev {var_dev:.3f}; P(psi_0>0) {p0:.4f}; -log P "
                   + "/".join(f"{x:.2f}" for x in neg)
                   + "; continuity " + "/".join(f"{c:.4f}" for c in cont.constant_per_grid))


def test_criterion_10_convergence(verdict):
    Ms, e, ratios = v.verify_convergence(2, (0.5, 0.5), 8, doublings=3)
    verdict(10, max(ratios) <= 0.7, "e " + ", ".join(f"{x:.3e}" for x in e)
            + "; ratios " + ", ".join(f"{r:.3f}" for r in ratios))


def test_criterion_11_corner_exponent(verdict):
    fit = v.fit_corner_exponent(64)
    trend = v.fit_corner_exponent(128)
    verdict(11, fit.theta > 0 and fit.r_squared >= 0.95,
            f"M=64 theta {fit.theta:.3f} R2 {fit.r_squared:.3f}; "
            f"M=128 theta {trend.theta:.3f} R2 {trend.r_squared:.3f}; reference 3.47918")
