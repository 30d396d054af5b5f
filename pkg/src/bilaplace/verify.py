"""Empirical constants for the quantitative estimates on ``G_h`` and discrete biharmonic functions.

Each routine measures ``sup quantity / bound`` (or ``inf`` for lower bounds)
on one or more grids and returns an :class:`EstimateReport`.  A constant is
called stable when its per-grid values stay within ``stability_factor`` of
each other, which is how "independent of h" is operationalised here.

Geometry for randomised trials is drawn in continuum coordinates (fractions
of the unit cube) and then snapped to each grid, so the same trial family is
compared across meshes.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import product

import numpy as np

from .green import green_column, green_matrix
from .lattice import (CubeRegion, DomainError, GridFunction, LatticeDomain, discrete_norm,
                      holder_seminorm)
from .operators import box_diff, gradient, hessian
from .solver import DENSE_CAP, solve_bilaplacian

logger = logging.getLogger(__name__)

STABILITY_FACTOR = 2.0


@dataclass
class EstimateReport:
    estimate_id: str
    n: int
    grids: list
    constant_per_grid: list
    kind: str = "upper"
    witness: object = None
    stability_factor: float = STABILITY_FACTOR
    records: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def global_constant(self) -> float:
        vals = [c for c in self.constant_per_grid if np.isfinite(c)]
        if not vals:
            return float("nan")
        return max(vals) if self.kind == "upper" else min(vals)

    @property
    def spread(self) -> float:
        vals = [c for c in self.constant_per_grid if np.isfinite(c)]
        if not vals or min(vals) <= 0:
            return float("inf")
        return max(vals) / min(vals)

    @property
    def verdict(self) -> str:
        return "stable" if self.spread <= self.stability_factor else "growing"

    def summary(self) -> dict:
        return _jsonable({
            "estimate_id": self.estimate_id,
            "n": self.n,
            "kind": self.kind,
            "grids": list(self.grids),
            "constant_per_grid": [float(c) for c in self.constant_per_grid],
            "global_constant": float(self.global_constant),
            "witness": _jsonable(self.witness),
            "verdict": self.verdict,
            "spread": float(self.spread),
            "stability_factor": self.stability_factor,
            "extra": self.extra,
        })

    def to_json(self, **kw) -> str:
        return json.dumps(self.summary(), **kw)

    def to_csv(self) -> str:
        """Flat table of the recorded ratios, one row per record."""
        buf = io.StringIO()
        if not self.records:
            return ""
        keys = list(self.records[0].keys())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["estimate_id"] + keys)
        for rec in self.records:
            w.writerow([self.estimate_id] + [_fmt(rec[k]) for k in keys])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return "%.17g" % v
    if isinstance(v, (tuple, list)):
        return " ".join(str(int(a)) for a in v)
    return v


def _jsonable(obj):
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if hasattr(obj, "__dataclass_fields__"):
        return _jsonable(asdict(obj))
    return obj


def _map(func, items, jobs: int):
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(func, items))
    return [func(it) for it in items]


# ==========================================================================
# Green's function bounds
# ==========================================================================

GREEN_BOUND_IDS = ("G", "grad_x", "hess_x", "grad_x_grad_y", "hess_x_grad_y", "hess_x_hess_y")


def green_bound(name: str, n: int, h: float, dx, dy, dist):
    """The right-hand sides of the pointwise Green's function bounds, without ``C``."""
    a = dist + h
    if name == "G":
        return np.minimum((dx * dy) ** (2 - n / 2), dx ** 2 * dy ** 2 / a ** n)
    if name == "grad_x":
        return np.minimum(dy ** (3 - n) if n == 2 else np.ones_like(dy + dx),
                          (dx + h) * dy ** 2 / a ** n)
    if name == "hess_x":
        if n == 2:
            return np.log1p(dy ** 2 / a ** 2)
        return np.minimum(1 / a, dy ** 2 / a ** 3)
    if name == "grad_x_grad_y":
        if n == 2:
            return np.log1p((dx + h) * (dy + h) / a ** 2)
        return np.minimum(1 / a, (dx + h) * (dy + h) / a ** 3)
    if name == "hess_x_grad_y":
        return np.minimum(1 / a ** (n - 1), (dy + h) / a ** n)
    if name == "hess_x_hess_y":
        return 1 / a ** n
    raise KeyError(name)


def _x_hess_terms(arr, n, h):
    """``D_{-i} D_j`` over the first ``n`` axes for every ``(i, j)``."""
    for j in range(n):
        dj = box_diff(arr, j, 1, h)
        for i in range(n):
            yield box_diff(dj, i, -1, h)


def _green_slab(G2, domain, y0):
    """Squared Frobenius norms of all derivative bundles for sources with first index ``y0``."""
    n, M, h = domain.n, domain.M, domain.h
    planes = np.zeros(G2.shape[:n] + (3,) + G2.shape[n + 1:])
    for k, p in enumerate((y0 - 1, y0, y0 + 1)):
        if 0 <= p <= M:
            planes[(slice(None),) * n + (k,)] = G2[(slice(None),) * n + (p,)]
    yax = [n + k for k in range(n)]
    center = (slice(None),) * n + (1,)
    out = {}
    g0 = planes[center]
    out["G"] = g0 ** 2
    out["grad_x"] = sum(box_diff(g0, i, 1, h) ** 2 for i in range(n))
    out["hess_x"] = sum(t ** 2 for t in _x_hess_terms(g0, n, h))
    gxgy = 0.0
    hxgy = 0.0
    for k in range(n):
        gy = box_diff(planes, yax[k], 1, h)[center]
        gxgy = gxgy + sum(box_diff(gy, i, 1, h) ** 2 for i in range(n))
        hxgy = hxgy + sum(t ** 2 for t in _x_hess_terms(gy, n, h))
    out["grad_x_grad_y"] = gxgy
    out["hess_x_grad_y"] = hxgy
    hxhy = 0.0
    for l in range(n):
        dl = box_diff(planes, yax[l], 1, h)
        for k in range(n):
            hy = box_diff(dl, yax[k], -1, h)[center]
            hxhy = hxhy + sum(t ** 2 for t in _x_hess_terms(hy, n, h))
    out["hess_x_hess_y"] = hxhy
    return {k: np.sqrt(v) for k, v in out.items()}


def green_bound_constants(domain: LatticeDomain, jobs: int = 1):
    """Per-bound ``(sup ratio, witness, per-source maxima)`` on one grid, plus the lower-bound floor.

    Every pair ``x, y`` in ``Lambda`` is visited.  Pairs where the bound
    vanishes are checked to have an exactly zero quantity.
    """
    n, M, h = domain.n, domain.M, domain.h
    G2 = green_matrix(domain).on_lattice()
    d = domain.distance_array()
    xs = domain.lattice_indices().reshape(domain.lattice_shape + (n,)) * h

    def work(y0):
        q = _green_slab(G2, domain, y0)
        res = {}
        rest = domain.lattice_shape[1:]
        for yr in np.ndindex(*rest):
            y = (y0,) + yr
            dy = d[y]
            sl = (slice(None),) * n + yr
            dist = np.sqrt(np.sum((xs - np.array(y) * h) ** 2, axis=-1))
            for name in GREEN_BOUND_IDS:
                b = green_bound(name, n, h, d, dy, dist)
                val = q[name][sl]
                zero = b == 0
                if np.any(val[zero] != 0):
                    raise AssertionError(f"{name}: nonzero quantity where the bound vanishes at y={y}")
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.where(zero, 0.0, val / np.where(zero, 1.0, b))
                k = np.unravel_index(np.argmax(ratio), ratio.shape)
                res.setdefault(name, []).append((float(ratio[k]), tuple(int(v) for v in k), y))
        return res

    parts = _map(work, range(M + 1), jobs)
    out = {}
    for name in GREEN_BOUND_IDS:
        rows = [r for p in parts for r in p[name]]
        best = max(rows, key=lambda r: r[0])
        out[name] = (best[0], (best[1], best[2]), rows)
    diag = green_matrix(domain).diagonal()
    dint = d[(slice(1, M),) * n]
    low = diag / dint ** (4 - n)
    k = np.unravel_index(np.argmin(low), low.shape)
    out["lower"] = (float(low[k]), tuple(int(v) + 1 for v in k), None)
    return out


def verify_green_bounds(n: int, Ms, jobs: int = 1, keep_records: bool = True) -> dict:
    """Reports for the six upper bounds and the diagonal lower bound over a list of grids."""
    per = {M: green_bound_constants(LatticeDomain(n, M), jobs) for M in Ms}
    reports = {}
    for name in GREEN_BOUND_IDS + ("lower",):
        consts = [per[M][name][0] for M in Ms]
        kind = "lower" if name == "lower" else "upper"
        pick = (np.argmax if kind == "upper" else np.argmin)(consts)
        rep = EstimateReport(f"green-bounds/{name}", n, list(Ms), consts, kind=kind,
                             witness={"M": Ms[pick], "point": per[Ms[pick]][name][1]})
        if keep_records and name != "lower":
            for M in Ms:
                for ratio, x, y in per[M][name][2]:
                    rep.records.append({"M": M, "y": y, "x_at_max": x, "max_ratio": ratio})
        reports[name] = rep
    return reports


# ==========================================================================
# trial machinery for discrete biharmonic test functions
# ==========================================================================

def placements(n: int) -> list[tuple[str, tuple]]:
    """Named centre positions (fractions of the cube) covering every boundary regime."""
    if n == 2:
        return [("interior", (0.5, 0.5)), ("face", (0.5, 0.0)), ("near-face", (0.5, 0.125)),
                ("corner", (0.0, 0.0)), ("near-corner", (0.125, 0.125))]
    return [("interior", (0.5, 0.5, 0.5)), ("face", (0.5, 0.5, 0.0)), ("edge", (0.5, 0.0, 0.0)),
            ("corner", (0.0, 0.0, 0.0)), ("near-edge", (0.5, 0.125, 0.125))]


def outer_placements(n: int) -> list[tuple[str, tuple]]:
    """Placements for the outer estimates: the interior centre sits off the midpoint.

    At the midpoint ``Q_{d(x)}(x)`` covers the whole box, so the ``r >= d(x)``
    variant would have nothing outside the cube.
    """
    off = (0.375, 0.4375, 0.5)[:n]
    return [("interior", off)] + placements(n)[1:]


def nearest_radius(r: float, h: float) -> float:
    """The element of ``h N + h/2`` closest to ``r`` (at least ``h/2``).

    Trial radii use this rather than rounding down so the snapped geometry
    tracks the continuum one on every grid.
    """
    return h * (max(round(r / h - 0.5), 0) + 0.5)


def _snap_point(domain: LatticeDomain, frac) -> tuple[int, ...]:
    return tuple(int(np.clip(np.floor(f * domain.M + 0.5), 0, domain.M)) for f in frac)


def _draw_sources(rng, n, center, r, inside: bool, count: int):
    """Continuum source positions, ``count`` of them, inside or outside a cube of half-width ``r``."""
    pts = []
    c = np.asarray(center, dtype=float)
    tries = 0
    while len(pts) < count and tries < 10000:
        tries += 1
        if inside:
            p = c + (rng.random(n) * 2 - 1) * r
            if np.all((p > 0) & (p < 1)):
                pts.append(p)
        else:
            p = rng.random(n)
            if np.max(np.abs(p - c)) >= r:
                pts.append(p)
    return pts


def _trial_rhs(domain, sources, weights, dipoles, keep):
    """Point masses and axis dipoles at snapped interior points that satisfy ``keep``."""
    f = np.zeros(domain.interior_shape)
    for p, w, dip in zip(sources, weights, dipoles):
        k = np.clip(np.floor(np.asarray(p) * domain.M + 0.5).astype(int), 1, domain.M - 1)
        pts = [(tuple(k), w)]
        if dip is not None:
            k2 = k.copy()
            k2[dip] += 1 if k2[dip] < domain.M - 1 else -1
            pts.append((tuple(k2), -w))
        for q, wq in pts:
            if keep(q):
                f[tuple(a - 1 for a in q)] += wq * domain.h ** -domain.n
    return f


@dataclass
class Trial:
    label: str
    center_frac: tuple
    r_frac: float
    sources: list
    weights: list
    dipoles: list


def make_trials(n: int, trials: int, r_fracs, seed: int, inside: bool, margin: float = 0.03, places=None):
    """Seeded continuum trial family shared by every grid."""
    rng = np.random.default_rng(seed)
    out = []
    pl = placements(n) if places is None else places
    for t in range(trials):
        label, c = pl[t % len(pl)]
        r = r_fracs[(t // len(pl)) % len(r_fracs)]
        count = int(rng.integers(1, 4))
        if inside:
            src = _draw_sources(rng, n, c, max(r - margin, 0.0), True, count)
        else:
            src = _draw_sources(rng, n, c, r + margin, False, count)
        w = list(rng.standard_normal(len(src)))
        dip = [int(rng.integers(0, n)) if rng.random() < 0.5 else None for _ in src]
        out.append(Trial(label, tuple(c), float(r), src, w, dip))
    return out


def _solve_trial(domain, trial, keep, scale):
    f = _trial_rhs(domain, trial.sources, trial.weights, trial.dipoles, keep)
    if not np.any(f):
        return None
    u, _ = solve_bilaplacian(domain, f * scale, tol=1e-11, preconditioner="dirichlet")
    return u


def _run_trials(Ms, n, trials, func, jobs):
    per_grid, records, witnesses = [], [], []
    for M in Ms:
        domain = LatticeDomain(n, M)
        results = _map(lambda tr: func(domain, tr), trials, jobs)
        best, wit = float("nan"), None
        for t, (tr, res) in enumerate(zip(trials, results)):
            if res is None:
                continue
            ratio, info = res
            records.append({"M": M, "trial": t, "regime": tr.label, "ratio": float(ratio), **info})
            if not np.isfinite(best) or ratio > best:
                best, wit = float(ratio), {"M": M, "trial": t, "regime": tr.label, **info}
        per_grid.append(best)
        witnesses.append(wit)
    k = int(np.nanargmax(per_grid)) if any(np.isfinite(per_grid)) else 0
    return per_grid, records, witnesses[k]


def _check_grid_feasible(domain, r, s=None, gap=None):
    if gap is not None and r - s < gap - 1e-12:
        raise ValueError(f"need r - s >= {gap:g} on M={domain.M}, got r={r:g}, s={s:g}")


# ==========================================================================
# Caccioppoli
# ==========================================================================

def caccioppoli_ratio(u: GridFunction, center, r: float, s: float) -> float:
    Qs = CubeRegion(center, s, open=True)
    Qr = CubeRegion(center, r, open=True)
    num = discrete_norm(hessian(u), 2, Qs) ** 2
    den = discrete_norm(u, 2, Qr) ** 2 / (r - s) ** 4 + discrete_norm(gradient(u), 2, Qr) ** 2 / (r - s) ** 2
    return num / den if den > 0 else float("nan")


def verify_caccioppoli(n: int, Ms, trials: int = 120, seed: int = 1, r_frac: float = 0.45,
                       s_frac: float = 0.2, scale: float = 1.0, jobs: int = 1) -> EstimateReport:
    """Reverse Poincare inequality on cubes around the standard placements.

    Test functions are solutions with sources outside ``Q_r(x)``, so they are
    discretely biharmonic on ``Q_{r-h}(x)``.  Radii are snapped to
    ``h N + h/2`` and must satisfy ``s <= r - 4h`` on every grid.
    """
    fam = make_trials(n, trials, [r_frac], seed, inside=False)

    def one(domain, tr):
        h = domain.h
        x = _snap_point(domain, tr.center_frac)
        r = nearest_radius(r_frac, h)
        s = nearest_radius(s_frac, h)
        _check_grid_feasible(domain, r, s, gap=4 * h)
        keep = lambda q: max(abs(a - b) for a, b in zip(q, x)) * h >= r  # noqa: E731
        u = _solve_trial(domain, tr, keep, scale)
        if u is None:
            return None
        ratio = caccioppoli_ratio(u, x, r, s)
        return None if not np.isfinite(ratio) else (ratio, {"x": x, "r": r, "s": s})

    consts, recs, wit = _run_trials(Ms, n, fam, one, jobs)
    return EstimateReport("caccioppoli", n, list(Ms), consts, witness=wit, records=recs,
                          extra={"r": r_frac, "s": s_frac, "trials": trials})


# ==========================================================================
# inner decay
# ==========================================================================

def inner_decay_ratio(u: GridFunction, center, r: float):
    h = u.domain.h
    H = hessian(u)
    den = discrete_norm(H, 2, CubeRegion(center, r, open=True))
    if den == 0:
        return None
    inner = CubeRegion(center, r / 2)
    lo, shape = inner.box(h)
    mask = inner.mask(lo, shape, h)
    idx = np.stack(np.meshgrid(*[np.arange(l, l + s) for l, s in zip(lo, shape)], indexing="ij"), -1)
    inside = np.all((idx >= 0) & (idx <= u.domain.M), axis=-1) & mask
    vals = np.sqrt(np.sum(H.on_box(lo, shape).reshape(shape + (-1,)) ** 2, axis=-1))
    vals = np.where(inside, vals, 0.0)
    k = np.unravel_index(np.argmax(vals), vals.shape)
    z = tuple(int(a + b) for a, b in zip(lo, k))
    return float(vals[k] * r ** (u.domain.n / 2) / den), z


def verify_inner_decay(n: int, Ms, trials: int = 120, seed: int = 2, r_fracs=(0.25, 0.4),
                       scale: float = 1.0, jobs: int = 1) -> EstimateReport:
    """Pointwise Hessian on ``Q_{r/2}`` against its L2 norm on ``Q_r`` for functions biharmonic in ``Q_r``."""
    fam = make_trials(n, trials, list(r_fracs), seed, inside=False)

    def one(domain, tr):
        h = domain.h
        x = _snap_point(domain, tr.center_frac)
        r = nearest_radius(tr.r_frac, h)
        keep = lambda q: max(abs(a - b) for a, b in zip(q, x)) * h >= r  # noqa: E731
        u = _solve_trial(domain, tr, keep, scale)
        if u is None:
            return None
        res = inner_decay_ratio(u, x, r)
        if res is None:
            return None
        return res[0], {"x": x, "r": r, "z": res[1]}

    consts, recs, wit = _run_trials(Ms, n, fam, one, jobs)
    return EstimateReport("inner-decay", n, list(Ms), consts, witness=wit, records=recs,
                          extra={"r": list(r_fracs), "trials": trials})


# ==========================================================================
# outer decay
# ==========================================================================

def outer_average_ratio(u: GridFunction, center, r: float, s_list):
    H = hessian(u)
    base = discrete_norm(H, 2, CubeRegion(center, r, open=True, complement=True))
    if base == 0:
        return None
    n = u.domain.n
    best, at = 0.0, None
    for s in s_list:
        num = discrete_norm(H, 2, CubeRegion(center, s, open=True, complement=True))
        ratio = num / ((r / s) ** (n / 2) * base)
        if ratio > best:
            best, at = ratio, s
    return best, at


def outer_pointwise_ratio(u: GridFunction, center, r: float):
    domain = u.domain
    h, n = domain.h, domain.n
    H = hessian(u)
    base = discrete_norm(H, 2, CubeRegion(center, r, open=True, complement=True))
    if base == 0:
        return None
    dx = domain.distance_array()[tuple(center)] if domain.in_lattice(center) else 0.0
    vals = np.sqrt(np.sum(H.on_lattice().reshape(domain.lattice_shape + (-1,)) ** 2, axis=-1))
    idx = domain.lattice_indices().reshape(domain.lattice_shape + (n,))
    off = idx - np.asarray(center)
    far = np.max(np.abs(off), axis=-1) * h >= 2 * r
    if not np.any(far):
        return None
    dist = np.sqrt(np.sum(off ** 2, axis=-1)) * h
    bound = max(dx, r) ** (n / 2) / np.where(far, dist, 1.0) ** n * base
    ratio = np.where(far, vals / bound, 0.0)
    k = np.unravel_index(np.argmax(ratio), ratio.shape)
    return float(ratio[k]), tuple(int(v) for v in k)


def verify_outer_decay(n: int, Ms, trials: int = 120, seed: int = 3, r_fracs=(0.0625, 0.125),
                       s_factors=(2, 3, 4, 6), scale: float = 1.0, jobs: int = 1) -> dict:
    """Annulus L2 decay (``r >= d(x)`` variant) and the pointwise outer bound.

    Sources sit inside ``Q_r(x)``, so the solution is biharmonic outside it.
    The average variant enlarges ``r`` to ``max(r, d(x))`` as its hypothesis
    requires; the pointwise variant keeps ``r`` and so samples both
    ``r < d(x)`` and ``r >= d(x)``.
    """
    fam = make_trials(n, trials, list(r_fracs), seed, inside=True, places=outer_placements(n))

    def solve(domain, tr):
        h = domain.h
        x = _snap_point(domain, tr.center_frac)
        r = nearest_radius(tr.r_frac, h)
        keep = lambda q: max(abs(a - b) for a, b in zip(q, x)) * h < r  # noqa: E731
        return x, r, _solve_trial(domain, tr, keep, scale)

    def avg(domain, tr):
        x, r, u = solve(domain, tr)
        if u is None:
            return None
        h = domain.h
        dx = domain.distance_array()[x]
        ra = max(r, nearest_radius(dx, h) + h) if dx > r else r
        s_list = [nearest_radius(f * ra, h) for f in s_factors]
        s_list = [s for s in s_list if s >= ra]
        res = outer_average_ratio(u, x, ra, s_list)
        if res is None:
            return None
        return res[0], {"x": x, "r": ra, "s": res[1]}

    def point(domain, tr):
        x, r, u = solve(domain, tr)
        if u is None:
            return None
        res = outer_pointwise_ratio(u, x, r)
        if res is None:
            return None
        dx = domain.distance_array()[x]
        return res[0], {"x": x, "r": r, "y": res[1], "branch": "r>=d" if r >= dx else "r<d"}

    c1, rec1, w1 = _run_trials(Ms, n, fam, avg, jobs)
    c2, rec2, w2 = _run_trials(Ms, n, fam, point, jobs)
    extra = {"r": list(r_fracs), "trials": trials}
    return {
        "average": EstimateReport("outer-decay/average", n, list(Ms), c1, witness=w1, records=rec1,
                                  extra=dict(extra, s_factors=list(s_factors))),
        "pointwise": EstimateReport("outer-decay/pointwise", n, list(Ms), c2, witness=w2,
                                    records=rec2, extra=extra),
    }


# ==========================================================================
# corner exponent
# ==========================================================================

@dataclass
class CornerFit:
    M: int
    slope: float
    theta: float
    r_squared: float
    stderr: float
    points: int
    y: tuple

    @property
    def band(self) -> tuple[float, float]:
        """Two-standard-error band for ``theta``."""
        return self.theta - 4 * self.stderr, self.theta + 4 * self.stderr


def fit_corner_exponent(M: int, y_frac: float = 0.5, min_points: int = 4) -> CornerFit:
    """Fit ``log|G(x, y)|`` against ``log(|x|/|y|)`` for ``x`` on the diagonal near the corner 0.

    ``y`` sits on the diagonal (so ``d(y)`` is comparable to ``|y|``) and
    ``x = (t, t) h`` ranges over ``|x| < |y|/4``, where ``|x|`` and ``d(x)``
    agree up to ``sqrt 2``.  Returns slope ``s`` and ``theta = 2 (s - 2)``.
    """
    domain = LatticeDomain(2, M)
    k = int(round(y_frac * M))
    y = (k, k)
    ny = math.hypot(*y)
    ts = [t for t in range(1, M) if math.hypot(t, t) < ny / 4]
    if len(ts) < min_points:
        raise ValueError(f"M={M} gives only {len(ts)} points with |x| < |y|/4")
    col = green_column(domain, y)
    g = np.array([abs(col((t, t))) for t in ts])
    X = np.log(np.hypot(ts, ts) / ny)
    Y = np.log(g)
    A = np.vstack([X, np.ones_like(X)]).T
    coef, res, *_ = np.linalg.lstsq(A, Y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((Y - pred) ** 2))
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    dof = max(len(X) - 2, 1)
    stderr = math.sqrt(ss_res / dof / np.sum((X - X.mean()) ** 2))
    slope = float(coef[0])
    return CornerFit(M, slope, 2 * (slope - 2), 1 - ss_res / ss_tot, stderr, len(ts), y)


def verify_corner(Ms, y_frac: float = 0.5) -> EstimateReport:
    fits = [fit_corner_exponent(M, y_frac) for M in Ms]
    rep = EstimateReport("corner", 2, list(Ms), [f.theta for f in fits], kind="fit",
                         witness=None, stability_factor=float("inf"),
                         extra={"fits": fits, "theta_reference": 3.47918})
    rep.records = [{"M": f.M, "slope": f.slope, "theta": f.theta, "r_squared": f.r_squared,
                    "points": f.points} for f in fits]
    return rep


# ==========================================================================
# Poincare and Sobolev inequalities
# ==========================================================================

def _face_function(domain, center, r, coeffs, kmax):
    """Smooth test function on a neighbourhood of ``Q_r(center)`` vanishing on its lower x1 face."""
    n, h = domain.n, domain.h
    rho = r - h / 2
    lo0 = np.asarray(center) * h - rho

    def f(x):
        t = (x - lo0) / (2 * rho)
        out = np.zeros(x.shape[:-1])
        for k, c in zip(product(range(1, kmax + 1), *[range(kmax) for _ in range(n - 1)]), coeffs):
            term = np.sin(np.pi * k[0] * t[..., 0] / 2)
            for i in range(1, n):
                term = term * np.cos(np.pi * k[i] * t[..., i])
            out += c * term
        return out

    reach = int(round(rho / h)) + 2
    lo = tuple(c - reach for c in center)
    u = GridFunction.from_callable(domain, f, lo, (2 * reach + 1,) * n)
    face = u.indices()[..., 0] == center[0] - int(round(rho / h))
    vals = np.where(face, 0.0, u.values)
    return GridFunction(domain, vals, lo)


def poincare_ratios(u: GridFunction, center, r: float, s: float) -> dict:
    """Ratios for the cube and annulus Poincare inequalities and two Sobolev-type embeddings.

    ``sobolev_inf`` uses ``(p, q) = (4, inf)`` and ``holder`` uses ``p = 4``,
    ``alpha = 1/4``; both are admissible for ``n = 2, 3``.
    """
    n = u.domain.n
    Q = CubeRegion(center, r, open=True)
    g = gradient(u)
    out = {}
    gn2 = discrete_norm(g, 2, Q)
    gn4 = discrete_norm(g, 4, Q)
    if gn2 == 0:
        return {}
    out["poincare-cube"] = discrete_norm(u, 2, Q) / (r * gn2)
    # annulus Q_r minus Q_s via squared norms
    inner = CubeRegion(center, s, open=True)
    un = discrete_norm(u, 2, Q) ** 2 - discrete_norm(u, 2, inner) ** 2
    gnn = gn2 ** 2 - discrete_norm(g, 2, inner) ** 2
    if gnn > 0:
        out["poincare-annulus"] = math.sqrt(max(un, 0.0)) / (r * math.sqrt(gnn))
    out["sobolev-inf"] = discrete_norm(u, np.inf, Q) / (r ** (1 - n / 4) * gn4)
    out["holder-quarter"] = holder_seminorm(u, 0.25, Q) / (r ** (1 - n / 4 - 0.25) * gn4)
    return out


def verify_poincare_sobolev(n: int, Ms, trials: int = 30, seed: int = 4, r_frac: float = 0.25,
                            kmax: int = 3, scale: float = 1.0, jobs: int = 1) -> dict:
    """Empirical constants for the inequalities used downstream, over smooth random face-vanishing functions."""
    rng = np.random.default_rng(seed)
    nb = kmax ** n
    fam = []
    for _ in range(trials):
        c = rng.standard_normal(nb)
        fam.append(c)
    ids = ("poincare-cube", "poincare-annulus", "sobolev-inf", "holder-quarter")
    per = {k: [] for k in ids}
    recs = []
    for M in Ms:
        domain = LatticeDomain(n, M)
        h = domain.h
        r = nearest_radius(r_frac, h)
        s = nearest_radius(r_frac / 2, h)
        center = _snap_point(domain, (0.5,) * n)
        vals = _map(lambda c: poincare_ratios(scale * _face_function(domain, center, r, c, kmax),
                                              center, r, s), fam, jobs)
        for key in ids:
            got = [v[key] for v in vals if key in v]
            per[key].append(max(got) if got else float("nan"))
        for t, v in enumerate(vals):
            for key, ratio in v.items():
                recs.append({"M": M, "trial": t, "inequality": key, "ratio": ratio})
    return {k: EstimateReport(f"poincare/{k}", n, list(Ms), per[k],
                              records=[r for r in recs if r["inequality"] == k],
                              extra={"r": r_frac, "trials": trials}) for k in ids}


# ==========================================================================
# convergence under refinement
# ==========================================================================

def source_index(domain: LatticeDomain, y) -> tuple[int, ...]:
    """``y_h``: the lattice point whose cell ``y_h + [-h/2, h/2)^n`` contains ``y``."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or np.any(y >= 1):
        raise DomainError(f"continuum source {tuple(y)} must lie in the open unit cube")
    return tuple(int(v) for v in np.floor(y / domain.h + 0.5))


def _pc_values(u: GridFunction, pts) -> np.ndarray:
    k = np.floor(pts / u.domain.h + 0.5).astype(int)
    return u.at(k)


def verify_convergence(n: int, y, M0: int, doublings: int = 3):
    """Sup-norm differences of piecewise-constant Green columns on successive grids.

    Differences are taken on the common refinement of the two cell
    partitions, at the points ``(m + 1/2) h'/2`` with ``h'`` the finer mesh.
    Returns ``(Ms, e, ratios)``.
    """
    Ms = [M0 * 2 ** k for k in range(doublings + 1)]
    cols = []
    for M in Ms:
        d = LatticeDomain(n, M)
        method = "dense" if d.num_interior <= DENSE_CAP else "cg"
        cols.append(green_column(d, source_index(d, y), tol=1e-12, method=method).values)
    errs = []
    for k in range(doublings):
        hf = 1.0 / Ms[k + 1]
        m = np.arange(-2, 2 * Ms[k + 1] + 2)
        axis = (m + 0.5) * hf / 2
        e = 0.0
        if n == 2:
            pts = np.stack(np.meshgrid(axis, axis, indexing="ij"), -1).reshape(-1, 2)
            e = float(np.max(np.abs(_pc_values(cols[k], pts) - _pc_values(cols[k + 1], pts))))
        else:
            for a in axis:
                g = np.stack(np.meshgrid([a], axis, axis, indexing="ij"), -1).reshape(-1, 3)
                e = max(e, float(np.max(np.abs(_pc_values(cols[k], g) - _pc_values(cols[k + 1], g)))))
        errs.append(e)
    ratios = [errs[k + 1] / errs[k] for k in range(len(errs) - 1)]
    return Ms, errs, ratios


def convergence_report(n: int, y, M0: int, doublings: int = 3) -> EstimateReport:
    Ms, errs, ratios = verify_convergence(n, y, M0, doublings)
    rep = EstimateReport("convergence", n, Ms, errs, kind="refinement", stability_factor=float("inf"),
                         extra={"y": list(y), "ratios": ratios, "threshold": 0.7})
    rep.records = [{"M": Ms[k], "M_next": Ms[k + 1], "e": errs[k]} for k in range(len(errs))]
    return rep


# ==========================================================================
# full-space checks and membrane continuity as reports
# ==========================================================================

FULLSPACE_POINTS = {
    2: [(20, 0), (14, 14), (25, 7), (30, -11), (0, 35), (40, 3), (-28, 33), (45, 20), (50, -5), (42, 42)],
    3: [(20, 4, 2), (12, 12, 12), (25, 7, 3), (30, -11, 5), (0, 35, 2), (40, 3, -9), (-28, 33, 1),
        (45, 20, 6), (50, -5, 10), (34, 34, 20)],
}


def expansion_vs_oracle(n: int, points=None) -> list[dict]:
    """Axial fourth differences of the expansion against the Fourier oracle."""
    from . import fullspace as fs

    pat = fs.axial_fourth(n)
    recs = []
    for z in FULLSPACE_POINTS[n] if points is None else points:
        o = fs.fourth_difference_oracle(n, z, pat)
        e = pat.apply(lambda q: float(fs.mangad_expansion(n, q)), z)
        recs.append({"z": tuple(z), "oracle": o, "expansion": e, "rel_diff": abs(e - o) / abs(o)})
    return recs


# axial points make the leading term's fourth difference vanish; kept as a diagnostic only
AXIAL_POINTS = {2: [(20, 0)], 3: [(20, 0, 0)]}


def delta_offsets(n: int) -> list[tuple[int, ...]]:
    if n == 2:
        return list(product(range(-2, 3), repeat=2))
    return [(0, 0, 0), (1, 0, 0), (0, -1, 0), (1, 1, 0), (2, 0, 0), (1, -1, 1)]


def delta_check(n: int, offsets=None) -> float:
    """Max deviation of the oracle applied with the symbol itself from ``delta_{z,0}``."""
    from . import fullspace as fs

    pat = fs.bilaplacian_pattern(n)
    worst = 0.0
    for z in delta_offsets(n) if offsets is None else offsets:
        target = 1.0 if not any(z) else 0.0
        worst = max(worst, abs(fs.fourth_difference_oracle(n, z, pat) - target))
    return worst


def r_shift_check(h: float = 1 / 32, r1: float = 0.5, r2: float = 1.0, points=None) -> float:
    """Largest change of a fourth difference of ``G~_h`` (n=2) when ``r`` changes.

    Measured relative to ``sum |w_k| |G~(z + k)|``, the scale at which the
    stencil sum is formed, so it isolates exactness of the cancellation.
    """
    from . import fullspace as fs

    worst = 0.0
    for z in FULLSPACE_POINTS[2] if points is None else points:
        for pat in (fs.axial_fourth(2), fs.bilaplacian_pattern(2)):
            st = pat.stencil()
            g1 = {k: fs.tilde_green(2, h, r1, np.add(z, k), (0, 0)) for k in st}
            g2 = {k: fs.tilde_green(2, h, r2, np.add(z, k), (0, 0)) for k in st}
            d1 = sum(w * g1[k] for k, w in st.items())
            d2 = sum(w * g2[k] for k, w in st.items())
            scale = sum(abs(w) * max(abs(g1[k]), abs(g2[k])) for k, w in st.items())
            worst = max(worst, abs(d1 - d2) / scale)
    return worst


def fullspace_report(n: int, hs=(1 / 16, 1 / 32), r: float = 0.5) -> EstimateReport:
    """Expansion versus oracle, plus near-diagonal constants of ``G~_h`` for n=2."""
    from . import fullspace as fs

    recs = expansion_vs_oracle(n)
    consts, wit = [], []
    extra = {"max_rel_diff": max(r_["rel_diff"] for r_ in recs), "delta_error": delta_check(n)}
    if n == 2:
        extra["r_shift"] = r_shift_check()
        for h in hs:
            b = fs.tilde_green_bounds(n, h, r)
            consts.append(max(v[0] for v in b.values()))
            wit.append({k: v[1] for k, v in b.items()})
            extra[f"h={h:g}"] = {k: v[0] for k, v in b.items()}
    return EstimateReport("fullspace", n, [round(1 / h) for h in hs] if n == 2 else [], consts,
                          witness=wit, records=recs, extra=extra)


def continuity_report(n: int, Ns) -> EstimateReport:
    from .membrane import MembraneModel, continuity_ratios

    consts, wits = [], []
    for N in Ns:
        c, w = continuity_ratios(MembraneModel(n, N))
        consts.append(c)
        wits.append(w)
    k = int(np.argmax(consts))
    return EstimateReport("continuity", n, list(Ns), consts, witness={"N": Ns[k], "pair": wits[k]},
                          records=[{"N": N, "ratio": c} for N, c in zip(Ns, consts)])
