"""B-spline interpolation of lattice functions.

``N^m`` is the cardinal B-spline of order ``m`` (degree ``m - 1``) on
``[0, m]``.  ``J_h^mu`` sums lattice values against the tensor splines
``N_h^mu(x) = prod_i N^{mu_i}(x_i / h)``, which makes continuous derivatives
of the interpolant equal to interpolated lattice differences.  With
``J u(x) = sum_z u(z) N_h(x - z)`` summation by parts lands on backward
differences: ``D^alpha J^mu u = J^{mu - alpha} D^alpha_{-h} u``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .lattice import DomainError, GridFunction
from .operators import hessian, multi_diff, shift


def bspline_eval(m: int, x, deriv: int = 0) -> np.ndarray:
    """``N^m(x)`` or its ``deriv``-th derivative, from the truncated-power formula.

    The truncated power ``max(t, 0)^0`` is taken as the step ``t >= 0``, so
    ``N^1`` is the indicator of ``[0, 1)``.  Values outside ``[0, m)`` are
    exactly zero.
    """
    if m < 1:
        raise ValueError(f"B-spline order must be >= 1, got {m}")
    if deriv < 0:
        raise ValueError("derivative order must be nonnegative")
    x = np.asarray(x, dtype=float)
    p = m - 1 - deriv
    if p < 0:
        return np.zeros_like(x)
    out = np.zeros_like(x)
    fall = math.factorial(m - 1) // math.factorial(p)
    for i in range(m + 1):
        t = x - i
        tp = np.where(t >= 0, t, 0.0) ** p if p > 0 else (t >= 0).astype(float)
        out += (-1) ** i * math.comb(m, i) * tp
    out *= fall / math.factorial(m - 1)
    return np.where((x >= 0) & (x < m), out, 0.0)


def spline_derivative_identity_check(m: int, x: float) -> tuple[float, float]:
    """``(N^m)'(x)`` and ``N^{m-1}(x) - N^{m-1}(x - 1)`` as a pair."""
    if m < 2:
        raise ValueError("the identity needs m >= 2")
    lhs = float(bspline_eval(m, x, 1))
    rhs = float(bspline_eval(m - 1, x) - bspline_eval(m - 1, x - 1))
    return lhs, rhs


@dataclass(frozen=True)
class SplineOperator:
    """The interpolation ``J_h^mu``."""

    mu: tuple[int, ...]
    h: float

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(int(m) for m in self.mu))
        if min(self.mu) < 1:
            raise ValueError("spline orders must be >= 1")
        if self.h <= 0:
            raise ValueError("mesh must be positive")

    @property
    def n(self) -> int:
        return len(self.mu)

    def lowered(self, alpha) -> "SplineOperator":
        return SplineOperator(tuple(m - a for m, a in zip(self.mu, alpha)), self.h)


def _check_alpha(op: SplineOperator, alpha):
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != op.n or any(a < 0 or a >= m for a, m in zip(alpha, op.mu)):
        raise ValueError(f"need 0 <= alpha_i < mu_i, got alpha={alpha}, mu={op.mu}")
    return alpha


def interp_eval(op: SplineOperator, u: GridFunction, x, alpha=None) -> np.ndarray:
    """``(D^alpha J_h^mu u)(x)`` with ``D^alpha`` the classical derivative.

    ``x`` holds coordinates, shape ``(n,)`` or ``(..., n)``.  Only the
    ``prod(mu_i)`` lattice points whose spline covers ``x`` contribute.
    """
    if u.domain.n != op.n:
        raise ValueError("dimension mismatch")
    if abs(u.domain.h - op.h) > 1e-15:
        raise ValueError("operator mesh differs from the grid function's mesh")
    alpha = (0,) * op.n if alpha is None else _check_alpha(op, alpha)
    x = np.asarray(x, dtype=float)
    pts = x.reshape(-1, op.n)
    s = pts / op.h
    base = np.floor(s).astype(int)
    weights = []
    for i, m in enumerate(op.mu):
        j = np.arange(m)
        t = s[:, i:i + 1] - (base[:, i:i + 1] - j)
        weights.append(bspline_eval(m, t, alpha[i]) / op.h ** alpha[i])
    # values are anchored at one stencil point: by partition of unity this is
    # the same sum, and constants come out exactly
    ref = u.at(base) if not any(alpha) else 0.0
    total = np.zeros((len(pts),) + u.component_shape) + ref
    for js in product(*[range(m) for m in op.mu]):
        k = base - np.array(js)
        w = np.prod([weights[i][:, js[i]] for i in range(op.n)], axis=0)
        vals = u.at(k) - ref
        total += w.reshape((-1,) + (1,) * len(u.component_shape)) * vals
    return total.reshape(x.shape[:-1] + u.component_shape)


def commutation_check(op: SplineOperator, alpha, u: GridFunction, x) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of ``D^alpha J^mu u = J^{mu - alpha} (D_{-h}^alpha u)``.

    Forward differences would need an extra shift ``tau_{-alpha}``.
    """
    alpha = _check_alpha(op, alpha)
    lhs = interp_eval(op, u, x, alpha)
    rhs = interp_eval(op.lowered(alpha), multi_diff(u, alpha, sign=-1), x)
    return lhs, rhs


def hessian_bridge(u: GridFunction, x) -> tuple[np.ndarray, np.ndarray]:
    """``hess J_h u`` (classical) and ``J~_h hess_h u`` at points ``x``.

    ``(J~_h)_{ij} = J^{(3,..,3) - e_i - e_j} o tau_{-j}`` acts on the entry
    ``D_{-i} D_j u``; the shift turns it into ``D_{-i} D_{-j} u``.
    """
    n = u.domain.n
    h = u.domain.h
    J = SplineOperator((3,) * n, h)
    x = np.asarray(x, dtype=float)
    H = hessian(u)
    lhs = np.empty(x.shape[:-1] + (n, n))
    rhs = np.empty_like(lhs)
    for i, j in product(range(n), repeat=2):
        e = np.zeros(n, dtype=int)
        e[i] += 1
        e[j] += 1
        lhs[..., i, j] = interp_eval(J, u, x, tuple(e))
        rhs[..., i, j] = interp_eval(J.lowered(tuple(e)), shift(H.component(i, j), j, -1), x)
    return lhs, rhs


def pc_interp_eval(u: GridFunction, x) -> np.ndarray:
    """Piecewise-constant interpolation: cell ``z + [-h/2, h/2)^n`` takes ``u(z)``."""
    x = np.asarray(x, dtype=float)
    pts = x.reshape(-1, u.domain.n)
    k = np.floor(pts / u.domain.h + 0.5).astype(int)
    if u.phi:
        lo = np.zeros(u.domain.n, dtype=int)
        hi = np.full(u.domain.n, u.domain.M + 1)
    else:
        lo, hi = np.array(u.lo), np.array(u.hi)
    if np.any(k < lo) or np.any(k >= hi):
        raise DomainError("point lies outside the interpolation region")
    return u.at(k).reshape(x.shape[:-1] + u.component_shape)


def _cube_quadrature(center, s: float, h: float, order: int):
    """Gauss nodes and weights for the open cube ``Q_s(center)`` split at half-mesh points.

    Needs ``s`` in ``h N + h/2`` so every sub-interval lies between spline knots.
    """
    c = np.asarray(center, dtype=float) * h
    cells = int(round(2 * s / (h / 2)))
    if abs(cells * h / 2 - 2 * s) > 1e-9 * h:
        raise ValueError("cube half-width must be a multiple of h/2")
    g, w = np.polynomial.legendre.leggauss(order)
    edges = np.arange(cells) * (h / 2) - s
    x1 = (edges[:, None] + (g[None, :] + 1) * h / 4).ravel()
    w1 = np.tile(w * h / 4, cells)
    axes = [c[i] + x1 for i in range(len(c))]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(c))
    wts = w1
    for _ in range(len(c) - 1):
        wts = np.multiply.outer(wts, w1)
    return mesh, wts.ravel()


def spline_l2_norm(op: SplineOperator, u: GridFunction, center, s: float, alpha=None) -> float:
    """``||D^alpha J^mu u||_{L^2(Q_s(center))}``, exact up to rounding."""
    pts, wts = _cube_quadrature(center, s, op.h, max(op.mu))
    vals = interp_eval(op, u, pts, alpha)
    vals = vals.reshape(len(wts), -1)
    return float(np.sqrt(np.sum(wts[:, None] * vals ** 2)))


def norm_equivalence_ratios(u: GridFunction, alpha, center, s: float, r: float,
                            mu=None) -> tuple[float, float]:
    """The two ratios bounded by interpolation norm equivalence.

    Returns ``||D^a J u||_{Q_s} / ||D^a_{-h} u||_{Q_r}`` and
    ``||D^a_{-h} u||_{Q_s} / ||D^a J u||_{Q_r}``; ``s`` and ``r`` must lie in
    ``h N + h/2``.  A zero denominator gives ``nan``.
    """
    from .lattice import CubeRegion, discrete_norm

    n = u.domain.n
    op = SplineOperator((3,) * n if mu is None else mu, u.domain.h)
    alpha = _check_alpha(op, alpha)
    du = multi_diff(u, alpha, sign=-1)

    def lattice(rad):
        return discrete_norm(du, 2, CubeRegion(center, rad, open=True))

    def cont(rad):
        return spline_l2_norm(op, u, center, rad, alpha)

    def ratio(a, b):
        return a / b if b > 0 else float("nan")

    return ratio(cont(s), lattice(r)), ratio(lattice(s), cont(r))
