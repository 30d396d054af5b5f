"""The clamped Green's function ``G_h`` and its discrete derivatives.

Columns ``G_h(., y)`` come from solving ``Delta_h^2 u = delta_{h,y}``.  On
small grids the whole matrix is available as the scaled inverse of the
interior bilaplacian matrix, which is also what the verification sweeps use.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np
import scipy.linalg

from . import cache
from .lattice import DomainError, GridFunction, LatticeDomain
from .operators import box_diff, delta_function
from .solver import DENSE_CAP, SizeError, SolveReport, dense_matrix, solve_bilaplacian

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GreenColumn:
    domain: LatticeDomain
    y: tuple[int, ...]
    values: GridFunction
    report: SolveReport

    def __call__(self, x) -> float:
        return float(self.values(x))


_column_cache: dict = {}
_column_lock = threading.Lock()


def green_column(domain: LatticeDomain, y, tol: float = 1e-10, method: str = "cg",
                 cache_dir=None) -> GreenColumn:
    """``G_h(., y)`` for an interior source ``y``.

    Results are memoised per ``(domain, y, tol, method)``.  With a cache
    directory (or ``BILAP_CACHE_DIR`` set) columns are also persisted; a
    corrupted file is reported and recomputed.
    """
    y = tuple(int(v) for v in y)
    if len(y) != domain.n or not domain.in_interior(y):
        raise DomainError(f"source {y} must be an interior index for M={domain.M}")
    key = (domain, y, tol, method)
    with _column_lock:
        hit = _column_cache.get(key)
    if hit is not None:
        return hit
    cache_dir = cache_dir if cache_dir is not None else cache.default_cache_dir()
    path = cache.column_path(cache_dir, domain.n, domain.M, y) if cache_dir else None
    col = None
    if path is not None and path.exists():
        try:
            vals = cache.read_column(path, domain.n, domain.M, y)
            col = GreenColumn(domain, y, GridFunction.interior(domain, vals),
                              SolveReport(0, 0.0, "cache"))
        except cache.CacheError as exc:
            logger.warning("ignoring cache file %s: %s", path, exc)
    if col is None:
        u, report = solve_bilaplacian(domain, delta_function(domain, y), tol=tol, method=method,
                                      preconditioner="dirichlet")
        col = GreenColumn(domain, y, u, report)
        if path is not None:
            cache.write_column(path, domain.n, domain.M, y, u.interior_values())
    with _column_lock:
        _column_cache[key] = col
    return col


@dataclass(eq=False)
class GreenMatrix:
    """Dense ``G_h`` on interior points, C-ordered like the interior vector."""

    domain: LatticeDomain
    matrix: np.ndarray
    _factor: np.ndarray | None = field(default=None, repr=False)

    def value(self, x, y) -> float:
        d = self.domain
        if not (d.in_interior(x) and d.in_interior(y)):
            return 0.0
        return float(self.matrix[d.flat_interior(x), d.flat_interior(y)])

    def column(self, y) -> GridFunction:
        d = self.domain
        if not d.in_interior(y):
            return GridFunction.zeros(d)
        return GridFunction.interior(d, self.matrix[:, d.flat_interior(y)])

    def diagonal(self) -> np.ndarray:
        return np.diag(self.matrix).reshape(self.domain.interior_shape)

    def cholesky(self) -> np.ndarray:
        """Lower factor ``L`` with ``L @ L.T == matrix``, computed once."""
        if self._factor is None:
            try:
                self._factor = np.linalg.cholesky(self.matrix)
            except np.linalg.LinAlgError as exc:
                raise np.linalg.LinAlgError(f"Green matrix is not positive definite: {exc}") from exc
        return self._factor

    def on_lattice(self) -> np.ndarray:
        """``G_h(x, y)`` for ``x, y`` in ``Lambda`` as a ``2n``-axis array (x axes first)."""
        d = self.domain
        m = d.interior_shape
        full = np.zeros(d.lattice_shape * 2)
        inner = (slice(1, d.M),) * (2 * d.n)
        full[inner] = self.matrix.reshape(m + m)
        return full


@lru_cache(maxsize=4)
def green_matrix(domain: LatticeDomain, cap: int = DENSE_CAP) -> GreenMatrix:
    """All of ``G_h`` as ``A^{-1} / h^n`` where ``A`` is the interior bilaplacian matrix."""
    if domain.num_interior > cap:
        raise SizeError(f"{domain.num_interior} interior points exceed the dense cap {cap}")
    A = dense_matrix(domain, cap)
    c, low = scipy.linalg.cho_factor(A, lower=True)
    inv = scipy.linalg.cho_solve((c, low), np.eye(A.shape[0]))
    inv = 0.5 * (inv + inv.T)
    return GreenMatrix(domain, inv * domain.h ** -domain.n)


def green_value(domain: LatticeDomain, x, y, tol: float = 1e-10) -> float:
    """``G_h(x, y)``, zero unless both points are interior."""
    x = tuple(int(v) for v in x)
    y = tuple(int(v) for v in y)
    if not (domain.in_interior(x) and domain.in_interior(y)):
        return 0.0
    return green_column(domain, y, tol=tol)(x)


def _lattice_column(domain: LatticeDomain, y, source) -> np.ndarray:
    """``G_h(., y)`` on ``Lambda``; zero for non-interior ``y``."""
    if not domain.in_interior(y):
        return np.zeros(domain.lattice_shape)
    if isinstance(source, GreenMatrix):
        return source.column(y).on_lattice()
    return green_column(domain, y, tol=source).values.on_lattice()


@dataclass(frozen=True, eq=False)
class GreenDerivatives:
    """Derivative bundle of ``G_h(., y)`` on ``Lambda``.

    Component axes follow the box axes, x-indices before y-indices; Hessians
    use the ``D_{-i} D_j`` convention in either variable.
    """

    y: tuple[int, ...]
    value: GridFunction
    grad_x: GridFunction
    hess_x: GridFunction
    grad_x_grad_y: GridFunction
    hess_x_grad_y: GridFunction
    hess_x_hess_y: GridFunction


def _y_stencils(n: int, h: float):
    """Difference weights over source offsets for ``D^y_{+k}`` and ``D^y_{-k} D^y_l``."""
    grad = []
    for k in range(n):
        e = tuple(int(a == k) for a in range(n))
        grad.append({e: 1 / h, (0,) * n: -1 / h})
    hess = {}
    for k, l in product(range(n), repeat=2):
        w: dict = {}
        # D_{-k} D_l g(y) = [g(y+e_l) - g(y) - g(y-e_k+e_l) + g(y-e_k)] / h^2
        terms = [(tuple(int(a == l) for a in range(n)), 1.0),
                 ((0,) * n, -1.0),
                 (tuple(int(a == l) - int(a == k) for a in range(n)), -1.0),
                 (tuple(-int(a == k) for a in range(n)), 1.0)]
        for off, c in terms:
            w[off] = w.get(off, 0.0) + c / h ** 2
        hess[k, l] = w
    return grad, hess


def _x_hessian(col: np.ndarray, h: float) -> np.ndarray:
    n = col.ndim
    out = np.empty(col.shape + (n, n))
    for j in range(n):
        dj = box_diff(col, j, 1, h)
        for i in range(n):
            out[..., i, j] = box_diff(dj, i, -1, h)
    return out


def _x_gradient(col: np.ndarray, h: float) -> np.ndarray:
    return np.stack([box_diff(col, i, 1, h) for i in range(col.ndim)], axis=-1)


def green_derivatives(domain: LatticeDomain, y, source=None) -> GreenDerivatives:
    """x-, y- and mixed differences of ``G_h(x, y)`` at a fixed source ``y``.

    y-differences combine columns at neighbouring sources; columns at
    non-interior sources are zero by convention.  ``source`` is a
    :class:`GreenMatrix` or a CG tolerance (default ``1e-10``).
    """
    y = tuple(int(v) for v in y)
    if not domain.in_lattice(y):
        raise DomainError(f"source {y} lies outside Lambda")
    n, h = domain.n, domain.h
    source = 1e-10 if source is None else source
    cols: dict = {}

    def col(off):
        p = tuple(a + b for a, b in zip(y, off))
        if p not in cols:
            cols[p] = _lattice_column(domain, p, source)
        return cols[p]

    def combine(weights):
        return sum(c * col(off) for off, c in weights.items() if c)

    grad_w, hess_w = _y_stencils(n, h)
    g0 = col((0,) * n)
    gy = [combine(w) for w in grad_w]
    hy = {kl: combine(w) for kl, w in hess_w.items()}
    lat = (0,) * n

    def gf(arr):
        return GridFunction(domain, arr, lat)

    return GreenDerivatives(
        y=y,
        value=gf(g0),
        grad_x=gf(_x_gradient(g0, h)),
        hess_x=gf(_x_hessian(g0, h)),
        grad_x_grad_y=gf(np.stack([_x_gradient(g, h) for g in gy], axis=-1)),
        hess_x_grad_y=gf(np.stack([_x_hessian(g, h) for g in gy], axis=-1)),
        hess_x_hess_y=gf(np.stack(
            [np.stack([_x_hessian(hy[k, l], h) for l in range(n)], axis=-1) for k in range(n)],
            axis=-2)),
    )


def green_N_scale(n: int, N: int) -> tuple[LatticeDomain, float]:
    """Unit-lattice Green's function on ``V_N = [-N, N]^n`` via ``G_N = (2N+2)^{4-n} G_h``.

    Returns the mesh-``h`` domain with ``M = 2N + 2`` and the factor; the
    point ``v`` of ``V_N`` has index ``v + N + 1``.
    """
    if N < 0:
        raise ValueError("N must be nonnegative")
    M = 2 * N + 2
    return LatticeDomain(n, M), float(M) ** (4 - n)
