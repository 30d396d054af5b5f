"""The membrane model: the centred Gaussian field on ``V_N = [-N, N]^n`` with covariance ``G_N``.

Everything here works in unit lattice units.  ``V_N`` is identified with the
interior of the mesh-``h`` cube for ``M = 2N + 2`` through ``v -> v + N + 1``,
and ``G_N = (2N + 2)^{4 - n} G_h``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.stats

from .green import GreenMatrix, green_matrix, green_N_scale
from .lattice import GridFunction, LatticeDomain
from .operators import laplacian

BATCH = 4096


@dataclass(frozen=True)
class MembraneModel:
    n: int
    N: int

    @cached_property
    def domain(self) -> LatticeDomain:
        return green_N_scale(self.n, self.N)[0]

    @property
    def scale(self) -> float:
        return green_N_scale(self.n, self.N)[1]

    @property
    def size(self) -> int:
        return self.domain.num_interior

    @cached_property
    def green(self) -> GreenMatrix:
        return green_matrix(self.domain)

    @cached_property
    def covariance(self) -> np.ndarray:
        """``G_N`` on ``V_N`` in C order."""
        return self.scale * self.green.matrix

    @cached_property
    def factor(self) -> np.ndarray:
        return math.sqrt(self.scale) * self.green.cholesky()

    def points(self) -> np.ndarray:
        """Unit-lattice coordinates of ``V_N`` in C order, shape ``(size, n)``."""
        return self.domain.interior_indices() - (self.N + 1)

    def field(self, values) -> GridFunction:
        """Wrap a sample vector as a clamped grid function on the mesh-``h`` cube."""
        return GridFunction.interior(self.domain, np.asarray(values, dtype=float))


@dataclass(frozen=True, eq=False)
class FieldSample:
    model: MembraneModel
    seed: int
    index: int
    psi: GridFunction

    @cached_property
    def energy(self) -> float:
        return hamiltonian_N(self.model, self.psi.interior_values())


def hamiltonian(psi: GridFunction, interior_only: bool = False) -> float:
    """``1/2 sum |Delta_h psi|^2 h^n``.

    The sum runs over every lattice point where ``Delta_h psi`` is nonzero,
    which is what makes ``H = 1/2 (Delta_h^2 psi, psi)`` and the Gibbs
    density match the covariance ``G``.  ``interior_only=True`` restricts it to
    the interior points.
    """
    lap = laplacian(psi)
    vals = lap.values
    if interior_only:
        d = psi.domain
        vals = lap.on_box(d.interior_lo, d.interior_shape)
    return 0.5 * float(np.sum(vals ** 2)) * psi.domain.h ** psi.domain.n


def hamiltonian_N(model: MembraneModel, values, interior_only: bool = False) -> float:
    """Unit-lattice energy ``1/2 sum |Delta_1 psi|^2`` of a sample vector."""
    h = model.domain.h
    return h ** (4 - model.n) * hamiltonian(model.field(values), interior_only)


def _batch_normals(seed: int, batch: int, rows: int, cols: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, batch])))
    return gen.standard_normal((rows, cols))


def sample_values(model: MembraneModel, seed: int, count: int, jobs: int = 1,
                  start: int = 0) -> np.ndarray:
    """``count`` samples as rows of a ``(count, size)`` array.

    Sample ``k`` is row ``k % BATCH`` of batch ``k // BATCH``, whose normals
    come from a Philox stream keyed by ``(seed, batch)``; output is identical
    for any ``jobs``.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    L = model.factor
    out = np.empty((count, model.size))
    first, last = start // BATCH, (start + count - 1) // BATCH if count else start // BATCH - 1

    def work(b):
        xi = _batch_normals(seed, b, BATCH, model.size)
        lo = max(start, b * BATCH)
        hi = min(start + count, (b + 1) * BATCH)
        out[lo - start:hi - start] = xi[lo - b * BATCH:hi - b * BATCH] @ L.T

    batches = range(first, last + 1)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            list(pool.map(work, batches))
    else:
        for b in batches:
            work(b)
    return out


def sample_field(model: MembraneModel, seed: int, count: int = 1) -> list[FieldSample]:
    """Draw ``psi = L xi`` with ``L L^T = G_N``; reproducible from ``seed``."""
    vals = sample_values(model, seed, count)
    return [FieldSample(model, seed, k, model.field(v)) for k, v in enumerate(vals)]


def log_density_ratio(model: MembraneModel, psi1, psi2) -> float:
    """``log p(psi1) - log p(psi2)`` for the Gaussian with covariance ``G_N``."""
    dist = scipy.stats.multivariate_normal(mean=np.zeros(model.size), cov=model.covariance)
    return float(dist.logpdf(psi1) - dist.logpdf(psi2))


def increment_variance(model: MembraneModel, x, y) -> float:
    """Exact ``E |psi_x - psi_y|^2`` for unit-lattice points of ``[-N-1, N+1]^n``."""
    g = model.green

    def G(a, b):
        ia = tuple(int(v) + model.N + 1 for v in a)
        ib = tuple(int(v) + model.N + 1 for v in b)
        return model.scale * g.value(ia, ib)

    return G(x, x) - G(x, y) - G(y, x) + G(y, y)


def continuity_bound(n: int, N: int, dist: np.ndarray) -> np.ndarray:
    if n == 2:
        return dist ** 2 * np.log(2 + N / dist)
    return dist


def continuity_ratios(model: MembraneModel, chunk: int = 512):
    """Sup of ``E|psi_x - psi_y|^2`` over the continuity bound, all pairs ``x != y`` of ``V_N``.

    Returns ``(sup, witness pair)``.
    """
    C = model.covariance
    pts = model.points().astype(float)
    diag = np.diag(C)
    best, witness = 0.0, None
    for s in range(0, len(pts), chunk):
        a = slice(s, s + chunk)
        var = diag[a, None] + diag[None, :] - 2 * C[a]
        dist = np.sqrt(((pts[a, None, :] - pts[None, :, :]) ** 2).sum(-1))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist > 0, var / continuity_bound(model.n, model.N, dist), 0.0)
        k = np.unravel_index(np.argmax(ratio), ratio.shape)
        if ratio[k] > best:
            best = float(ratio[k])
            witness = (tuple(int(v) for v in pts[s + k[0]]), tuple(int(v) for v in pts[k[1]]))
    return best, witness


def holder_statistic(model: MembraneModel, samples: np.ndarray, alpha: float) -> np.ndarray:
    """Per-sample ``sup |psi'_x' - psi'_y'| / |x' - y'|^alpha`` of the rescaled field.

    ``psi'_{x'} = N^{n/2 - 2} psi_{N x'}``; pairs range over distinct points
    of ``V_N`` (so ``|x - y| >= 1`` on the unit lattice).
    """
    N = max(model.N, 1)
    pts = model.points() / N
    vals = samples * N ** (model.n / 2 - 2)
    dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    iu = np.triu_indices(len(pts), 1)
    w = dist[iu] ** -alpha
    out = np.empty(len(vals))
    for k, v in enumerate(vals):
        out[k] = np.max(np.abs(v[iu[0]] - v[iu[1]]) * w)
    return out


@dataclass
class RepulsionRow:
    N: int
    samples: int
    hits: int
    p_hat: float
    ci_low: float
    ci_high: float
    neg_log_p: float
    lower_bound_only: bool


def positive_fraction(model: MembraneModel, seed: int, samples: int, jobs: int = 1,
                      sign: int = 1, chunk: int = 65536) -> int:
    """Number of samples with ``sign * psi_x >= 0`` at every point of ``V_N``."""
    hits = 0
    for start in range(0, samples, chunk):
        vals = sample_values(model, seed, min(chunk, samples - start), jobs=jobs, start=start)
        hits += int(np.count_nonzero(np.all(sign * vals >= 0, axis=1)))
    return hits


def entropic_repulsion_mc(n: int, Ns, samples: int, seed: int = 0, jobs: int = 1,
                          confidence: float = 0.95) -> list[RepulsionRow]:
    """Monte Carlo ``P(psi >= 0 on V_N)`` with Wilson intervals.

    With zero hits the row is flagged and ``neg_log_p`` is the lower bound
    from the upper interval end.
    """
    rows = []
    for N in Ns:
        model = MembraneModel(n, N)
        hits = positive_fraction(model, seed, samples, jobs)
        ci = scipy.stats.binomtest(hits, samples).proportion_ci(confidence, method="wilson")
        p = hits / samples
        zero = hits == 0
        rows.append(RepulsionRow(N, samples, hits, p, float(ci.low), float(ci.high),
                                 -math.log(ci.high) if zero else -math.log(p), zero))
    return rows


def repulsion_exponent_fit(rows: list[RepulsionRow]) -> float | None:
    """Slope of ``log(-log P)`` against ``log N`` (descriptive only)."""
    pts = [(math.log(r.N), math.log(r.neg_log_p)) for r in rows if r.N > 0 and r.neg_log_p > 0]
    if len(pts) < 2:
        return None
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])
