"""Lattice domains, grid functions with zero extension, and discrete norms.

Points of the lattice ``(hZ)^n`` are addressed by integer index vectors ``k``
with coordinates ``h * k``.  The closed unit cube ``Lambda`` has indices
``0..M`` in every axis and its interior has indices ``1..M-1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


class DomainError(ValueError):
    """A lattice point lies outside the set an operation is defined on."""


@dataclass(frozen=True)
class LatticeDomain:
    """The cube ``[0, 1]^n`` sampled on the lattice of mesh ``h = 1/M``."""

    n: int
    M: int

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.n}")
        if int(self.M) != self.M or self.M < 2:
            raise ValueError(f"M must be an integer >= 2, got {self.M}")

    @property
    def h(self) -> float:
        return 1.0 / self.M

    @property
    def interior_shape(self) -> tuple[int, ...]:
        return (self.M - 1,) * self.n

    @property
    def lattice_shape(self) -> tuple[int, ...]:
        return (self.M + 1,) * self.n

    @property
    def interior_lo(self) -> tuple[int, ...]:
        return (1,) * self.n

    @property
    def num_interior(self) -> int:
        return (self.M - 1) ** self.n

    @property
    def num_points(self) -> int:
        return (self.M + 1) ** self.n

    def in_lattice(self, k) -> bool:
        k = np.asarray(k)
        return bool(np.all((k >= 0) & (k <= self.M)))

    def in_interior(self, k) -> bool:
        k = np.asarray(k)
        return bool(np.all((k >= 1) & (k <= self.M - 1)))

    def interior_indices(self) -> np.ndarray:
        """Index vectors of interior points in C order, shape ``(N, n)``."""
        axes = [np.arange(1, self.M)] * self.n
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)

    def lattice_indices(self) -> np.ndarray:
        axes = [np.arange(0, self.M + 1)] * self.n
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)

    def flat_interior(self, k) -> int:
        """Position of interior index ``k`` in the C-ordered interior vector."""
        if not self.in_interior(k):
            raise DomainError(f"{tuple(k)} is not an interior index for M={self.M}")
        return int(np.ravel_multi_index(tuple(np.asarray(k) - 1), self.interior_shape))

    def distance_array(self) -> np.ndarray:
        """``d(z)`` for every point of ``Lambda``, shape ``lattice_shape``."""
        k = np.arange(self.M + 1)
        d1 = np.minimum(k, self.M - k)
        d = d1
        for _ in range(self.n - 1):
            d = np.minimum.outer(d, d1)
        return self.h * d

    def boundary_mask(self) -> np.ndarray:
        return self.distance_array() == 0


def boundary_distance(domain: LatticeDomain, z) -> float:
    """Euclidean distance from ``z`` to the nearest lattice point outside the interior.

    The nearest such point is always reached by moving along one axis, so the
    distance is ``h * min_i min(k_i, M - k_i)``.
    """
    k = np.asarray(z, dtype=int)
    if k.shape != (domain.n,):
        raise DomainError(f"expected an index vector of length {domain.n}")
    if not domain.in_lattice(k):
        raise DomainError(f"{tuple(k)} lies outside Lambda for M={domain.M}")
    return domain.h * float(np.min(np.minimum(k, domain.M - k)))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real (or tensor) values on an index box, extended by zero to all of ``(hZ)^n``.

    ``values`` has shape ``box_shape + component_shape``; ``lo`` is the lattice
    index of ``values[0, ..., 0]``.  ``phi`` marks members of the clamped space
    (zero outside the interior).
    """

    domain: LatticeDomain
    values: np.ndarray
    lo: tuple[int, ...]
    phi: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(int(v) for v in self.lo))
        if len(self.lo) != self.domain.n:
            raise ValueError("lo must have one entry per dimension")
        if np.ndim(self.values) < self.domain.n:
            raise ValueError("values must have at least n axes")

    # construction ---------------------------------------------------------

    @classmethod
    def interior(cls, domain: LatticeDomain, values) -> "GridFunction":
        """A member of the clamped space from its interior values."""
        values = np.asarray(values, dtype=float)
        if values.shape[: domain.n] != domain.interior_shape:
            values = values.reshape(domain.interior_shape + values.shape[1:])
        return cls(domain, values, domain.interior_lo, phi=True)

    @classmethod
    def zeros(cls, domain: LatticeDomain) -> "GridFunction":
        return cls.interior(domain, np.zeros(domain.interior_shape))

    @classmethod
    def from_callable(cls, domain: LatticeDomain, func: Callable, lo=None, shape=None) -> "GridFunction":
        """Sample ``func(x)`` (x of shape ``(..., n)`` in coordinates) on an index box.

        Defaults to the closed cube ``Lambda``.
        """
        lo = (0,) * domain.n if lo is None else tuple(lo)
        shape = domain.lattice_shape if shape is None else tuple(shape)
        axes = [domain.h * (l + np.arange(s)) for l, s in zip(lo, shape)]
        x = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return cls(domain, np.asarray(func(x), dtype=float), lo)

    # geometry -------------------------------------------------------------

    @property
    def box_shape(self) -> tuple[int, ...]:
        return self.values.shape[: self.domain.n]

    @property
    def component_shape(self) -> tuple[int, ...]:
        return self.values.shape[self.domain.n:]

    @property
    def hi(self) -> tuple[int, ...]:
        """Exclusive upper index corner of the stored box."""
        return tuple(l + s for l, s in zip(self.lo, self.box_shape))

    def indices(self) -> np.ndarray:
        axes = [np.arange(l, l + s) for l, s in zip(self.lo, self.box_shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def coordinates(self) -> np.ndarray:
        return self.domain.h * self.indices()

    # evaluation -----------------------------------------------------------

    def __call__(self, k):
        k = tuple(int(v) for v in k)
        rel = tuple(a - l for a, l in zip(k, self.lo))
        if all(0 <= r < s for r, s in zip(rel, self.box_shape)):
            return self.values[rel]
        if self.component_shape:
            return np.zeros(self.component_shape)
        return 0.0

    def at(self, k) -> np.ndarray:
        """Vectorised evaluation at index vectors of shape ``(..., n)``."""
        k = np.asarray(k, dtype=int)
        rel = k - np.asarray(self.lo)
        inside = np.all((rel >= 0) & (rel < np.asarray(self.box_shape)), axis=-1)
        out = np.zeros(k.shape[:-1] + self.component_shape)
        sel = tuple(rel[inside].T)
        out[inside] = self.values[sel]
        return out

    def on_box(self, lo, shape) -> np.ndarray:
        """Values on another index box, zero where the stored box does not reach."""
        lo = tuple(lo)
        shape = tuple(shape)
        out = np.zeros(shape + self.component_shape)
        src, dst = [], []
        for a, s, b, t in zip(self.lo, self.box_shape, lo, shape):
            start = max(a, b)
            stop = min(a + s, b + t)
            if stop <= start:
                return out
            src.append(slice(start - a, stop - a))
            dst.append(slice(start - b, stop - b))
        out[tuple(dst)] = self.values[tuple(src)]
        return out

    def interior_values(self) -> np.ndarray:
        d = self.domain
        return self.on_box(d.interior_lo, d.interior_shape)

    def on_lattice(self) -> np.ndarray:
        return self.on_box((0,) * self.domain.n, self.domain.lattice_shape)

    def with_box(self, lo, shape) -> "GridFunction":
        return GridFunction(self.domain, self.on_box(lo, shape), lo, phi=False)

    def component(self, *idx) -> "GridFunction":
        sl = (slice(None),) * self.domain.n + tuple(idx)
        return GridFunction(self.domain, self.values[sl], self.lo, phi=self.phi)

    # arithmetic -----------------------------------------------------------

    def _union(self, other: "GridFunction"):
        lo = tuple(min(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(max(a, b) for a, b in zip(self.hi, other.hi))
        shape = tuple(b - a for a, b in zip(lo, hi))
        return lo, shape

    def __add__(self, other):
        if isinstance(other, GridFunction):
            lo, shape = self._union(other)
            return GridFunction(self.domain, self.on_box(lo, shape) + other.on_box(lo, shape),
                                lo, phi=self.phi and other.phi)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            return self + (-other)
        return NotImplemented

    def __neg__(self):
        return GridFunction(self.domain, -self.values, self.lo, phi=self.phi)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            # the product vanishes wherever either factor does, so the
            # intersection box suffices; a union keeps shapes simple
            lo, shape = self._union(other)
            a = self.on_box(lo, shape)
            b = other.on_box(lo, shape)
            return GridFunction(self.domain, a * b, lo, phi=self.phi or other.phi)
        if np.isscalar(other):
            return GridFunction(self.domain, other * self.values, self.lo, phi=self.phi)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return GridFunction(self.domain, self.values / other, self.lo, phi=self.phi)
        return NotImplemented

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


@dataclass(frozen=True)
class CubeRegion:
    """Lattice cube ``{y : |y - x|_inf <= r}`` around an index ``center``.

    ``r`` is a length.  With ``open=True`` the inequality is strict, which is
    how cell-centre membership realises the open cube ``Q_r(x)``.  With
    ``complement=True`` the region is everything outside.
    """

    center: tuple[int, ...]
    r: float
    open: bool = False
    complement: bool = False

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(int(v) for v in self.center))
        if self.r < 0:
            raise ValueError("cube half-sidelength must be nonnegative")

    def mask(self, lo, shape, h: float) -> np.ndarray:
        axes = [np.abs(np.arange(l, l + s) - c) for l, s, c in zip(lo, shape, self.center)]
        dist = axes[0]
        for a in axes[1:]:
            dist = np.maximum.outer(dist, a)
        # index units; the slack absorbs radii that are exact multiples of h
        rr = self.r / h
        eps = 1e-9
        inside = dist < rr - eps if self.open else dist <= rr + eps
        return ~inside if self.complement else inside

    def count(self, h: float) -> int:
        """Number of lattice points of a (non-complement) cube."""
        lo, shape = self.box(h)
        return int(self.mask(lo, shape, h).sum())

    def box(self, h: float) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Smallest index box containing the (non-complement) cube."""
        k = int(np.floor(self.r / h + 1e-9))
        lo = tuple(c - k for c in self.center)
        return lo, (2 * k + 1,) * len(self.center)


def snap_radius(r: float, h: float) -> float:
    """Replace ``r`` by the largest radius in ``hN + h/2`` that is ``<= r``.

    On such radii the open cube ``Q_r`` is an exact union of lattice cells.
    """
    return h * np.floor(r / h - 0.5 + 1e-9) + 0.5 * h


def _region_box(f: GridFunction, region: CubeRegion | None):
    """Index box over which a norm must be summed, with its membership mask."""
    h = f.domain.h
    if region is None or region.complement:
        lo, shape = f.lo, f.box_shape
    else:
        lo, shape = region.box(h)
    mask = None if region is None else region.mask(lo, shape, h)
    return lo, shape, mask


def discrete_norm(f: GridFunction, p: float = 2, region: CubeRegion | None = None) -> float:
    """``||f||_{L^p(region)}`` of the piecewise constant interpolation.

    Tensor-valued functions take the Euclidean norm of the component norms.
    """
    if p < 1:
        raise ValueError(f"exponent must be >= 1, got {p}")
    lo, shape, mask = _region_box(f, region)
    vals = f.on_box(lo, shape)
    if mask is not None:
        vals = vals[mask]
    else:
        vals = vals.reshape((-1,) + f.component_shape)
    vals = np.abs(vals.reshape(vals.shape[0], -1)) if vals.size else np.zeros((0, 1))
    h_n = f.domain.h ** f.domain.n
    if np.isinf(p):
        comp = vals.max(axis=0) if vals.shape[0] else np.zeros(vals.shape[1])
    else:
        comp = (h_n * np.sum(vals ** p, axis=0)) ** (1.0 / p)
    return float(np.sqrt(np.sum(comp ** 2)))


def holder_seminorm(f: GridFunction, alpha: float, region: CubeRegion | None = None) -> float:
    """``sup |f(x) - f(y)| / |x - y|^alpha`` over distinct lattice pairs of the region.

    Without a region, clamped functions use ``Lambda`` and other functions
    their stored box.
    """
    if not 0 < alpha <= 1:
        raise ValueError("Holder exponent must lie in (0, 1]")
    if f.component_shape:
        raise ValueError("Holder seminorm is defined for scalar functions")
    h = f.domain.h
    if region is None:
        if f.phi:
            lo, shape = (0,) * f.domain.n, f.domain.lattice_shape
        else:
            lo, shape = f.lo, f.box_shape
        mask = np.ones(shape, dtype=bool)
    else:
        lo, shape, mask = _region_box(f, region)
    idx = (np.stack(np.meshgrid(*[np.arange(l, l + s) for l, s in zip(lo, shape)],
                                indexing="ij"), axis=-1))[mask]
    vals = f.on_box(lo, shape)[mask]
    if len(vals) < 2:
        raise ValueError("Holder seminorm needs at least two points")
    x = h * idx.astype(float)
    best = 0.0
    chunk = max(1, 4_000_000 // len(vals))
    for start in range(0, len(vals), chunk):
        xs = x[start:start + chunk]
        dist = np.sqrt(((xs[:, None, :] - x[None, :, :]) ** 2).sum(-1))
        diff = np.abs(vals[start:start + chunk, None] - vals[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist > 0, diff / dist ** alpha, 0.0)
        best = max(best, float(ratio.max()))
    return best

