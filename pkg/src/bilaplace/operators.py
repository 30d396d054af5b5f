"""Finite-difference calculus on ``(hZ)^n`` acting with implicit zero extension.

Every operator returns a :class:`GridFunction` on a box grown by the stencil
reach, so results are exact at every lattice point and no boundary case needs
special treatment.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .lattice import DomainError, GridFunction, LatticeDomain


def _check_axis(f: GridFunction, i: int):
    if not 0 <= i < f.domain.n:
        raise ValueError(f"axis {i} out of range for n={f.domain.n}")


def shift(f: GridFunction, i: int, sign: int = 1) -> GridFunction:
    """``tau_{+-i} f (x) = f(x +- h e_i)``."""
    _check_axis(f, i)
    lo = list(f.lo)
    lo[i] -= sign
    return GridFunction(f.domain, f.values, tuple(lo), phi=False)


def forward_diff(f: GridFunction, i: int, sign: int = 1) -> GridFunction:
    """``D_i f`` for ``sign=+1`` and the backward difference ``D_{-i} f`` for ``sign=-1``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    _check_axis(f, i)
    n = f.domain.n
    lo = list(f.lo)
    if sign > 0:
        lo[i] -= 1
    shape = list(f.box_shape)
    shape[i] += 1
    out = np.zeros(tuple(shape) + f.component_shape)
    # on the grown box both variants read f at offset 0 with a plus sign and
    # at offset 1 with a minus sign; only the box origin differs
    head = [slice(None)] * n
    tail = [slice(None)] * n
    head[i] = slice(0, -1)
    tail[i] = slice(1, None)
    out[tuple(head)] += f.values
    out[tuple(tail)] -= f.values
    return GridFunction(f.domain, out / f.domain.h, tuple(lo))


def backward_diff(f: GridFunction, i: int) -> GridFunction:
    return forward_diff(f, i, -1)


def box_diff(arr: np.ndarray, axis: int, sign: int, h: float) -> np.ndarray:
    """``D_{+-}`` along ``axis`` of a plain array, same shape, zero outside.

    Exact wherever the true function vanishes just beyond both ends of the
    array, which is the case for clamped functions stored on ``Lambda`` as
    long as at most one forward and one backward difference act per axis.
    """
    out = np.empty_like(arr)
    a = np.moveaxis(arr, axis, 0)
    o = np.moveaxis(out, axis, 0)
    if sign > 0:
        o[:-1] = a[1:] - a[:-1]
        o[-1] = -a[-1]
    else:
        o[1:] = a[1:] - a[:-1]
        o[0] = a[0]
    return out / h


def gradient(f: GridFunction, sign: int = 1) -> GridFunction:
    """Forward (or backward) gradient, components on the last axis."""
    parts = [forward_diff(f, i, sign) for i in range(f.domain.n)]
    return _stack(parts)


def hessian(f: GridFunction) -> GridFunction:
    """Non-symmetric Hessian with entries ``D_{-i} D_j f``."""
    n = f.domain.n
    rows = []
    for i in range(n):
        rows.append(_stack([forward_diff(forward_diff(f, j, 1), i, -1) for j in range(n)]))
    return _stack(rows, axis_pos=n)


def _stack(parts: list[GridFunction], axis_pos: int | None = None) -> GridFunction:
    domain = parts[0].domain
    lo = tuple(min(p.lo[k] for p in parts) for k in range(domain.n))
    hi = tuple(max(p.hi[k] for p in parts) for k in range(domain.n))
    shape = tuple(b - a for a, b in zip(lo, hi))
    arrs = [p.on_box(lo, shape) for p in parts]
    axis = -1 if axis_pos is None else axis_pos
    return GridFunction(domain, np.stack(arrs, axis=axis), lo)


def multi_diff(f: GridFunction, alpha, sign: int = 1) -> GridFunction:
    """``D^alpha_{+-h} f`` for a multi-index ``alpha``."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != f.domain.n or min(alpha) < 0:
        raise ValueError("alpha must be a nonnegative multi-index of length n")
    out = f
    for i, a in enumerate(alpha):
        for _ in range(a):
            out = forward_diff(out, i, sign)
    return out


def divergence(g: GridFunction, sign: int = 1) -> GridFunction:
    """``div_{+-h} g = sum_i D_{+-i} g_i`` for a vector field."""
    out = None
    for i in range(g.domain.n):
        term = forward_diff(g.component(i), i, sign)
        out = term if out is None else out + term
    return out


def div_div(g: GridFunction) -> GridFunction:
    """``sum_{ij} D_{-j} D_i g_{ij}``, the adjoint of :func:`hessian`.

    With ``f = div_div(g)`` one has ``(f, phi) = (g, hessian(phi))`` for all
    clamped ``phi``.
    """
    n = g.domain.n
    out = None
    for i in range(n):
        for j in range(n):
            term = forward_diff(forward_diff(g.component(i, j), i, 1), j, -1)
            out = term if out is None else out + term
    return out


@lru_cache(maxsize=None)
def laplacian_stencil(n: int) -> np.ndarray:
    """Unit-mesh ``(2n+1)``-point Laplacian as a ``3^n`` array."""
    s = np.zeros((3,) * n)
    c = (1,) * n
    s[c] = -2.0 * n
    for i in range(n):
        for d in (0, 2):
            k = list(c)
            k[i] = d
            s[tuple(k)] = 1.0
    return s


@lru_cache(maxsize=None)
def bilaplacian_stencil(n: int) -> np.ndarray:
    """Unit-mesh bilaplacian as a ``5^n`` array (the Laplacian stencil convolved with itself)."""
    lap = laplacian_stencil(n)
    out = np.zeros((5,) * n)
    for k in np.ndindex(lap.shape):
        if lap[k]:
            sl = tuple(slice(a, a + 3) for a in k)
            out[sl] += lap[k] * lap
    return out


def _apply_stencil(f: GridFunction, stencil: np.ndarray, scale: float) -> GridFunction:
    n = f.domain.n
    reach = stencil.shape[0] // 2
    lo = tuple(l - reach for l in f.lo)
    shape = tuple(s + 2 * reach for s in f.box_shape)
    out = np.zeros(shape + f.component_shape)
    for k in np.ndindex(stencil.shape):
        c = stencil[k]
        if c:
            # out(x) += c * f(x + k - reach)
            sl = tuple(slice(2 * reach - a, 2 * reach - a + s) for a, s in zip(k, f.box_shape))
            out[sl] += c * f.values
    return GridFunction(f.domain, out * scale, lo)


def laplacian(f: GridFunction) -> GridFunction:
    """``Delta_h f = sum_i D_{-i} D_i f`` via the ``(2n+1)``-point stencil."""
    return _apply_stencil(f, laplacian_stencil(f.domain.n), f.domain.h ** -2)


def bilaplacian(f: GridFunction, fused: bool = True) -> GridFunction:
    """``Delta_h^2 f``; the fused path applies the ``5^n`` stencil in one sweep."""
    if not fused:
        return laplacian(laplacian(f))
    return _apply_stencil(f, bilaplacian_stencil(f.domain.n), f.domain.h ** -4)


def bilaplacian_interior(u: np.ndarray, h: float) -> np.ndarray:
    """``Delta_h^2`` of a clamped function given by its interior array, restricted to the interior.

    This is the solver's matrix-vector product.
    """
    n = u.ndim
    st = bilaplacian_stencil(n)
    pad = np.pad(u, 2)
    out = np.zeros_like(u)
    for k in np.ndindex(st.shape):
        c = st[k]
        if c:
            sl = tuple(slice(a, a + s) for a, s in zip(k, u.shape))
            out += c * pad[sl]
    return out * h ** -4


def delta_function(domain: LatticeDomain, y) -> GridFunction:
    """Discrete delta ``delta_{h,y}``: ``1/h^n`` at the interior point ``y``."""
    y = tuple(int(v) for v in y)
    if not domain.in_interior(y):
        raise DomainError(f"delta source {y} must be an interior index")
    vals = np.zeros(domain.interior_shape)
    vals[tuple(a - 1 for a in y)] = domain.h ** -domain.n
    return GridFunction.interior(domain, vals)


def inner(f: GridFunction, g: GridFunction) -> float:
    """``(f, g)_{L^2}`` summed over all lattice points (and components)."""
    lo, shape = f._union(g)
    return float(np.sum(f.on_box(lo, shape) * g.on_box(lo, shape)) * f.domain.h ** f.domain.n)
