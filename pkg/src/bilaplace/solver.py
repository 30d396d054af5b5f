"""Solvers for the clamped discrete bilaplace equation ``Delta_h^2 u = f``.

The matrix-free path is preconditioned conjugate gradients on the interior
array.  The dense path assembles the interior matrix and factorises it; it is
the oracle for everything else on small grids.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.sparse

from .lattice import GridFunction, LatticeDomain
from .operators import bilaplacian_interior, bilaplacian_stencil, hessian

logger = logging.getLogger(__name__)

DENSE_CAP = 5000


class NonConvergenceError(RuntimeError):
    """CG hit its iteration cap; ``best`` holds the lowest-residual iterate."""

    def __init__(self, message, best: GridFunction, report: "SolveReport"):
        super().__init__(message)
        self.best = best
        self.report = report


class SizeError(ValueError):
    """A dense operation was requested on a grid above the configured cap."""


@dataclass
class SolveReport:
    iterations: int
    residual: float
    method: str


def _rhs_array(domain: LatticeDomain, f) -> np.ndarray:
    if isinstance(f, GridFunction):
        return f.interior_values()
    arr = np.asarray(f, dtype=float)
    return arr.reshape(domain.interior_shape)


@lru_cache(maxsize=8)
def assemble_bilaplacian(domain: LatticeDomain) -> scipy.sparse.csr_matrix:
    """Sparse matrix of ``Delta_h^2`` on the C-ordered interior vector."""
    n, m = domain.n, domain.M - 1
    st = bilaplacian_stencil(n)
    idx = np.arange(m ** n).reshape((m,) * n)
    rows, cols, vals = [], [], []
    for k in np.ndindex(st.shape):
        c = st[k]
        if not c:
            continue
        off = np.array(k) - 2
        src = tuple(slice(max(0, -o), m - max(0, o)) for o in off)
        dst = tuple(slice(max(0, o), m - max(0, -o)) for o in off)
        r = idx[src].ravel()
        cl = idx[dst].ravel()
        rows.append(r)
        cols.append(cl)
        vals.append(np.full(r.size, c))
    A = scipy.sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m ** n, m ** n))
    return A * domain.h ** -4


def dense_matrix(domain: LatticeDomain, cap: int = DENSE_CAP) -> np.ndarray:
    if domain.num_interior > cap:
        raise SizeError(f"{domain.num_interior} interior points exceed the dense cap {cap}")
    return assemble_bilaplacian(domain).toarray()


@lru_cache(maxsize=4)
def _dense_factor(domain: LatticeDomain):
    return scipy.linalg.cho_factor(dense_matrix(domain, cap=max(DENSE_CAP, domain.num_interior)),
                                   lower=True)


def dense_solve(domain: LatticeDomain, f, cap: int = DENSE_CAP) -> GridFunction:
    """Direct Cholesky solve; the oracle for the iterative path."""
    if domain.num_interior > cap:
        raise SizeError(f"{domain.num_interior} interior points exceed the dense cap {cap}")
    b = _rhs_array(domain, f)
    flat = b.reshape(domain.num_interior, -1)
    u = scipy.linalg.cho_solve(_dense_factor(domain), flat)
    return GridFunction.interior(domain, u.reshape(b.shape))


def _dirichlet_eigs(domain: LatticeDomain) -> np.ndarray:
    m = domain.M - 1
    k = np.arange(1, m + 1)
    lam1 = 4.0 / domain.h ** 2 * np.sin(np.pi * k / (2 * domain.M)) ** 2
    lam = lam1
    for _ in range(domain.n - 1):
        lam = np.add.outer(lam, lam1)
    return lam


def _preconditioner(domain: LatticeDomain, kind: str):
    if kind == "jacobi":
        # the clamped stencil has the same diagonal at every interior point
        diag = bilaplacian_stencil(domain.n)[(2,) * domain.n] * domain.h ** -4
        return lambda r: r / diag
    if kind == "dirichlet":
        lam2 = _dirichlet_eigs(domain) ** 2

        def apply(r):
            rh = scipy.fft.dstn(r, type=1, norm="ortho")
            return scipy.fft.idstn(rh / lam2, type=1, norm="ortho")
        return apply
    if kind == "none":
        return lambda r: r
    raise ValueError(f"unknown preconditioner {kind!r}")


# iterations without halving the best residual before giving up
STAGNATION = 5000


def _cg(domain, b, tol, maxiter, precond):
    h = domain.h
    apply_pc = _preconditioner(domain, precond)
    bnorm = np.linalg.norm(b)
    u = np.zeros_like(b)
    r = b.copy()
    z = apply_pc(r)
    p = z.copy()
    rz = np.vdot(r, z)
    best = (np.inf, u.copy())
    last_gain = 0
    for it in range(1, maxiter + 1):
        Ap = bilaplacian_interior(p, h)
        alpha = rz / np.vdot(p, Ap)
        u += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / bnorm
        if res < 0.5 * best[0]:
            last_gain = it
        if res < best[0]:
            best = (res, u.copy())
        if it - last_gain > STAGNATION:
            maxiter = it
            break
        if res <= tol:
            # the recursive residual drifts; confirm against the true one
            true_res = np.linalg.norm(b - bilaplacian_interior(u, h)) / bnorm
            if true_res <= tol:
                return u, SolveReport(it, float(true_res), "cg")
            r = b - bilaplacian_interior(u, h)
        z = apply_pc(r)
        rz_new = np.vdot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NonConvergenceError(
        f"CG did not reach tol={tol:g} after {maxiter} iterations (best {best[0]:.3e})",
        GridFunction.interior(domain, best[1]),
        SolveReport(maxiter, float(best[0]), "cg"))


def solve_bilaplacian(domain: LatticeDomain, f, tol: float = 1e-10, method: str = "cg",
                      maxiter: int | None = None, preconditioner: str = "jacobi"):
    """Solve ``Delta_h^2 u = f`` in the interior for clamped ``u``.

    Parameters
    ----------
    domain : LatticeDomain
    f : GridFunction or array
        Right-hand side; only its interior values matter.
    tol : float
        Target relative residual in the unweighted l2 norm of the interior vector.
    method : {"cg", "dense"}
        ``"dense"`` raises :class:`SizeError` above ``DENSE_CAP`` unknowns.
    maxiter : int, optional
        CG iteration cap, default ``50 * M**2``.
    preconditioner : {"jacobi", "dirichlet", "none"}
        ``"dirichlet"`` applies the inverse of the squared Dirichlet Laplacian
        through sine transforms.  It only accelerates convergence.

    Returns
    -------
    u : GridFunction
    report : SolveReport
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = _rhs_array(domain, f)
    if not np.any(b):
        return GridFunction.zeros(domain), SolveReport(0, 0.0, method)
    if method == "dense":
        u = dense_solve(domain, b)
        res = np.linalg.norm(b - bilaplacian_interior(u.interior_values(), domain.h)) / np.linalg.norm(b)
        return u, SolveReport(1, float(res), "dense")
    if method != "cg":
        raise ValueError(f"unknown method {method!r}")
    maxiter = 50 * domain.M ** 2 if maxiter is None else maxiter
    u, report = _cg(domain, b, tol, maxiter, preconditioner)
    logger.debug("cg n=%d M=%d: %d iterations, residual %.2e",
                 domain.n, domain.M, report.iterations, report.residual)
    return GridFunction.interior(domain, u), report


def energy_norm(u: GridFunction) -> float:
    """``||hessian(u)||^2_{L^2}`` summed over every lattice point where it is nonzero."""
    H = hessian(u)
    return float(np.sum(H.values ** 2) * u.domain.h ** u.domain.n)
