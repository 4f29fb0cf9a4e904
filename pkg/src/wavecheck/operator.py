"""Positive definite self-adjoint operators and the energy inner product.

State vectors are plain 1-D numpy arrays whose length is the operator's
dimension.  Every routine here also accepts stacked states of shape
``(..., dim)`` so that whole trajectories can be processed at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.fft import dst, dstn, idst, idstn

from .errors import ContractViolation, SolverError

CG_TOL = 1e-12


def _as_state(v, dim):
    v = np.asarray(v, dtype=float)
    if v.ndim == 0 or v.shape[-1] != dim:
        raise ContractViolation(f"state has trailing length {v.shape[-1:] or 0}, operator dimension is {dim}")
    if not np.all(np.isfinite(v)):
        raise ContractViolation("state contains non-finite entries")
    return v


class SpdOperator:
    """Common interface.  Subclasses set ``dim`` and ``basis``."""

    dim: int
    basis: tuple

    def check(self, v):
        return _as_state(v, self.dim)

    def apply(self, v):
        raise NotImplementedError

    def solve_shifted(self, alpha, b):
        raise NotImplementedError

    def eigenvalues(self):
        raise NotImplementedError

    def spectral_bound(self):
        return float(np.max(self.eigenvalues()))

    def min_eigenvalue(self):
        return float(np.min(self.eigenvalues()))

    def zeros(self):
        return np.zeros(self.dim)

    def to_modal(self, v):
        """Coefficients in an orthonormal eigenbasis, ordered like :meth:`eigenvalues`."""
        raise NotImplementedError

    def from_modal(self, w):
        raise NotImplementedError


@dataclass(frozen=True)
class DiagonalOperator(SpdOperator):
    """Operator that is diagonal in its own basis; ``A = diag(eigs)``."""

    eigs: tuple

    def __post_init__(self):
        eigs = np.asarray(self.eigs, dtype=float)
        if eigs.ndim != 1 or eigs.size == 0:
            raise ContractViolation("need a non-empty list of eigenvalues")
        if not np.all(eigs > 0):
            raise ContractViolation("eigenvalues must be positive")

    @property
    def dim(self):
        return len(self.eigs)

    @property
    def basis(self):
        return ("diag", self.dim)

    def eigenvalues(self):
        return np.asarray(self.eigs, dtype=float)

    def apply(self, v):
        return self.check(v) * self.eigenvalues()

    def solve_shifted(self, alpha, b):
        if alpha < 0:
            raise ContractViolation("shift must be nonnegative")
        b = self.check(b)
        if alpha == 0:
            return b.copy()
        return b / (1.0 + alpha * self.eigenvalues())

    def to_modal(self, v):
        return self.check(v).copy()

    def from_modal(self, w):
        return self.check(w).copy()


@dataclass(frozen=True)
class SpectralSine(DiagonalOperator):
    """``-c^2 Laplacian`` on the unit square restricted to the sine modes ``modes``.

    Mode ``(k, j)`` has eigenvalue ``c^2 pi^2 (k^2 + j^2)``.  Coefficients are
    taken with respect to the orthonormal sine basis, so the inner product is
    the Euclidean one.
    """

    eigs: tuple = field(init=False, repr=False)
    c: float = 1.0
    modes: tuple = ((1, 1),)

    def __init__(self, c=1.0, modes=((1, 1),)):
        modes = tuple((int(k), int(j)) for k, j in modes)
        if len(set(modes)) != len(modes):
            raise ContractViolation("duplicate modes")
        if any(k < 1 or j < 1 for k, j in modes):
            raise ContractViolation("mode indices must be >= 1")
        object.__setattr__(self, "c", float(c))
        object.__setattr__(self, "modes", modes)
        eigs = tuple(self.c**2 * math.pi**2 * (k * k + j * j) for k, j in modes)
        object.__setattr__(self, "eigs", eigs)
        DiagonalOperator.__post_init__(self)

    @property
    def basis(self):
        return ("sine", self.modes)

    def mode_index(self, k, j):
        try:
            return self.modes.index((k, j))
        except ValueError:
            return None


def _lap1d(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


def _fd_eigs_1d(n, h):
    j = np.arange(1, n + 1)
    return (2.0 / h**2) * (1.0 - np.cos(j * np.pi * h))


class _FdLaplacian(SpdOperator):
    """Shared machinery for finite-difference ``-c^2 Laplacian`` with Dirichlet data."""

    c: float
    n_interior: int

    @property
    def h(self):
        return 1.0 / (self.n_interior + 1)

    @property
    def nodes(self):
        return self.h * np.arange(1, self.n_interior + 1)

    def apply(self, v):
        v = self.check(v)
        flat = v.reshape(-1, self.dim)
        out = (self._matrix @ flat.T).T
        return out.reshape(v.shape)

    def solve_shifted(self, alpha, b):
        if alpha < 0:
            raise ContractViolation("shift must be nonnegative")
        b = self.check(b)
        if alpha == 0:
            return b.copy()
        if b.ndim > 1:
            flat = b.reshape(-1, self.dim)
            return np.stack([self.solve_shifted(alpha, row) for row in flat]).reshape(b.shape)
        return conjugate_gradient(
            lambda x: x + alpha * (self._matrix @ x), b, tol=CG_TOL, maxiter=10 * self.dim
        )


@dataclass(frozen=True)
class FdLaplacian1d(_FdLaplacian):
    c: float = 1.0
    n_interior: int = 15

    def __post_init__(self):
        if self.n_interior < 1:
            raise ContractViolation("need at least one interior node")
        object.__setattr__(self, "_matrix", (self.c**2 / self.h**2) * _lap1d(self.n_interior))

    @property
    def dim(self):
        return self.n_interior

    @property
    def basis(self):
        return ("fd1d", self.n_interior)

    def eigenvalues(self):
        return self.c**2 * _fd_eigs_1d(self.n_interior, self.h)

    def spectral_bound(self):
        n, h = self.n_interior, self.h
        return (2.0 * self.c**2 / h**2) * (1.0 - math.cos(math.pi * h * n))

    def to_modal(self, v):
        return dst(self.check(v), type=1, norm="ortho", axis=-1)

    def from_modal(self, w):
        return idst(self.check(w), type=1, norm="ortho", axis=-1)

    def mode_eigenvalue(self, k):
        return self.c**2 * (2.0 / self.h**2) * (1.0 - math.cos(k * math.pi * self.h))

    def sample(self, func):
        """Nodal values of ``func(x)`` at the interior grid points."""
        return np.asarray(func(self.nodes), dtype=float)


@dataclass(frozen=True)
class FdLaplacian2d(_FdLaplacian):
    """5-point Laplacian on the unit square; unknowns ordered with x fastest."""

    c: float = 1.0
    n_interior: int = 15

    def __post_init__(self):
        if self.n_interior < 1:
            raise ContractViolation("need at least one interior node")
        n = self.n_interior
        eye = sp.identity(n, format="csr")
        lap = sp.kron(eye, _lap1d(n)) + sp.kron(_lap1d(n), eye)
        object.__setattr__(self, "_matrix", ((self.c**2 / self.h**2) * lap).tocsr())

    @property
    def dim(self):
        return self.n_interior**2

    @property
    def basis(self):
        return ("fd2d", self.n_interior)

    def eigenvalues(self):
        e = _fd_eigs_1d(self.n_interior, self.h)
        return self.c**2 * (e[:, None] + e[None, :]).ravel()

    def spectral_bound(self):
        n, h = self.n_interior, self.h
        return 2.0 * (2.0 * self.c**2 / h**2) * (1.0 - math.cos(math.pi * h * n))

    def to_modal(self, v):
        v = self.check(v)
        n = self.n_interior
        grid = v.reshape(v.shape[:-1] + (n, n))
        return dstn(grid, type=1, norm="ortho", axes=(-2, -1)).reshape(v.shape)

    def from_modal(self, w):
        w = self.check(w)
        n = self.n_interior
        grid = w.reshape(w.shape[:-1] + (n, n))
        return idstn(grid, type=1, norm="ortho", axes=(-2, -1)).reshape(w.shape)

    def mode_eigenvalue(self, k, j):
        h = self.h
        return self.c**2 * (2.0 / h**2) * (2.0 - math.cos(k * math.pi * h) - math.cos(j * math.pi * h))

    def sample(self, func):
        x = self.nodes
        X, Y = np.meshgrid(x, x, indexing="xy")
        return np.asarray(func(X, Y), dtype=float).ravel()


def conjugate_gradient(matvec, b, tol=CG_TOL, maxiter=None):
    """Solve ``M x = b`` for SPD ``M`` given only its action.

    Stops when ``|b - M x| <= tol |b|``.  Raises :class:`SolverError` if the
    iteration cap is hit first.
    """
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    maxiter = maxiter or 10 * b.size
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = r @ r
    it = 0
    while it < maxiter:
        if math.sqrt(rr) <= tol * bnorm:
            # the recursive residual drifts; confirm with the true one and restart if needed
            r = b - matvec(x)
            rr = r @ r
            if math.sqrt(rr) <= tol * bnorm:
                return x
            p = r.copy()
        Mp = matvec(p)
        step = rr / (p @ Mp)
        x += step * p
        r -= step * Mp
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1
    res = np.linalg.norm(b - matvec(x)) / bnorm
    if res > tol:
        raise SolverError("conjugate gradient did not converge", res)
    return x


def energy_inner(op, P, Q):
    """``((P, Q)) = (A p1, q1) + (p2, q2)``; works on stacked pairs."""
    p1, p2 = P
    q1, q2 = Q
    p1, p2, q1, q2 = (op.check(v) for v in (p1, p2, q1, q2))
    return np.sum(op.apply(p1) * q1, axis=-1) + np.sum(p2 * q2, axis=-1)


def energy_norm(op, P):
    val = energy_inner(op, P, P)
    # (Ax, x) can dip below zero by round-off only
    return np.sqrt(np.maximum(val, 0.0))
