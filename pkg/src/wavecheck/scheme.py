"""Leap-frog and cosine-type two-step integrators on a staggered time grid.

A trajectory stores displacements ``U^n`` for ``n = -1 .. N+1`` and
velocities ``V^{n+1/2}`` for ``n = -1 .. N``.  The ghost entries at the left
end and the extra step past ``T`` are what the reconstructions downstream
need; they are always computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractViolation

FAMILIES = ("leapfrog", "cosine")


@dataclass(frozen=True)
class SchemeParams:
    """Member of the second-order cosine family.

    ``family="leapfrog"`` is the explicit member (``q1 = 0``).  For
    ``family="cosine"`` the implicit weight ``q1`` is free and
    ``p1 = q1 - 1/2``.  ``formulation`` picks the velocity variable: 1 uses
    the plain difference quotient, 2 uses ``(I + k^2 q1 A)`` times it.
    """

    family: str = "leapfrog"
    q1: float = 0.0
    formulation: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown scheme family {self.family!r}")
        if self.formulation not in (1, 2):
            raise ConfigError("formulation must be 1 or 2")
        if self.q1 < 0 or not math.isfinite(self.q1):
            raise ConfigError("q1 must be a nonnegative number")
        if self.family == "leapfrog" and self.q1 != 0:
            raise ConfigError("leap-frog has q1 = 0; use family='cosine' for other weights")

    @classmethod
    def leapfrog(cls):
        return cls("leapfrog")

    @classmethod
    def cosine(cls, q1, formulation=1):
        return cls("cosine", float(q1), formulation)

    @property
    def p1(self):
        return self.q1 - 0.5

    @property
    def tag(self):
        if self.family == "leapfrog":
            return "leapfrog"
        return f"cosine{self.formulation}"

    def amplification(self, x):
        """Rational cosine approximation ``r(x) = (1 + p1 x^2)/(1 + q1 x^2)``."""
        x2 = np.asarray(x, dtype=float) ** 2
        return (1.0 + self.p1 * x2) / (1.0 + self.q1 * x2)

    def max_stable_step(self, op):
        """Largest ``k`` with ``|r(k sqrt(lambda))| <= 1`` over the spectrum of ``op``."""
        lam = op.spectral_bound()
        slack = 1.0 - 4.0 * self.q1
        if slack <= 0:
            return math.inf
        return 2.0 / math.sqrt(slack * lam)


@dataclass(frozen=True)
class StaggeredTrajectory:
    k: float
    N: int
    U: np.ndarray  # (N+3, dim); row i holds U^{i-1}
    Vhalf: np.ndarray  # (N+2, dim); row i holds V^{i-1/2}
    f: np.ndarray  # (N+3, dim); row i holds f^{i-1}
    scheme: SchemeParams
    u0: np.ndarray
    v0: np.ndarray
    source_extension: str = "zero"
    has_source: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def T(self):
        return self.N * self.k

    @property
    def dim(self):
        return self.U.shape[1]

    @property
    def formulation_tag(self):
        return self.scheme.tag

    def node(self, n):
        """``U^n`` for ``-1 <= n <= N+1``."""
        return self.U[n + 1]

    def half(self, n):
        """``V^{n+1/2}`` for ``-1 <= n <= N``."""
        return self.Vhalf[n + 1]

    def source(self, n):
        return self.f[n + 1]

    @property
    def node_times(self):
        return self.k * np.arange(-1, self.N + 2)

    @property
    def half_times(self):
        return self.k * (np.arange(-1, self.N + 1) + 0.5)


def initial_step(op, u0, v0, f0, k):
    """Second-order start ``U^1 = U^0 + k v0 + (k^2/2)(f^0 - A U^0)``."""
    if k <= 0:
        raise ContractViolation("time step must be positive")
    u0, v0, f0 = op.check(u0), op.check(v0), op.check(f0)
    return u0 + k * v0 + 0.5 * k * k * (f0 - op.apply(u0))


def advance(op, scheme, U_prev, U_curr, f_prev, f_curr, f_next, k):
    """One two-step update, returning ``U^{n+1}``."""
    if k <= 0:
        raise ContractViolation("time step must be positive")
    U_prev, U_curr = op.check(U_prev), op.check(U_curr)
    f_prev, f_curr, f_next = op.check(f_prev), op.check(f_curr), op.check(f_next)
    AU = op.apply(U_curr)
    if scheme.family == "leapfrog":
        return 2.0 * U_curr - U_prev + k * k * (f_curr - AU)
    q1, p1 = scheme.q1, scheme.p1
    rhs = 2.0 * U_curr - U_prev + 2.0 * k * k * p1 * AU + k * k * (q1 * f_next - 2.0 * p1 * f_curr + q1 * f_prev)
    if q1 != 0:
        rhs = rhs - k * k * q1 * op.apply(U_prev)
    return op.solve_shifted(k * k * q1, rhs)


def _sample_source(op, f, k, N, extension):
    if f is None:
        return np.zeros((N + 3, op.dim)), "zero"
    rows = [op.check(f(n * k)) for n in range(0, N + 2)]
    if extension == "evaluate":
        first = op.check(f(-k))
    elif extension == "zero":
        first = op.zeros()
    else:
        raise ConfigError(f"unknown source extension {extension!r}")
    return np.vstack([first] + rows), extension


def run(op, scheme, u0, v0, f, k, N, extend_source="evaluate"):
    """Integrate to ``t = N k`` and one step beyond.

    ``f`` is ``None`` (no source) or a callable ``t -> state``.  The value
    ``f(-k)`` is only used by cosine residuals at the first step; with
    ``extend_source="zero"`` it is replaced by zero.
    """
    if N < 2:
        raise ConfigError("need at least N = 2 steps")
    if k <= 0:
        raise ConfigError("time step must be positive")
    u0, v0 = op.check(u0), op.check(v0)
    F, extension = _sample_source(op, f, k, N, extend_source)

    U = np.empty((N + 3, op.dim))
    U[1] = u0
    U[2] = initial_step(op, u0, v0, F[1], k)
    for n in range(1, N + 1):
        U[n + 2] = advance(op, scheme, U[n], U[n + 1], F[n], F[n + 1], F[n + 2], k)

    dU = np.diff(U[1:], axis=0) / k  # dU[n] = (U^{n+1} - U^n)/k, n = 0..N
    ghost = 2.0 * v0 - dU[0]
    U[0] = u0 - k * ghost
    dU = np.vstack([ghost, dU])
    if scheme.formulation == 2 and scheme.q1 != 0:
        Vhalf = dU + k * k * scheme.q1 * op.apply(dU)
    else:
        Vhalf = dU

    return StaggeredTrajectory(
        k=float(k),
        N=int(N),
        U=U,
        Vhalf=Vhalf,
        f=F,
        scheme=scheme,
        u0=u0.copy(),
        v0=v0.copy(),
        source_extension=extension,
        has_source=f is not None,
    )


def scheme_defect(op, traj):
    """Largest relative defect of the two-step equation over ``n = 1..N``.

    Re-substitutes the stored trajectory into the scheme; a clean run gives
    round-off sized values.
    """
    k, s = traj.k, traj.scheme
    worst = 0.0
    for n in range(1, traj.N + 1):
        Up, Uc, Un = traj.node(n - 1), traj.node(n), traj.node(n + 1)
        fp, fc, fn = traj.source(n - 1), traj.source(n), traj.source(n + 1)
        if s.family == "leapfrog":
            lhs = (Un - 2 * Uc + Up) / k**2 + op.apply(Uc)
            rhs = fc
        else:
            lhs = (Un - 2 * Uc + Up) / k**2 + op.apply(s.q1 * Un - 2 * s.p1 * Uc + s.q1 * Up)
            rhs = s.q1 * fn - 2 * s.p1 * fc + s.q1 * fp
        scale = max(np.linalg.norm(op.apply(Uc)), np.linalg.norm(rhs), np.linalg.norm(Uc) / k**2, 1e-300)
        worst = max(worst, np.linalg.norm(lhs - rhs) / scale)
    return worst


def velocity_recurrence(op, traj):
    """Leap-frog velocities from ``V^{n+1/2} = V^{n-1/2} + k (f^n - A U^n)``.

    Starts from the stored ``V^{-1/2}``; returns rows for ``n = -1 .. N``.
    """
    V = np.empty_like(traj.Vhalf)
    V[0] = traj.half(-1)
    for n in range(0, traj.N + 1):
        V[n + 1] = V[n] + traj.k * (traj.source(n) - op.apply(traj.node(n)))
    return V


def discrete_energy(op, traj):
    """``E^{n+1/2} = |V^{n+1/2}|^2/2 + (A U^n, U^{n+1})/2`` for ``n = 0..N``."""
    V = traj.Vhalf[1:]
    Un = traj.U[1:-1]
    Un1 = traj.U[2:]
    return 0.5 * np.sum(V * V, axis=1) + 0.5 * np.sum(op.apply(Un) * Un1, axis=1)
