"""Exact solutions, example presets, true errors and reconstruction energy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .operator import DiagonalOperator, FdLaplacian1d, FdLaplacian2d, SpectralSine, energy_norm
from .reconstruct import BreakpointGrid


@dataclass(frozen=True)
class SineSeriesSolution:
    """``u = sum sin(k pi x) sin(j pi y) (alpha cos(xi pi t) + beta sin(xi pi t))``, ``xi = c sqrt(k^2+j^2)``.

    For one-dimensional operators use ``j = 0``; the term is then
    ``sin(k pi x)`` with ``xi = c k``.
    """

    c: float
    terms: tuple  # (k, j, alpha, beta)

    def __post_init__(self):
        terms = tuple((int(k), int(j), float(a), float(b)) for k, j, a, b in self.terms)
        modes = [(k, j) for k, j, _, _ in terms]
        if len(set(modes)) != len(modes):
            raise ConfigError("solution terms must have distinct modes")
        if any(k < 1 or j < 0 for k, j in modes):
            raise ConfigError("mode indices must be positive")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "c", float(self.c))

    @property
    def modes(self):
        return [(k, j) for k, j, _, _ in self.terms]

    def xi(self, k, j):
        return self.c * math.sqrt(k * k + j * j)

    def initial_state(self, op):
        """``(u(0), u'(0))`` expressed in ``op``'s basis (mode truncation or nodal sampling)."""
        u0, v0 = op.zeros(), op.zeros()
        if isinstance(op, SpectralSine):
            if not math.isclose(op.c, self.c):
                raise ConfigError(f"operator wave speed {op.c} differs from the solution's {self.c}")
            for k, j, a, b in self.terms:
                i = op.mode_index(k, j)
                if i is None:
                    raise ConfigError(f"mode ({k},{j}) is not in the operator's mode list")
                u0[i] += a
                v0[i] += b * self.xi(k, j) * math.pi
        elif isinstance(op, FdLaplacian2d):
            for k, j, a, b in self.terms:
                if not (1 <= k <= op.n_interior and 1 <= j <= op.n_interior):
                    raise ConfigError(f"mode ({k},{j}) is not resolved by {op.n_interior} interior nodes")
                shape = op.sample(lambda x, y: np.sin(k * np.pi * x) * np.sin(j * np.pi * y))
                u0 += a * shape
                v0 += b * self.xi(k, j) * math.pi * shape
        elif isinstance(op, FdLaplacian1d):
            for k, j, a, b in self.terms:
                if j != 0 or not 1 <= k <= op.n_interior:
                    raise ConfigError(f"mode ({k},{j}) does not fit a 1-d grid of {op.n_interior} nodes")
                shape = op.sample(lambda x: np.sin(k * np.pi * x))
                u0 += a * shape
                v0 += b * self.xi(k, j) * math.pi * shape
        else:
            raise ConfigError(f"sine series solutions are not defined for {type(op).__name__}")
        return u0, v0


class SemidiscreteSolution:
    """Exact solution of ``u'' + A u = 0`` with given initial data, via the eigenbasis of ``A``."""

    def __init__(self, op, u0, v0):
        self.op = op
        self.u0 = op.check(u0)
        self.v0 = op.check(v0)
        self._w0 = op.to_modal(self.u0)
        self._w1 = op.to_modal(self.v0)
        self._omega = np.sqrt(op.eigenvalues())

    def __call__(self, t):
        """``(u(t), u'(t))``; ``t`` may be an array, giving stacked states."""
        t = np.asarray(t, dtype=float)[..., None]
        om = self._omega
        c, s = np.cos(om * t), np.sin(om * t)
        u = self._w0 * c + (self._w1 / om) * s
        du = -self._w0 * om * s + self._w1 * c
        return self.op.from_modal(u), self.op.from_modal(du)

    def energy(self, t):
        return 0.5 * energy_norm(self.op, self(t)) ** 2


def reference_solution(sol, op):
    """Exact semidiscrete reference for a sine series on ``op``."""
    u0, v0 = sol.initial_state(op)
    return SemidiscreteSolution(op, u0, v0)


def exact_state(sol, op, t):
    """``(u(t), u'(t))`` in ``op``'s basis.

    For the spectral operator this is the PDE solution itself; for
    finite differences it is the solution of the semidiscrete system, whose
    temporal frequencies are the discrete ones.
    """
    return reference_solution(sol, op)(t)


@dataclass(frozen=True)
class ExamplePreset:
    id: int
    c: float
    terms: tuple
    h_sequence: tuple
    C: float  # k = C h^r
    r: int = 1
    T: float = 1.0
    description: str = ""

    @property
    def solution(self):
        return SineSeriesSolution(self.c, self.terms)

    @property
    def modes(self):
        return [(k, j) for k, j, _, _ in self.terms]


_P = 2  # FEM degree behind the default step constants: k = C0 h^r / (p+1)^2
_H13 = (1 / 2, 1 / 4, 1 / (4 * math.sqrt(2)), 1 / 8, 1 / 10)
_H2 = (1 / (4 * math.sqrt(2)), 1 / 8, 1 / 10, 1 / 12, 1 / 14)

PRESETS = {
    1: ExamplePreset(1, 1.0, ((1, 1, 15.0, 15.0),), _H13, 0.4 / (_P + 1) ** 2, 1, description="smooth, slow"),
    2: ExamplePreset(2, 1.0, ((3, 3, 1.0, 1.0),), _H2, 0.4 / (_P + 1) ** 2, 1, description="higher spatial mode"),
    3: ExamplePreset(3, 5.0, ((1, 1, 15.0, 15.0),), _H13, 0.1 / (_P + 1) ** 2, 1, description="fast in time"),
}


def get_preset(pid):
    try:
        return PRESETS[int(pid)]
    except (KeyError, ValueError, TypeError):
        raise ConfigError(f"unknown preset {pid!r}; choose from {sorted(PRESETS)}") from None


@dataclass
class ErrorProfile:
    sup_eR: float
    sup_eL: float
    sample_times: np.ndarray
    eR: np.ndarray  # |||e_R||| at every sample
    eL: np.ndarray
    node_times: np.ndarray
    eR_nodes: np.ndarray
    eL_nodes: np.ndarray
    eR_running: np.ndarray  # sup over samples up to each node
    eL_running: np.ndarray = field(default=None)


def sample_times(k, N, per_half_step=4):
    """Union-grid breakpoints over ``[0, T]`` plus equispaced interior points in each half step."""
    union = BreakpointGrid.union(k, 0, N).points
    frac = np.arange(per_half_step + 1) / (per_half_step + 1)
    inner = (union[:-1, None] + (0.5 * k) * frac[None, :]).ravel()
    return np.append(inner, union[-1])


def errors_sup(op, traj, recon, reference, samples_per_half_step=4):
    """Sup over sample times of ``|||(u - U^, u' - V^)|||`` and ``|||(u - U, u' - V)|||``.

    ``reference`` is a callable ``t -> (u, u')``.
    """
    k, N = traj.k, traj.N
    ts = sample_times(k, N, samples_per_half_step)
    u, du = reference(ts)
    eR = energy_norm(op, (u - recon.U_hat(ts), du - recon.V_hat(ts)))
    eL = energy_norm(op, (u - recon.interp.U(ts), du - recon.interp.V(ts)))
    node_idx = np.arange(0, ts.size, 2 * (samples_per_half_step + 1))
    return ErrorProfile(
        sup_eR=float(np.max(eR)),
        sup_eL=float(np.max(eL)),
        sample_times=ts,
        eR=eR,
        eL=eL,
        node_times=ts[node_idx],
        eR_nodes=eR[node_idx],
        eL_nodes=eL[node_idx],
        eR_running=np.maximum.accumulate(eR)[node_idx],
        eL_running=np.maximum.accumulate(eL)[node_idx],
    )


def reconstruction_energy(op, U_hat, V_hat, t):
    """``|||(U^(t), V^(t))|||^2 / 2``."""
    return 0.5 * energy_norm(op, (U_hat(t), V_hat(t))) ** 2


def scalar_operator(lam=1.0):
    """One-dimensional model ``A = [lam]`` used for hand-checkable runs."""
    return DiagonalOperator((float(lam),))
