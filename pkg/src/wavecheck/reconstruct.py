"""Piecewise polynomial time functions, staggered interpolants and the
continuous piecewise quadratic reconstructions of a trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation

GRID_TAGS = ("nodes", "half-nodes", "union", "other")


@dataclass(frozen=True, eq=False)
class BreakpointGrid:
    points: np.ndarray
    tag: str = "other"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ContractViolation("a grid needs at least two breakpoints")
        if not np.all(np.diff(pts) > 0):
            raise ContractViolation("breakpoints must be strictly increasing")
        if self.tag not in GRID_TAGS:
            raise ContractViolation(f"unknown grid tag {self.tag!r}")
        object.__setattr__(self, "points", pts)

    @property
    def n_intervals(self):
        return self.points.size - 1

    @property
    def left(self):
        return self.points[:-1]

    @property
    def right(self):
        return self.points[1:]

    @property
    def widths(self):
        return np.diff(self.points)

    def same_as(self, other):
        return self.points.shape == other.points.shape and np.array_equal(self.points, other.points)

    @classmethod
    def nodes(cls, k, n_lo, n_hi):
        """Breakpoints ``t^n = n k`` for ``n_lo <= n <= n_hi``."""
        return cls(k * np.arange(n_lo, n_hi + 1), "nodes")

    @classmethod
    def half_nodes(cls, k, n_lo, n_hi):
        """Breakpoints ``t^{n+1/2}`` for ``n_lo <= n <= n_hi``."""
        return cls((0.5 * k) * (2 * np.arange(n_lo, n_hi + 1) + 1), "half-nodes")

    @classmethod
    def union(cls, k, start, stop):
        """All multiples of ``k/2`` between ``start*k`` and ``stop*k`` (half-integers allowed)."""
        return cls((0.5 * k) * np.arange(round(2 * start), round(2 * stop) + 1), "union")


class PiecewiseStateFunction:
    """State-valued function that is a polynomial of degree <= 2 on each interval.

    On interval ``i`` the value is ``a0 + a1 s + a2 s^2`` with
    ``s = t - points[i]``.  Intervals are half-open on the left,
    ``(t_i, t_{i+1}]``, which is the convention used for the piecewise
    constant residuals; continuous functions do not care.
    """

    def __init__(self, grid, coef, continuous=False):
        coef = np.asarray(coef, dtype=float)
        if coef.ndim == 2:
            coef = coef[:, :, None]
        if coef.ndim != 3 or coef.shape[0] != grid.n_intervals or coef.shape[1] != 3:
            raise ContractViolation(f"coefficient array of shape {coef.shape} does not fit the grid")
        self.grid = grid
        self.coef = coef
        self.continuous = continuous

    @property
    def dim(self):
        return self.coef.shape[2]

    @property
    def points(self):
        return self.grid.points

    @property
    def domain(self):
        return self.points[0], self.points[-1]

    def __repr__(self):
        a, b = self.domain
        return f"PiecewiseStateFunction([{a:g}, {b:g}], {self.grid.n_intervals} pieces, dim={self.dim})"

    # construction ---------------------------------------------------------

    @classmethod
    def linear_interpolant(cls, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape[0] != grid.points.size:
            raise ContractViolation("need one value per breakpoint")
        if values.ndim == 1:
            values = values[:, None]
        slope = np.diff(values, axis=0) / grid.widths[:, None]
        coef = np.stack([values[:-1], slope, np.zeros_like(slope)], axis=1)
        return cls(grid, coef, continuous=True)

    @classmethod
    def constant(cls, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape[0] != grid.n_intervals:
            raise ContractViolation("need one value per interval")
        if values.ndim == 1:
            values = values[:, None]
        zero = np.zeros_like(values)
        return cls(grid, np.stack([values, zero, zero], axis=1), continuous=False)

    # evaluation -----------------------------------------------------------

    def locate(self, t, side="left"):
        """Interval index holding ``t``; ``side="left"`` uses ``(t_i, t_{i+1}]``."""
        t = np.asarray(t, dtype=float)
        lo, hi = self.domain
        span = hi - lo
        if np.any(t < lo - 1e-12 * span) or np.any(t > hi + 1e-12 * span):
            raise ContractViolation(f"time outside [{lo:g}, {hi:g}]")
        idx = np.searchsorted(self.points, t, side=side) - 1
        return np.clip(idx, 0, self.grid.n_intervals - 1)

    def __call__(self, t, side="left"):
        idx = self.locate(t, side)
        s = np.asarray(t, dtype=float) - self.points[idx]
        c = self.coef[idx]
        s = s[..., None]
        return c[..., 0, :] + s * (c[..., 1, :] + s * c[..., 2, :])

    def derivative(self, t, side="left"):
        idx = self.locate(t, side)
        s = np.asarray(t, dtype=float)[..., None] - self.points[idx][..., None]
        c = self.coef[idx]
        return c[..., 1, :] + 2.0 * s * c[..., 2, :]

    def right_end_values(self):
        """Left limit at each interval's right end, shape ``(M, dim)``."""
        w = self.grid.widths[:, None]
        c = self.coef
        return c[:, 0] + w * (c[:, 1] + w * c[:, 2])

    def jumps(self):
        """Jump ``f(t_i+) - f(t_i-)`` at each interior breakpoint, shape ``(M-1, dim)``."""
        return self.coef[1:, 0] - self.right_end_values()[:-1]

    def values_at(self, offsets, rows=None):
        """Evaluate pieces at local offsets ``s``; returns ``(M, Q, dim)``.

        ``rows`` optionally selects a subset of pieces (mask or index array).
        """
        coef = self.coef if rows is None else self.coef[rows]
        s = np.asarray(offsets, dtype=float)
        if s.ndim == 1:
            s = np.broadcast_to(s, (coef.shape[0], s.size))
        s = s[..., None]
        c = coef[:, None]
        return c[..., 0, :] + s * (c[..., 1, :] + s * c[..., 2, :])

    # algebra --------------------------------------------------------------

    def refine(self, grid):
        """Exact re-expansion on a grid whose intervals each lie inside one of ours."""
        lo, hi = self.domain
        span = hi - lo
        if grid.points[0] < lo - 1e-12 * span or grid.points[-1] > hi + 1e-12 * span:
            raise ContractViolation("refinement grid leaves the function's domain")
        mids = 0.5 * (grid.left + grid.right)
        idx = np.clip(np.searchsorted(self.points, mids) - 1, 0, self.grid.n_intervals - 1)
        if np.any(grid.right > self.points[idx + 1] + 1e-12 * span) or np.any(
            grid.left < self.points[idx] - 1e-12 * span
        ):
            raise ContractViolation("refinement grid is not nested in the original")
        d = (grid.left - self.points[idx])[:, None]
        c = self.coef[idx]
        a0 = c[:, 0] + d * (c[:, 1] + d * c[:, 2])
        a1 = c[:, 1] + 2.0 * d * c[:, 2]
        return PiecewiseStateFunction(grid, np.stack([a0, a1, c[:, 2]], axis=1), self.continuous)

    def _check_grid(self, other):
        if not self.grid.same_as(other.grid):
            raise ContractViolation("piecewise functions live on different grids")

    def __add__(self, other):
        self._check_grid(other)
        return PiecewiseStateFunction(self.grid, self.coef + other.coef, self.continuous and other.continuous)

    def __sub__(self, other):
        self._check_grid(other)
        return PiecewiseStateFunction(self.grid, self.coef - other.coef, self.continuous and other.continuous)

    def __neg__(self):
        return PiecewiseStateFunction(self.grid, -self.coef, self.continuous)

    def __mul__(self, s):
        return PiecewiseStateFunction(self.grid, s * self.coef, self.continuous)

    __rmul__ = __mul__

    def map(self, linear):
        """Apply a linear state map (e.g. ``op.apply``) to every coefficient."""
        return PiecewiseStateFunction(self.grid, linear(self.coef), self.continuous)

    def antiderivative(self, starts, reset):
        """Integrate a piecewise linear function piece by piece.

        ``reset[i]`` marks intervals whose starting value is taken from
        ``starts[i]``; all others continue from the end of the previous piece.
        """
        if np.any(np.abs(self.coef[:, 2]) > 0):
            raise ContractViolation("antiderivative only supports piecewise linear integrands")
        M = self.grid.n_intervals
        w = self.grid.widths
        out = np.zeros((M, 3, self.dim))
        out[:, 1] = self.coef[:, 0]
        out[:, 2] = 0.5 * self.coef[:, 1]
        value = None
        for i in range(M):
            if reset[i] or value is None:
                value = starts[i]
            out[i, 0] = value
            value = value + w[i] * (out[i, 1] + w[i] * out[i, 2])
        return PiecewiseStateFunction(self.grid, out, continuous=True)


# staggered interpolants ----------------------------------------------------


def midpoint_values(traj):
    """``U^{n+1/2}`` for ``n = -1..N`` and ``V^n`` for ``n = 0..N``."""
    U_half = 0.5 * (traj.U[1:] + traj.U[:-1])
    V_nodes = 0.5 * (traj.Vhalf[1:] + traj.Vhalf[:-1])
    return U_half, V_nodes


@dataclass
class LinearInterpolants:
    U: PiecewiseStateFunction  # through U^n at nodes, n = -1..N+1
    V: PiecewiseStateFunction  # through V^{n+1/2} at half-nodes, n = -1..N
    U1: PiecewiseStateFunction  # through U^{n+1/2} at half-nodes, n = -1..N
    V1: PiecewiseStateFunction  # through V^n at nodes, n = 0..N


def build_linear_interpolants(traj):
    k, N = traj.k, traj.N
    U_half, V_nodes = midpoint_values(traj)
    nodes = BreakpointGrid.nodes(k, -1, N + 1)
    halves = BreakpointGrid.half_nodes(k, -1, N)
    return LinearInterpolants(
        U=PiecewiseStateFunction.linear_interpolant(nodes, traj.U),
        V=PiecewiseStateFunction.linear_interpolant(halves, traj.Vhalf),
        U1=PiecewiseStateFunction.linear_interpolant(halves, U_half),
        V1=PiecewiseStateFunction.linear_interpolant(BreakpointGrid.nodes(k, 0, N), V_nodes),
    )


def interpolate_constant(which, source):
    """Piecewise constant midpoint interpolation of ``source``.

    ``"I0"`` works on node intervals ``(t^{n-1}, t^n]`` and ``"I0~"`` on
    staggered intervals ``(t^{n-1/2}, t^{n+1/2}]``; in both cases the source
    must already be defined on that grid, and the constant on each interval is
    the source's value at its midpoint.
    """
    wanted = {"I0": "nodes", "I0~": "half-nodes"}
    if which not in wanted:
        raise ContractViolation(f"unknown interpolator {which!r}")
    if source.grid.tag != wanted[which]:
        raise ContractViolation(f"{which} needs a source on {wanted[which]}, got {source.grid.tag}")
    mids = 0.5 * (source.grid.left + source.grid.right)
    return PiecewiseStateFunction.constant(source.grid, source(mids))


def interpolate_f_linear(f_samples, grid):
    """Continuous piecewise linear function through ``(t^n, f^n)`` on ``grid``."""
    return PiecewiseStateFunction.linear_interpolant(grid, f_samples)


def source_interpolant(traj):
    """Nodal interpolant of the source samples over ``[-k, (N+1)k]``."""
    return interpolate_f_linear(traj.f, BreakpointGrid.nodes(traj.k, -1, traj.N + 1))


def reconstruction_source(traj, If=None):
    """Source term used inside the velocity reconstruction.

    It is the nodal interpolant plus, on each staggered interval, the constant
    ``-(f^{n-1} - 2 f^n + f^{n+1})/8`` that makes the interval integral equal
    ``k f^n``, as the mid-point identity requires.  Defined on the union grid
    over ``(t^{-1/2}, t^{N+1/2}]``.
    """
    k, N = traj.k, traj.N
    If = If if If is not None else source_interpolant(traj)
    union = BreakpointGrid.union(k, -0.5, N + 0.5)
    g = If.refine(union)
    if traj.has_source:
        F = traj.f
        corr = -(F[:-2] - 2.0 * F[1:-1] + F[2:]) / 8.0  # n = 0..N
        g = g + PiecewiseStateFunction.constant(union, np.repeat(corr, 2, axis=0))
    return g


def reconstruct_V_hat(op, traj, U1, source, rho_U):
    """``V^(t) = V^{n-1/2} + int_{t^{n-1/2}}^t (-A U1 + source + rho_U)`` on each staggered interval."""
    k, N = traj.k, traj.N
    union = BreakpointGrid.union(k, -0.5, N + 0.5)
    if not source.grid.same_as(union):
        source = source.refine(union)
    integrand = -U1.refine(union).map(op.apply) + source + rho_U.refine(union)
    M = union.n_intervals
    reset = np.zeros(M, dtype=bool)
    reset[0::2] = True
    starts = np.repeat(traj.Vhalf[:-1], 2, axis=0)  # V^{n-1/2}, n = 0..N
    return integrand.antiderivative(starts, reset)


def reconstruct_U_hat(traj, V1, rho_V):
    """``U^(t) = U^{n-1} + int_{t^{n-1}}^t (V1 + rho_V)`` on each node interval of ``[0, T]``."""
    k, N = traj.k, traj.N
    nodes = BreakpointGrid.nodes(k, 0, N)
    integrand = V1.refine(nodes) + rho_V.refine(nodes)
    reset = np.ones(N, dtype=bool)
    return integrand.antiderivative(traj.U[1 : N + 1], reset)


@dataclass
class Reconstruction:
    interp: LinearInterpolants
    If: PiecewiseStateFunction
    source: PiecewiseStateFunction
    U_hat: PiecewiseStateFunction
    V_hat: PiecewiseStateFunction


def build_reconstruction(op, traj, rho):
    """Interpolants plus both reconstructions for a trajectory and its residual set."""
    interp = build_linear_interpolants(traj)
    If = source_interpolant(traj)
    source = reconstruction_source(traj, If)
    V_hat = reconstruct_V_hat(op, traj, interp.U1, source, rho.rho_U)
    U_hat = reconstruct_U_hat(traj, interp.V1, rho.rho_V)
    return Reconstruction(interp, If, source, U_hat, V_hat)
