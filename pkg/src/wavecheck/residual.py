"""Piecewise constant scheme perturbations, estimator residuals and eta_1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .operator import energy_norm
from .reconstruct import BreakpointGrid, PiecewiseStateFunction, build_reconstruction

DEFAULT_QUAD_POINTS = 3
QUAD_RTOL = 1e-13
MAX_QUAD_LEVELS = 40
_CHUNK = 1 << 21  # floats per vector-path evaluation block
_NOISE = 64 * np.finfo(float).eps


@dataclass
class ResidualSet:
    rho_U: PiecewiseStateFunction  # constant on (t^{n-1/2}, t^{n+1/2}], n = 0..N
    rho_V: PiecewiseStateFunction  # constant on (t^n, t^{n+1}], n = 0..N-1
    formulation: str
    f_tilde: np.ndarray  # q1 f^{n+1} - 2 p1 f^n + q1 f^{n-1}, n = 0..N

    def max_norms(self, op):
        """Largest ``|rho_U|`` and ``|A^{1/2} rho_V|`` over all intervals."""
        ru = self.rho_U.coef[:, 0]
        rv = self.rho_V.coef[:, 0]
        zu, zv = np.zeros_like(ru), np.zeros_like(rv)
        return float(np.max(energy_norm(op, (zu, ru)))), float(np.max(energy_norm(op, (rv, zv))))


def _require_extra_step(traj):
    if traj.U.shape[0] != traj.N + 3 or traj.Vhalf.shape[0] != traj.N + 2:
        raise ContractViolation("residuals need U^{N+1} and V^{N+1/2}: advance one step past T first")


def _second_differences(traj):
    U = traj.U
    d2U = U[2:] - 2.0 * U[1:-1] + U[:-2]  # n = 0..N
    V = traj.Vhalf
    d2V = V[2:] - 2.0 * V[1:-1] + V[:-2]  # centred at n+1/2, n = 0..N-1
    F = traj.f
    d2f = F[2:] - 2.0 * F[1:-1] + F[:-2]
    return d2U, d2V, d2f


def _pack(traj, RU, RV, tag, q1):
    k, N = traj.k, traj.N
    F = traj.f
    p1 = q1 - 0.5
    f_tilde = q1 * F[2:] - 2.0 * p1 * F[1:-1] + q1 * F[:-2]
    return ResidualSet(
        rho_U=PiecewiseStateFunction.constant(BreakpointGrid.half_nodes(k, -1, N), RU),
        rho_V=PiecewiseStateFunction.constant(BreakpointGrid.nodes(k, 0, N), RV),
        formulation=tag,
        f_tilde=f_tilde,
    )


def rho_leapfrog(op, traj):
    """``R_U^n = A(U^{n+1} - 2U^n + U^{n-1})/4`` and ``R_V^{n+1/2} = -(V^{n+3/2} - 2V^{n+1/2} + V^{n-1/2})/4``."""
    _require_extra_step(traj)
    d2U, d2V, _ = _second_differences(traj)
    return _pack(traj, 0.25 * op.apply(d2U), -0.25 * d2V, "leapfrog", 0.0)


def _check_q1(traj, q1):
    if q1 is None:
        return traj.scheme.q1
    if q1 != traj.scheme.q1:
        raise ContractViolation(f"q1={q1} does not match the trajectory's q1={traj.scheme.q1}")
    return q1


def rho_cosine1(op, traj, q1=None):
    """Residuals of the cosine family with plain difference-quotient velocities.

    For ``n >= 1``: ``R_U^n = (1-4 q1)/4 A d2U^n + q1 d2f^n``.  The first
    staggered interval is governed by the leap-frog start step, whose
    perturbation is ``A d2U^0 / 4`` for every family member.
    """
    _require_extra_step(traj)
    if traj.scheme.formulation != 1:
        raise ContractViolation("trajectory was built with formulation 2 velocities")
    q1 = _check_q1(traj, q1)
    d2U, d2V, d2f = _second_differences(traj)
    RU = (1.0 - 4.0 * q1) / 4.0 * op.apply(d2U) + q1 * d2f
    RU[0] = 0.25 * op.apply(d2U[0])
    return _pack(traj, RU, -0.25 * d2V, "cosine1", q1)


def rho_cosine2(op, traj, q1=None):
    """Residuals when velocities are ``(I + k^2 q1 A)`` times the difference quotient.

    For ``n >= 1``: ``R_U^n = A d2U^n/4 + q1 d2f^n``; the start step gives
    ``(1/4 + q1) A d2U^0``.  ``R_V^{n+1/2} = -k^2 q1 A dU^{n+1} - d2V/4``.
    """
    _require_extra_step(traj)
    q1 = _check_q1(traj, q1)
    if traj.scheme.formulation != 2 and q1 != 0:
        raise ContractViolation("trajectory was built with formulation 1 velocities")
    k, N = traj.k, traj.N
    d2U, d2V, d2f = _second_differences(traj)
    RU = 0.25 * op.apply(d2U) + q1 * d2f
    RU[0] = (0.25 + q1) * op.apply(d2U[0])
    dU = (traj.U[2 : N + 2] - traj.U[1 : N + 1]) / k  # dU^{n+1}, n = 0..N-1
    RV = -k * k * q1 * op.apply(dU) - 0.25 * d2V
    return _pack(traj, RU, RV, "cosine2", q1)


def residuals_for(op, traj):
    """Dispatch on the trajectory's formulation."""
    tag = traj.formulation_tag
    if tag == "leapfrog":
        return rho_leapfrog(op, traj)
    if tag == "cosine1":
        return rho_cosine1(op, traj)
    return rho_cosine2(op, traj)


@dataclass
class EstimatorResiduals:
    R1: PiecewiseStateFunction  # on the union grid over [0, T]
    R2: PiecewiseStateFunction
    Rf: object  # callable t -> state, or None when f is identically zero


def residual_functions(op, traj, recon, rho, f=None):
    """``R1 = -A(U^ - U1) - rho_U``, ``R2 = V^ - V1 - rho_V``, ``Rf = f - source``.

    ``source`` is the term actually integrated inside ``V^`` (see
    :func:`wavecheck.reconstruct.reconstruction_source`).
    """
    union = BreakpointGrid.union(traj.k, 0, traj.N)
    U_hat = recon.U_hat.refine(union)
    R1 = -(U_hat - recon.interp.U1.refine(union)).map(op.apply) - rho.rho_U.refine(union)
    R2 = recon.V_hat.refine(union) - recon.interp.V1.refine(union) - rho.rho_V.refine(union)
    Rf = SourceRemainder(op, f, recon.source) if f is not None else None
    return EstimatorResiduals(R1, R2, Rf)


class SourceRemainder:
    """``R_f(t) = f(t) - source(t)`` for a callable source ``f``."""

    def __init__(self, op, f, source):
        self.op, self.f, self.source = op, f, source

    def parts(self, t):
        t = np.asarray(t, dtype=float)
        vals = np.array([self.op.check(self.f(s)) for s in t.ravel()]).reshape(t.shape + (self.op.dim,))
        return vals, self.source(t)

    def __call__(self, t):
        fv, sv = self.parts(t)
        return fv - sv


@dataclass
class Eta1:
    value: float
    e_R0: float
    integral: float
    t_left: np.ndarray
    t_right: np.ndarray
    contributions: np.ndarray  # integral of |||(R2, R1+Rf)||| per union interval
    node_times: np.ndarray
    cumulative: np.ndarray  # eta_1 with the integral stopped at each node

    def breakdown_rows(self):
        return [
            (i, float(a), float(b), float(c))
            for i, (a, b, c) in enumerate(zip(self.t_left, self.t_right, self.contributions))
        ]


def _combine(e0, integral):
    return np.sqrt(2.0 * e0**2 + 4.0 * integral**2)


def _panel_integrals(op, R1, R2, Rf, rows, a, b, x, w):
    """Gauss rule ``(x, w)`` on panels ``[a, b]`` lying in union intervals ``rows``.

    Returns the panel values and a bound on their round-off, which is driven
    by the size of ``f`` and its interpolant before they cancel in ``R_f``.
    """
    half = 0.5 * (b - a)
    out, noise = np.empty(rows.size), np.empty(rows.size)
    step = max(1, _CHUNK // max(1, x.size * R1.dim))
    for lo in range(0, rows.size, step):
        sl = slice(lo, lo + step)
        t = a[sl, None] + half[sl, None] * (x[None, :] + 1.0)
        offsets = t - R1.grid.left[rows[sl]][:, None]
        r1 = R1.values_at(offsets, rows[sl])
        r2 = R2.values_at(offsets, rows[sl])
        fv, sv = Rf.parts(t)
        out[sl] = half[sl] * (energy_norm(op, (r2, r1 + fv - sv)) @ w)
        mag = np.linalg.norm(fv, axis=-1) + np.linalg.norm(sv, axis=-1)
        noise[sl] = half[sl] * (_NOISE * mag @ w)
    return out, noise


def _norm_factor(op, R1, R2):
    """Triangular ``F_m`` with ``|||(R2, R1)(s)||| = |F_m (1, s, s^2)|`` on interval ``m``.

    ``F_m`` is the R factor of the stacked coefficient matrix
    ``[A^{1/2} c2_i ; c1_i]`` (the square root is applied in the eigenbasis),
    so no squared quantities are formed and zeros of the residual stay sharp.
    """
    root = np.sqrt(op.eigenvalues())
    stacked = np.concatenate([root * op.to_modal(R2.coef), R1.coef], axis=-1)
    return np.linalg.qr(np.swapaxes(stacked, 1, 2), mode="r")


def _panel_integrals_factor(factor, origin, rows, a, b, x, w):
    half = 0.5 * (b - a)
    s = a[:, None] + half[:, None] * (x[None, :] + 1.0) - origin[rows][:, None]
    powers = np.stack([np.ones_like(s), s, s * s], axis=-1)  # (P, Q, 3)
    F = factor[rows]
    vals = np.einsum("pij,pqj->pqi", F, powers)
    mag = np.einsum("pij,pqj->pqi", np.abs(F), np.abs(powers))
    return half * (np.linalg.norm(vals, axis=-1) @ w), half * (_NOISE * np.linalg.norm(mag, axis=-1) @ w)


def integrate_residual_norm(op, R1, R2, Rf, left, right, quad_points=DEFAULT_QUAD_POINTS, rtol=QUAD_RTOL):
    """Integral of ``|||(R2, R1 + Rf)|||`` over each interval ``[left_i, right_i]``.

    The integrand is the square root of a polynomial and has near-kinks where
    both residuals almost vanish (``R1`` is zero at nodes, ``R2`` at
    half-nodes).  Each interval is therefore split adaptively until the
    ``quad_points`` and ``2*quad_points`` Gauss-Legendre values agree to
    ``rtol`` relative to the total; the accepted panel value is the finer one.

    Without a source remainder each interval's residual pair is reduced to
    a 3x3 triangular factor first, so refinement costs nothing per state
    entry.  ``left``/``right`` must be prefixes of ``R1``'s grid
    intervals (possibly truncated on the right).
    """
    x1, w1 = np.polynomial.legendre.leggauss(quad_points)
    x2, w2 = np.polynomial.legendre.leggauss(2 * quad_points)
    M = left.size
    if Rf is None:
        factor = _norm_factor(op, R1, R2)
        origin = R1.grid.left

        def panel(rows, a, b, x, w):
            return _panel_integrals_factor(factor, origin, rows, a, b, x, w)
    else:

        def panel(rows, a, b, x, w):
            return _panel_integrals(op, R1, R2, Rf, rows, a, b, x, w)

    rows = np.arange(M)
    a, b = left.astype(float), right.astype(float)
    coarse, _ = panel(rows, a, b, x1, w1)
    fine, noise = panel(rows, a, b, x2, w2)
    scale = max(float(np.sum(np.abs(fine))), np.finfo(float).tiny)
    span = float(np.sum(b - a)) or 1.0
    done_rows, done_a, done_val = [], [], []
    for _ in range(MAX_QUAD_LEVELS):
        # accept once the two rules agree, or once they differ only by round-off
        ok = np.abs(fine - coarse) <= np.maximum(rtol * scale * (b - a) / span, noise)
        done_rows.append(rows[ok])
        done_a.append(a[ok])
        done_val.append(fine[ok])
        if ok.all():
            break
        rows, a, b = rows[~ok], a[~ok], b[~ok]
        m = 0.5 * (a + b)
        rows = np.concatenate([rows, rows])
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
        coarse, _ = panel(rows, a, b, x1, w1)
        fine, noise = panel(rows, a, b, x2, w2)
    else:
        done_rows.append(rows)
        done_a.append(a)
        done_val.append(fine)
    rows = np.concatenate(done_rows)
    a = np.concatenate(done_a)
    val = np.concatenate(done_val)
    # fixed left-to-right summation order, independent of refinement history
    order = np.lexsort((a, rows))
    out = np.zeros(M)
    for r, v in zip(rows[order], val[order]):
        out[r] += v
    return out


def eta1(op, R1, R2, Rf, e_R0, up_to=None, quad_points=DEFAULT_QUAD_POINTS):
    """``eta_1 = (2 |||e_R(0)|||^2 + 4 (int_0^t |||(R2, R1 + Rf)||| dt)^2)^{1/2}``.

    ``e_R0`` is the initial error pair.  The time integral is accumulated over
    the union-grid intervals left to right (see
    :func:`integrate_residual_norm`).  Returns an :class:`Eta1` with
    per-interval contributions and the cumulative value at every node.
    """
    if not R1.grid.same_as(R2.grid):
        raise ContractViolation("R1 and R2 must share a grid")
    grid = R1.grid
    e0 = float(energy_norm(op, e_R0))
    left, right = grid.left.copy(), grid.right.copy()
    if up_to is not None:
        if not (grid.points[0] < up_to <= grid.points[-1] * (1 + 1e-14)):
            raise ContractViolation("up_to must lie in (0, T]")
        keep = left < up_to
        left, right = left[keep], np.minimum(right[keep], up_to)
    contrib = integrate_residual_norm(op, R1, R2, Rf, left, right, quad_points)

    # cumulative at nodes: every second union point is a node
    cum = np.concatenate([[0.0], np.cumsum(contrib)])
    node_idx = np.arange(0, cum.size, 2)
    integral = float(cum[-1])
    return Eta1(
        value=float(_combine(e0, integral)),
        e_R0=e0,
        integral=integral,
        t_left=left,
        t_right=right,
        contributions=contrib,
        node_times=np.append(left, right[-1])[node_idx],
        cumulative=_combine(e0, cum[node_idx]),
    )


@dataclass
class Estimate:
    rho: ResidualSet
    recon: object
    residuals: EstimatorResiduals
    e_R0: tuple
    eta: Eta1

    @property
    def value(self):
        return self.eta.value


def initial_error(op, traj, recon):
    """``e_R(0) = (u0 - U^(0), v0 - V^(0))`` from the closed-form reconstructions."""
    eU = traj.u0 - recon.U_hat(0.0)
    eV = traj.v0 - recon.V_hat(0.0)
    return eU, eV


def estimate(op, traj, f=None, quad_points=DEFAULT_QUAD_POINTS):
    """Full pipeline: residual set, reconstructions, residual functions and eta_1.

    ``f`` must be the source callable the trajectory was built with (it
    enters through ``R_f``); leave it ``None`` for source-free runs.
    """
    if traj.has_source and f is None:
        raise ContractViolation("trajectory has a source; pass the same callable as f")
    rho = residuals_for(op, traj)
    recon = build_reconstruction(op, traj, rho)
    res = residual_functions(op, traj, recon, rho, f)
    e0 = initial_error(op, traj, recon)
    eta = eta1(op, res.R1, res.R2, res.Rf, e0, quad_points=quad_points)
    return Estimate(rho, recon, res, e0, eta)
