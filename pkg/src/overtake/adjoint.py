"""Fundamental matrix of the variational system and the Cauchy adjoint field.

Convention: ``W(t)`` solves ``W' = A(t) W`` with ``W(t0) = I`` where
``A = df/dx`` along the candidate, so that the state-transition matrix is
``Phi(s, t) = W(s) W(t)^{-1}``.  The adjoint field

    J_x(t, T) = W(t)^{-T} int_t^T W(s)^T g_x(s) ds

solves ``-psi' = g_x + A^T psi`` with ``psi(T) = 0``.  It is evaluated from
one cumulative integral ``I_g`` and one cached LU factorization per node.
``I_g`` is integrated as an extra component of the variational RK4 pass,
so its quadrature uses the same stage states and control samples.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import simpson

from .integrate import (
    Trajectory,
    accumulate,
    accumulate_tail,
    hermite_midpoints,
    snap_horizons,
    stage_states,
)
from .linalg import BatchedLU, SingularMatrixError
from .problem import ControlProblem, ProblemError

COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class FundamentalMatrix:
    """``W`` on the trajectory grid plus LU factors of ``W^T`` at each node."""

    t: np.ndarray
    W: np.ndarray
    lu_T: BatchedLU
    cond: np.ndarray
    A: np.ndarray
    h: float
    gx_steps: np.ndarray
    A_end: np.ndarray
    gx: np.ndarray
    gx_end: np.ndarray

    def transition(self, s_index, t_index) -> np.ndarray:
        """``Phi(s, t) = W(s) W(t)^{-1}`` for grid indices (broadcastable arrays)."""
        scalar = np.ndim(s_index) == 0 and np.ndim(t_index) == 0
        s_index, t_index = np.broadcast_arrays(np.atleast_1d(s_index), np.atleast_1d(t_index))
        # W(t)^{-T} W(s)^T = Phi^T
        rhs = np.swapaxes(self.W[s_index], -1, -2)
        phi = np.swapaxes(self.lu_T.solve(rhs, t_index), -1, -2)
        return phi[0] if scalar else phi

    def index(self, time: float) -> int:
        k = int(round((time - self.t[0]) / self.h))
        if k < 0 or k >= self.t.size or abs(self.t[k] - time) > 1e-9 * max(1.0, abs(time)):
            raise ValueError(f"time {time!r} is not a grid node")
        return k

    def residual(self) -> float:
        """Max over interior nodes of ``|(W[k+1]-W[k-1])/2h - A[k] W[k]|``."""
        if self.t.size < 3:
            return 0.0
        dW = (self.W[2:] - self.W[:-2]) / (2 * self.h)
        return float(np.max(np.abs(dW - self.A[1:-1] @ self.W[1:-1])))


def fundamental_matrix(p: ControlProblem, candidate: Trajectory, cond_limit: float = COND_LIMIT) -> FundamentalMatrix:
    """Integrate ``W' = (df/dx) W`` by RK4 along the candidate.

    The Jacobian is evaluated at the same RK4 stage states the state
    integrator used, so the augmented system is integrated consistently.
    The same pass yields the per-step weights :attr:`FundamentalMatrix.gx_steps`
    with ``int_{t_k}^{t_{k+1}} W^T g_x = W(t_k)^T gx_steps[k]``.

    Raises
    ------
    SingularMatrixError
        If ``cond(W(t))`` exceeds ``cond_limit`` at some node.
    """
    if not candidate.complete:
        raise ValueError("candidate trajectory did not reach its horizon")
    n, h = p.state_dim, candidate.h
    N = candidate.t.size - 1
    I = np.eye(n)
    M = np.empty((0, n, n))
    gx_steps = np.empty((0, n))
    if N > 0:
        stages = stage_states(p, candidate)
        A1, A2, A3, A4 = (p.f_x_batch(*s) for s in stages)
        g1, g2, g3, g4 = (p.g_x_batch(*s) for s in stages)
        P2 = I + 0.5 * h * A1
        B2 = A2 @ P2
        P3 = I + 0.5 * h * B2
        B3 = A3 @ P3
        P4 = I + h * B3
        B4 = A4 @ P4
        M = I + (h / 6.0) * (A1 + 2 * B2 + 2 * B3 + B4)
        if not np.all(np.isfinite(M)):
            raise ProblemError("non-finite Jacobian along the candidate trajectory")
        tr = lambda P, g: np.einsum("kji,kj->ki", P, g)  # noqa: E731
        gx_steps = (h / 6.0) * (g1 + 2 * tr(P2, g2) + 2 * tr(P3, g3) + tr(P4, g4))
        if not np.all(np.isfinite(gx_steps)):
            raise ProblemError("non-finite dg/dx along the candidate trajectory")
    W = np.empty((N + 1, n, n))
    W[0] = I
    for k in range(N):
        W[k + 1] = M[k] @ W[k]
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(W)
    bad = ~np.isfinite(cond) | (cond > cond_limit)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise SingularMatrixError(
            f"fundamental matrix is numerically singular at t = {candidate.t[k]:.12g} (cond = {cond[k]:.3g})"
        )
    x, t = candidate.x, candidate.t
    A = p.f_x_batch(x, candidate.u, t)
    gx = p.g_x_batch(x, candidate.u, t)
    u_end = candidate.control(t[1:], side="left")
    A_end = p.f_x_batch(x[1:], u_end, t[1:])
    gx_end = p.g_x_batch(x[1:], u_end, t[1:])
    for arr in (W, cond, A, gx_steps, A_end, gx, gx_end):
        arr.setflags(write=False)
    return FundamentalMatrix(t, W, BatchedLU(np.swapaxes(W, 1, 2)), cond, A, h, gx_steps, A_end, gx, gx_end)


@dataclass(frozen=True, eq=False)
class CauchyAdjointField:
    """``J_x(t, T)`` for ``t`` on the trajectory grid and ``T`` in :attr:`T`.

    Values are produced on demand from the cumulative integral :attr:`Ig`;
    nothing is re-integrated per horizon.  :attr:`Rg` holds the same
    integral accumulated from the end of the grid; for each entry the
    difference is taken from whichever of the two has smaller magnitude,
    which avoids cancellation once a discounted integrand has decayed.
    """

    t: np.ndarray
    T: np.ndarray
    T_index: np.ndarray
    Ig: np.ndarray
    Rg: np.ndarray
    fm: FundamentalMatrix
    h: float

    def _gap(self, i, k: int) -> np.ndarray:
        fwd = self.Ig[k] - self.Ig[i]
        rev = self.Rg[i] - self.Rg[k]
        use_rev = np.abs(self.Rg[i]) + np.abs(self.Rg[k]) < np.abs(self.Ig[i]) + np.abs(self.Ig[k])
        return np.where(use_rev, rev, fwd)

    def values_at_index(self, k: int) -> np.ndarray:
        """``J_x(t_i, t_k)`` for ``i = 0..k``, shape ``(k+1, n)``."""
        return self.fm.lu_T.solve(self._gap(slice(0, k + 1), k), slice(0, k + 1))

    def values_at(self, T: float) -> np.ndarray:
        return self.values_at_index(self.fm.index(T))

    def midpoint_values(self, k: int, J: Optional[np.ndarray] = None) -> np.ndarray:
        """``J_x`` at the midpoints of the first ``k`` intervals for horizon ``t_k``.

        Cubic Hermite interpolation using the adjoint equation for the
        one-sided slopes.  ``J`` may pass in :meth:`values_at_index` output.
        """
        if J is None:
            J = self.values_at_index(k)
        fm = self.fm
        d_start = -(fm.gx[:k] + np.einsum("kji,kj->ki", fm.A[:k], J[:-1]))
        d_end = -(fm.gx_end[:k] + np.einsum("kji,kj->ki", fm.A_end[:k], J[1:]))
        return hermite_midpoints(J, d_start, d_end, self.h)

    def __call__(self, t: float, T: float) -> np.ndarray:
        i, k = self.fm.index(t), self.fm.index(T)
        if i > k:
            raise ValueError("J_x(t, T) is defined for t <= T")
        rhs = self._gap(i, k)[None, :]
        return self.fm.lu_T.solve(rhs, slice(i, i + 1))[0]

    def table(self, t_values: Optional[Sequence[float]] = None) -> list:
        """Rows ``(t, T, Jx_1..Jx_n)`` for ``t <= T`` over the horizon grid.

        By default ``t`` runs over ``t0`` and the horizon grid itself.
        """
        if t_values is None:
            t_values = np.concatenate([[self.t[0]], self.T])
        t_idx = np.unique([self.fm.index(float(v)) for v in t_values])
        rows = []
        for k, T in zip(self.T_index, self.T):
            sel = t_idx[t_idx <= k]
            J = self.values_at_index(int(k))[sel]
            rows += [(float(self.t[i]), float(T), *J[j]) for j, i in enumerate(sel)]
        return rows

    def to_csv(self, path=None, t_values=None) -> str:
        n = self.Ig.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "T"] + [f"Jx_{i + 1}" for i in range(n)])
        for row in self.table(t_values):
            w.writerow([f"{v:.12g}" for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def cauchy_field(
    p: ControlProblem, candidate: Trajectory, Y: FundamentalMatrix, T_grid: Optional[Sequence[float]] = None
) -> CauchyAdjointField:
    """Build ``J_x`` from one cumulative quadrature of ``W(s)^T g_x(s)``.

    ``p`` is kept for signature symmetry; the integrand comes from ``Y``.

    ``T_grid`` values are snapped to grid nodes; by default the final node.
    """
    if Y.t.size != candidate.t.size:
        raise ValueError("fundamental matrix and candidate use different grids")
    if not np.all(np.isfinite(Y.gx)):
        raise ProblemError("non-finite dg/dx along the candidate trajectory")
    d = np.einsum("kji,kj->ki", Y.W[:-1], Y.gx_steps)
    Ig = accumulate(d)
    Rg = accumulate_tail(d)
    if T_grid is None:
        T_grid = [candidate.T]
    idx, T = snap_horizons(candidate, T_grid)
    for arr in (Ig, Rg, idx, T):
        arr.setflags(write=False)
    return CauchyAdjointField(candidate.t, T, idx, Ig, Rg, Y, candidate.h)


def adjoint_residual(p: ControlProblem, candidate: Trajectory, field: CauchyAdjointField, T: float) -> float:
    """``max_t |dJ_x/dt + dH/dx(x_hat, u_hat, t, J_x(t,T), 1)|`` with centered differences.

    Interior nodes only; the maximum is over components too.
    """
    k = field.fm.index(T)
    if k < 2:
        return 0.0
    J = field.values_at_index(k)
    h = field.h
    dJ = (J[2:] - J[:-2]) / (2 * h)
    sl = slice(1, k)
    gx = p.g_x_batch(candidate.x[sl], candidate.u[sl], candidate.t[sl])
    dHdx = gx + np.einsum("kji,kj->ki", field.fm.A[sl], J[1:-1])
    return float(np.max(np.abs(dJ + dHdx)))


@dataclass(frozen=True)
class QCurve:
    """Marginal q recovered from ``J_x`` and its independent quadrature check.

    ``q_field(t) = e^{rt} J_x(t, T_max)`` is the truncated q with
    ``q(T_max) = 0``; ``q_quad`` integrates ``e^{-(delta+r)(s-t)} f'(x(s))``
    over ``[t, T_max]`` directly from trajectory samples.
    """

    t: np.ndarray
    q_field: np.ndarray
    q_quad: np.ndarray
    T_max: float
    max_discrepancy: float
    identity_error: float


def _check_tobin_structure(p: ControlProblem, candidate: Trajectory, delta: float):
    if p.state_dim != 1 or p.control_dim != 1:
        raise ProblemError("q decomposition needs the scalar investment problem")
    fx = p.f_x_batch(candidate.x, candidate.u, candidate.t)[:, 0, 0]
    fu = p.f_u_batch(candidate.x, candidate.u, candidate.t)[:, 0, 0]
    if np.max(np.abs(fx + delta)) > 1e-12 * max(1.0, delta) or np.max(np.abs(fu - 1.0)) > 1e-12:
        raise ProblemError("problem is not of the form x' = u - delta*x")


def tobin_q_decomposition(
    p: ControlProblem,
    candidate: Trajectory,
    field: CauchyAdjointField,
    r: float,
    delta: float,
    samples: int = 201,
) -> QCurve:
    """Recover marginal q from the adjoint field and cross-check it by quadrature.

    The payoff gradient is assumed to be ``e^{-rt} f'(x)``, so ``f'(x(s))`` is
    recovered as ``e^{rs} dg/dx``.  The identity
    ``J_x(t,T) = e^{-rt} q(t) - e^{-delta(T-t)} e^{-rT} q(T)`` is checked on
    every horizon of the field.
    """
    _check_tobin_structure(p, candidate, delta)
    K = int(field.T_index[-1])
    T_max = float(field.T[-1])
    t_all = candidate.t[: K + 1]
    J = field.values_at_index(K)[:, 0]
    q_field_all = np.exp(r * t_all) * J

    fprime = np.exp(r * t_all) * p.g_x_batch(candidate.x[: K + 1], candidate.u[: K + 1], t_all)[:, 0]
    pick = np.unique(np.linspace(0, K, min(samples, K + 1)).round().astype(int))
    q_quad = np.empty(pick.size)
    for j, i in enumerate(pick):
        s = t_all[i:]
        if s.size < 2:
            q_quad[j] = 0.0
            continue
        q_quad[j] = simpson(np.exp(-(delta + r) * (s - s[0])) * fprime[i:], x=s)
    disc = float(np.max(np.abs(q_quad - q_field_all[pick])))

    ident = 0.0
    for k, T in zip(field.T_index, field.T):
        Jk = field.values_at_index(int(k))[:, 0]
        tt = t_all[: k + 1]
        pred = np.exp(-r * tt) * q_field_all[: k + 1] - np.exp(-delta * (T - tt)) * np.exp(-r * T) * q_field_all[k]
        ident = max(ident, float(np.max(np.abs(Jk - pred))))
    return QCurve(t_all[pick], q_field_all[pick], q_quad, T_max, disc, ident)


__all__ = [
    "FundamentalMatrix",
    "CauchyAdjointField",
    "QCurve",
    "SingularMatrixError",
    "fundamental_matrix",
    "cauchy_field",
    "adjoint_residual",
    "tobin_q_decomposition",
]
