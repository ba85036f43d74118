"""State integration, finite-horizon payoff and payoff increments."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .problem import ControlProblem, ProblemError, is_admissible
from .signals import ControlSignal

DEFAULT_STEP = 1e-3
GEOMETRIC_RATIO = 1.25


class IntegrationError(ArithmeticError):
    """A non-finite value appeared while the state was still inside ``X``."""


class InadmissibleControlError(ProblemError):
    pass


@dataclass(frozen=True)
class Violation:
    """Where a trajectory left the open state domain."""

    time: float
    index: int
    coordinate: int
    value: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniform-grid RK4 solution for one control.

    ``running[k]`` is the payoff integral from ``t0`` to ``t[k]``.  If the
    state left the domain the arrays stop at the last valid node and
    :attr:`violation` is set.
    """

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    running: np.ndarray
    h: float
    control: ControlSignal
    violation: Optional[Violation] = None

    @property
    def complete(self) -> bool:
        return self.violation is None

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def T(self) -> float:
        return float(self.t[-1])

    def index_of(self, T: float, atol: Optional[float] = None) -> int:
        """Grid index of horizon ``T``; ``T`` must lie on the grid."""
        k = int(round((T - self.t[0]) / self.h))
        tol = atol if atol is not None else 1e-9 * max(1.0, abs(T))
        if k < 0 or k >= self.t.size or abs(self.t[k] - T) > tol:
            raise ValueError(f"horizon {T!r} is not a node of the trajectory grid")
        return k

    def to_csv(self, path=None) -> str:
        """Columns ``t, x1..xn, u1..um, running_J`` with 12 significant digits."""
        n, m = self.x.shape[1], self.u.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{j + 1}" for j in range(m)] + ["running_J"])
        for k in range(self.t.size):
            row = [self.t[k], *self.x[k], *self.u[k], self.running[k]]
            w.writerow([f"{v:.12g}" for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


@dataclass(frozen=True)
class IncrementCurve:
    """``dJ[k] = J(u_hat, T[k]) - J(u_alt, T[k])``."""

    T: np.ndarray
    dJ: np.ndarray
    label: str = ""


def grid_size(t0: float, T: float, h: float) -> tuple[int, float]:
    """Number of steps and the adjusted step so that the grid ends exactly at ``T``."""
    if not T > t0:
        raise ValueError("horizon must exceed t0")
    if not h > 0:
        raise ValueError("step must be positive")
    N = max(1, int(math.ceil((T - t0) / h - 1e-9)))
    return N, (T - t0) / N


def interval_integrals(values: np.ndarray, h: float) -> np.ndarray:
    """Integral over each grid interval ``[t_k, t_{k+1}]`` along axis 0.

    Each interval gets the mean of the two parabolas through its neighbours
    (``-1, 13, 13, -1`` weights over ``24``), or the one-sided parabola at the
    ends.  The rule is exact for cubics.
    """
    v = np.asarray(values, dtype=float)
    N = v.shape[0] - 1
    if N < 1:
        return np.zeros((0,) + v.shape[1:])
    if N == 1:
        return 0.5 * h * (v[:1] + v[1:])
    d = np.empty((N,) + v.shape[1:])
    d[0] = h / 12 * (5 * v[0] + 8 * v[1] - v[2])
    d[-1] = h / 12 * (-v[-3] + 8 * v[-2] + 5 * v[-1])
    if N > 2:
        d[1:-1] = h / 24 * (-v[:-3] + 13 * v[1:-2] + 13 * v[2:-1] - v[3:])
    return d


def simpson_increments(left: np.ndarray, mid: np.ndarray, right: np.ndarray, h: float) -> np.ndarray:
    """Simpson's rule on each interval from its end and midpoint samples.

    ``left`` holds right-limits at ``t_k`` and ``right`` left-limits at
    ``t_{k+1}``, so a jump sitting on a node costs nothing.
    """
    return h / 6.0 * (np.asarray(left) + 4.0 * np.asarray(mid) + np.asarray(right))


def accumulate(d: np.ndarray) -> np.ndarray:
    """Prefix sums of interval integrals, starting from zero."""
    d = np.asarray(d, dtype=float)
    out = np.zeros((d.shape[0] + 1,) + d.shape[1:])
    np.cumsum(d, axis=0, out=out[1:])
    return out


def accumulate_tail(d: np.ndarray) -> np.ndarray:
    """Suffix sums of interval integrals: ``out[k] = sum(d[k:])``.

    ``out[i] - out[k]`` equals ``prefix[k] - prefix[i]`` up to rounding but
    keeps relative accuracy once the integrand has decayed.
    """
    d = np.asarray(d, dtype=float)
    out = np.zeros((d.shape[0] + 1,) + d.shape[1:])
    np.cumsum(d[::-1], axis=0, out=out[-2::-1])
    return out


def running_integral(values: np.ndarray, h: float) -> np.ndarray:
    """Cumulative integral of node samples along axis 0 starting from zero."""
    return accumulate(interval_integrals(values, h))


def tail_integral(values: np.ndarray, h: float) -> np.ndarray:
    """``int_{t_k}^{t_N}`` of node samples along axis 0."""
    return accumulate_tail(interval_integrals(values, h))


def hermite_midpoints(y: np.ndarray, dy_start: np.ndarray, dy_end: np.ndarray, h: float) -> np.ndarray:
    """Cubic Hermite value at each interval midpoint.

    ``dy_start[k]`` is the derivative at ``t_k`` from the right and
    ``dy_end[k]`` the derivative at ``t_{k+1}`` from the left.
    """
    y = np.asarray(y, dtype=float)
    return 0.5 * (y[:-1] + y[1:]) + h / 8.0 * (np.asarray(dy_start) - np.asarray(dy_end))


def stage_states(p: ControlProblem, traj: "Trajectory"):
    """RK4 stage states and control samples for every step of ``traj``.

    Returns four ``(x, u, t)`` triples, one per stage.
    """
    t, X, h = traj.t, traj.x, traj.h
    u = traj.control
    ua, um, ub = u(t[:-1]), u(t[:-1] + 0.5 * h), u(t[1:], side="left")
    x1 = X[:-1]
    tm = t[:-1] + 0.5 * h
    k1 = p.f_batch(x1, ua, t[:-1])
    x2 = x1 + 0.5 * h * k1
    k2 = p.f_batch(x2, um, tm)
    x3 = x1 + 0.5 * h * k2
    k3 = p.f_batch(x3, um, tm)
    x4 = x1 + h * k3
    return (x1, ua, t[:-1]), (x2, um, tm), (x3, um, tm), (x4, ub, t[1:])


def midpoint_samples(p: ControlProblem, traj: "Trajectory"):
    """Samples for per-interval Simpson sums along ``traj``.

    Returns ``(x_mid, u_mid, t_mid, u_end)``: Hermite midpoint states, the
    control at midpoints and the control's left-limits at ``t_{k+1}``.
    """
    t, X, h = traj.t, traj.x, traj.h
    u = traj.control
    tm = t[:-1] + 0.5 * h
    u_end = u(t[1:], side="left")
    d_start = p.f_batch(X[:-1], traj.u[:-1], t[:-1])
    d_end = p.f_batch(X[1:], u_end, t[1:])
    return hermite_midpoints(X, d_start, d_end, h), u(tm), tm, u_end


def _rk4_step(f, x, t, h, ua, um, ub):
    k1 = f(x, ua, t)
    x2 = [xi + 0.5 * h * ki for xi, ki in zip(x, k1)]
    k2 = f(x2, um, t + 0.5 * h)
    x3 = [xi + 0.5 * h * ki for xi, ki in zip(x, k2)]
    k3 = f(x3, um, t + 0.5 * h)
    x4 = [xi + h * ki for xi, ki in zip(x, k3)]
    k4 = f(x4, ub, t + h)
    new = [xi + h / 6.0 * (a + 2.0 * b + 2.0 * c + d) for xi, a, b, c, d in zip(x, k1, k2, k3, k4)]
    return new, (x2, x3, x4)


def _payoff_increments(p: ControlProblem, X, S, t, h, ua, um, ub) -> np.ndarray:
    """RK4 increments of the payoff quadrature, i.e. the augmented state ``y' = g``."""
    N = S.shape[0]
    tm = t[:N] + 0.5 * h
    with np.errstate(all="ignore"):
        g1 = p.g_batch(X[:N], ua[:N], t[:N])
        g2 = p.g_batch(S[:, 0], um[:N], tm)
        g3 = p.g_batch(S[:, 1], um[:N], tm)
        g4 = p.g_batch(S[:, 2], ub[:N], t[1 : N + 1])
    return h / 6.0 * (g1 + 2.0 * g2 + 2.0 * g3 + g4)


def _control_samples(u: ControlSignal, t: np.ndarray, h: float):
    ua = u(t)
    um = u(t[:-1] + 0.5 * h)
    ub = u(t[1:], side="left")
    return ua, um, ub


def rk4_step(p: ControlProblem, u: ControlSignal, t: float, x, h: float) -> np.ndarray:
    """One classical RK4 step from ``(t, x)``, identical to the integrator's step."""
    f = p.scalar_dynamics()
    ua = u(np.array([t]))[0].tolist()
    um = u(np.array([t + 0.5 * h]))[0].tolist()
    ub = u(np.array([t + h]), side="left")[0].tolist()
    new, _ = _rk4_step(f, [float(v) for v in x], t, h, ua, um, ub)
    return np.array(new)


def integrate_state(p: ControlProblem, u: ControlSignal, T: float, h: float = DEFAULT_STEP) -> Trajectory:
    """Classical RK4 on a uniform grid from ``(t0, x0)`` to ``T``.

    The step is shrunk if needed so that ``T`` is a grid node.  The running
    payoff is integrated as an extra RK4 component ``y' = g``, which is
    Simpson's rule on each step using the stage states.

    If a stage or the new state leaves the open state domain, integration
    stops and the partial trajectory is returned with :attr:`Trajectory.violation`.

    Raises
    ------
    IntegrationError
        If a non-finite value is produced while all stage states are in ``X``.
    """
    if u.dim != p.control_dim:
        raise ValueError(f"control has {u.dim} components, problem expects {p.control_dim}")
    N, h = grid_size(p.t0, T, h)
    t = p.t0 + h * np.arange(N + 1)
    t[-1] = T
    ua, um, ub = _control_samples(u, t, h)
    ua_l, um_l, ub_l = ua.tolist(), um.tolist(), ub.tolist()
    f = p.scalar_dynamics()
    lo, hi = p.state_lower.tolist(), p.state_upper.tolist()
    X = np.empty((N + 1, p.state_dim))
    x = [float(v) for v in p.x0]
    X[0] = x
    S = np.empty((N, 3, p.state_dim))
    violation = None
    last = N
    for k in range(N):
        tk = float(t[k])
        try:
            new, stages = _rk4_step(f, x, tk, h, ua_l[k], um_l[k], ub_l[k])
        except (ValueError, OverflowError, ZeroDivisionError):
            new, stages = [math.nan] * len(x), ()
        ok_new = all(math.isfinite(v) and lo[i] < v < hi[i] for i, v in enumerate(new))
        if ok_new:
            x = new
            X[k + 1] = x
            S[k] = stages
            continue
        outside = [
            (i, v)
            for pt in (*stages, new)
            for i, v in enumerate(pt)
            if math.isfinite(v) and not lo[i] < v < hi[i]
        ]
        if not outside:
            raise IntegrationError(f"non-finite state at t = {tk + h:.12g}")
        i, v = outside[0]
        t_cross = tk + h
        if math.isfinite(new[i]) and not lo[i] < new[i] < hi[i]:
            bound = lo[i] if new[i] <= lo[i] else hi[i]
            frac = (bound - x[i]) / (new[i] - x[i]) if new[i] != x[i] else 1.0
            t_cross = tk + h * min(max(frac, 0.0), 1.0)
            v = new[i]
        violation = Violation(t_cross, k + 1, i, float(v))
        last = k
        break
    t = t[: last + 1]
    X = X[: last + 1]
    U = ua[: last + 1]
    with np.errstate(all="ignore"):
        g = p.g_batch(X, U, t)
    if not np.all(np.isfinite(g)):
        k = int(np.argmax(~np.isfinite(g)))
        raise IntegrationError(f"non-finite payoff at t = {t[k]:.12g}")
    d = _payoff_increments(p, X, S[:last], t, h, ua, um, ub)
    if not np.all(np.isfinite(d)):
        k = int(np.argmax(~np.isfinite(d)))
        raise IntegrationError(f"non-finite payoff on [{t[k]:.12g}, {t[k + 1]:.12g}]")
    running = accumulate(d)
    for arr in (t, X, U, running):
        arr.setflags(write=False)
    return Trajectory(t, X, U, running, h, u, violation)


def finite_horizon_value(traj: Trajectory) -> float:
    """``J(u, x0, t0, T)`` for the trajectory's final time ``T``."""
    if not traj.complete:
        raise ValueError("trajectory did not reach its horizon")
    return float(traj.running[-1])


def snap_horizons(traj: Trajectory, horizons: Iterable[float]) -> tuple[np.ndarray, np.ndarray]:
    """Map horizons to the nearest grid nodes; returns (indices, snapped times).

    Duplicates after snapping are dropped; order is ascending.
    """
    hz = np.asarray(list(horizons), dtype=float)
    if hz.size == 0:
        raise ValueError("empty horizon grid")
    if np.any(hz < traj.t[0] - 1e-12) or np.any(hz > traj.t[-1] + 1e-9 * max(1.0, abs(traj.t[-1]))):
        raise ValueError("horizon grid extends beyond the trajectory")
    idx = np.clip(np.rint((hz - traj.t[0]) / traj.h).astype(int), 0, traj.t.size - 1)
    idx = np.unique(idx)
    return idx, traj.t[idx]


def increment_from_trajectories(hat: Trajectory, alt: Trajectory, horizons, label: str = "") -> IncrementCurve:
    if hat.t.size != alt.t.size or hat.h != alt.h or hat.t[0] != alt.t[0]:
        raise ValueError("trajectories must share a grid")
    idx, T = snap_horizons(hat, horizons)
    dJ = hat.running[idx] - alt.running[idx]
    return IncrementCurve(T, dJ, label or alt.control.label)


def increment_curve(
    p: ControlProblem,
    u_hat: ControlSignal,
    u_alt: ControlSignal,
    horizons: Sequence[float],
    h: float = DEFAULT_STEP,
) -> IncrementCurve:
    """``Delta J(T)`` at each horizon from one integration pass per control.

    Raises
    ------
    InadmissibleControlError
        If either control or its trajectory violates ``U`` or ``X``.
    """
    T_max = float(np.max(horizons))
    trajs = []
    for name, u in (("candidate", u_hat), ("competitor", u_alt)):
        traj = integrate_state(p, u, T_max, h)
        report = is_admissible(p, u, traj)
        if not report:
            raise InadmissibleControlError(f"{name} {u.label or ''} is inadmissible: {report.describe()}")
        trajs.append(traj)
    return increment_from_trajectories(trajs[0], trajs[1], horizons, u_alt.label)


# -- horizon grids -----------------------------------------------------------------


def geometric_horizons(T_min: float, T_max: float, ratio: float = GEOMETRIC_RATIO) -> np.ndarray:
    """``T_min * ratio**k`` up to ``T_max`` (``T_max`` itself is always included)."""
    if not (T_min > 0 and T_max >= T_min and ratio > 1):
        raise ValueError("need 0 < T_min <= T_max and ratio > 1")
    k = int(math.floor(math.log(T_max / T_min) / math.log(ratio) + 1e-12))
    out = T_min * ratio ** np.arange(k + 1)
    if out[-1] < T_max * (1 - 1e-12):
        out = np.append(out, T_max)
    return out


def linear_horizons(start: float, stop: float, count: int) -> np.ndarray:
    return np.linspace(start, stop, int(count))


def merge_horizons(*grids) -> np.ndarray:
    allv = np.concatenate([np.asarray(g, dtype=float).reshape(-1) for g in grids])
    return np.unique(allv)


def parse_horizons(specs: Sequence[str]) -> np.ndarray:
    """Parse ``lin:a:b:count``, ``geo:Tmin:Tmax[:ratio]`` and ``list:T1,T2,...`` specs."""
    grids = []
    for spec in specs:
        tag, _, body = spec.partition(":")
        parts = body.split(":")
        try:
            if tag == "lin" and len(parts) == 3:
                grids.append(linear_horizons(float(parts[0]), float(parts[1]), int(parts[2])))
            elif tag == "geo" and len(parts) in (2, 3):
                ratio = float(parts[2]) if len(parts) == 3 else GEOMETRIC_RATIO
                grids.append(geometric_horizons(float(parts[0]), float(parts[1]), ratio))
            elif tag == "list":
                grids.append(np.array([float(v) for v in body.split(",")]))
            else:
                raise ValueError
        except ValueError:
            raise ValueError(f"bad horizon grid spec {spec!r}") from None
    if not grids:
        raise ValueError("no horizon grid given")
    return merge_horizons(*grids)
