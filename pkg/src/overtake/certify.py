"""Condition integrals over growing horizons, tail verdicts and concavity probing.

Every condition produces a curve ``K(T)`` on a horizon grid.  The
asymptotic ``liminf``/``limsup`` are estimated by the minimum and maximum of
``K`` over the trailing part of the grid (the *tail window*):

* tail-min >= -eps          -> OO-condition-satisfied (``marginal`` if below +eps)
* else tail-max >= -eps     -> WOO-condition-satisfied
* else                      -> violated

Verdicts are statements about the tested competitors only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .adjoint import CauchyAdjointField, cauchy_field, fundamental_matrix
from .integrate import (
    InadmissibleControlError,
    Trajectory,
    increment_from_trajectories,
    integrate_state,
    midpoint_samples,
    simpson_increments,
    snap_horizons,
)
from .problem import ControlProblem, ProblemError, is_admissible
from .signals import ControlSignal

DEFAULT_TAIL_FRACTION = 0.5
EPS_SCALE = 1e-6
PROBE_RTOL = 1e-6


class Variant(str, Enum):
    GRAD_U = "grad_u"
    PSI_GAP = "psi_gap"
    HAM_DIFF = "ham_diff"
    CLASSIC = "classic"


class Verdict(str, Enum):
    OO = "OO-condition-satisfied"
    WOO = "WOO-condition-satisfied"
    VIOLATED = "violated"
    INCONCLUSIVE = "inconclusive"


_RANK = {Verdict.OO: 3, Verdict.WOO: 2, Verdict.INCONCLUSIVE: 1, Verdict.VIOLATED: 0}


class MissingAdjointError(ValueError):
    pass


def default_eps(K) -> float:
    K = np.asarray(K, dtype=float)
    finite = K[np.isfinite(K)]
    return EPS_SCALE * (1.0 + (float(np.max(np.abs(finite))) if finite.size else 0.0))


def tail_verdict(K, tail_fraction: float = DEFAULT_TAIL_FRACTION, eps: Optional[float] = None):
    """Return ``(tail_min, tail_max, verdict, marginal, eps)`` for a curve ``K``."""
    K = np.asarray(K, dtype=float)
    if not 0 < tail_fraction < 1:
        raise ValueError("tail fraction must lie in (0, 1)")
    if eps is None:
        eps = default_eps(K)
    if K.size == 0 or not np.all(np.isfinite(K)):
        return math.nan, math.nan, Verdict.INCONCLUSIVE, False, eps
    count = max(1, int(math.ceil(tail_fraction * K.size)))
    tail = K[-count:]
    lo, hi = float(tail.min()), float(tail.max())
    if lo >= -eps:
        return lo, hi, Verdict.OO, lo < eps, eps
    if hi >= -eps:
        return lo, hi, Verdict.WOO, False, eps
    return lo, hi, Verdict.VIOLATED, False, eps


@dataclass(frozen=True)
class ConditionReport:
    variant: Variant
    competitor: str
    T: np.ndarray
    K: np.ndarray
    tail_fraction: float
    tail_min: float
    tail_max: float
    eps: float
    verdict: Verdict
    marginal: bool = False

    @classmethod
    def from_curve(cls, variant, competitor, T, K, tail_fraction=DEFAULT_TAIL_FRACTION, eps=None):
        T = np.asarray(T, dtype=float)
        K = np.asarray(K, dtype=float)
        lo, hi, verdict, marginal, eps = tail_verdict(K, tail_fraction, eps)
        return cls(Variant(variant), competitor, T, K, tail_fraction, lo, hi, eps, verdict, marginal)

    def recompute(self) -> "ConditionReport":
        """Re-derive tail statistics and verdict from the stored curve."""
        return ConditionReport.from_curve(self.variant, self.competitor, self.T, self.K, self.tail_fraction, self.eps)

    @property
    def oo_violated(self) -> bool:
        return self.verdict in (Verdict.WOO, Verdict.VIOLATED)


def _horizons(field: CauchyAdjointField, T_grid):
    if T_grid is None:
        return field.T_index, field.T
    idx = np.array([field.fm.index(float(T)) for T in T_grid], dtype=int)
    idx = np.unique(idx)
    return idx, field.t[idx]


def _same_grid(field: CauchyAdjointField, traj: Trajectory, k_max: int):
    if traj.h != field.h or traj.t[0] != field.t[0]:
        raise ValueError("trajectory and adjoint field use different grids")
    if traj.t.size <= k_max:
        raise ValueError("trajectory does not cover the horizon grid")


@dataclass(frozen=True)
class _Nodes:
    """Per-interval samples: right-limits at ``t_k``, midpoints, left-limits at ``t_{k+1}``."""

    x: tuple
    u: tuple
    t: tuple


def _nodes(p: ControlProblem, traj: Trajectory, k_max: int) -> _Nodes:
    xm, um, tm, ue = midpoint_samples(p, traj)
    t, x, u = traj.t, traj.x, traj.u
    return _Nodes(
        (x[:k_max], xm[:k_max], x[1 : k_max + 1]),
        (u[:k_max], um[:k_max], ue[:k_max]),
        (t[:k_max], tm[:k_max], t[1 : k_max + 1]),
    )


def _control_samples(p: ControlProblem, u: ControlSignal, nodes: _Nodes) -> tuple:
    t0, tm, t1 = nodes.t
    vals = (u(t0), u(tm), u(t1, side="left"))
    for v, times in zip(vals, nodes.t):
        bad = (v < p.control_lower) | (v > p.control_upper)
        if np.any(bad):
            k, j = np.argwhere(bad)[0]
            raise InadmissibleControlError(
                f"competitor {u.label} leaves the control box: u{j + 1} = {v[k, j]:.12g} at t = {times[k]:.12g}"
            )
    return vals


def _sweep(field: CauchyAdjointField, idx, base: tuple, push: tuple) -> np.ndarray:
    """``K[c, j] = int_{t0}^{T_j} (base_c + <J_x(., T_j), push_c>) dt``.

    ``base`` and ``push`` hold start, mid and end samples per interval, as
    produced by :func:`_nodes`, with a leading competitor axis; each interval
    is integrated by Simpson's rule.  ``J_x`` is evaluated once per horizon.
    """
    h = field.h
    C = base[0].shape[0]
    prefix = np.zeros((C, base[0].shape[1] + 1))
    np.cumsum(simpson_increments(*base, h), axis=1, out=prefix[:, 1:])
    out = np.zeros((C, idx.size))
    for j, k in enumerate(idx):
        k = int(k)
        if k == 0:
            continue
        J = field.values_at_index(k)
        Jm = field.midpoint_values(k, J)
        lin = simpson_increments(
            np.einsum("ki,cki->c", J[:-1], push[0][:, :k]),
            np.einsum("ki,cki->c", Jm, push[1][:, :k]),
            np.einsum("ki,cki->c", J[1:], push[2][:, :k]),
            h,
        )
        out[:, j] = prefix[:, k] + lin
    return out


def _prepare(field, candidate, T_grid):
    idx, T = _horizons(field, T_grid)
    k_max = int(idx[-1])
    _same_grid(field, candidate, k_max)
    return idx, T, k_max


def condition_grad_u_batch(
    p: ControlProblem,
    candidate: Trajectory,
    field: CauchyAdjointField,
    u_alts: Sequence[ControlSignal],
    T_grid=None,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    eps: Optional[float] = None,
) -> list:
    """:func:`condition_grad_u` for several competitors sharing one field sweep."""
    idx, T, k_max = _prepare(field, candidate, T_grid)
    nodes = _nodes(p, candidate, k_max)
    alts = [_control_samples(p, u, nodes) for u in u_alts]
    base, push = [], []
    for s, (x, uh, t) in enumerate(zip(nodes.x, nodes.u, nodes.t)):
        gu, fu = p.g_u_batch(x, uh, t), p.f_u_batch(x, uh, t)
        du = np.stack([uh - a[s] for a in alts])
        base.append(np.einsum("kj,ckj->ck", gu, du))
        push.append(np.einsum("kij,ckj->cki", fu, du))
    K = _sweep(field, idx, tuple(base), tuple(push))
    return [
        ConditionReport.from_curve(Variant.GRAD_U, u.label, T, K[c], tail_fraction, eps) for c, u in enumerate(u_alts)
    ]


def condition_grad_u(
    p: ControlProblem,
    candidate: Trajectory,
    field: CauchyAdjointField,
    u_alt: ControlSignal,
    T_grid=None,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    eps: Optional[float] = None,
) -> ConditionReport:
    """``K(T) = int <dH/du(x_hat, u_hat, t, J_x(t,T), 1), u_hat - u> dt``.

    Only the competitor's control samples are checked against the box here;
    state admissibility is the caller's concern (see :func:`certify`).
    """
    return condition_grad_u_batch(p, candidate, field, [u_alt], T_grid, tail_fraction, eps)[0]


def condition_psi_gap(
    p: ControlProblem,
    candidate: Trajectory,
    field: CauchyAdjointField,
    psi: Optional[ControlSignal],
    u_alt: ControlSignal,
    T_grid=None,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    eps: Optional[float] = None,
) -> ConditionReport:
    """``K(T) = int <(df/du)^T (J_x(t,T) - psi(t)), u_hat - u> dt``.

    ``psi`` is the adjoint for which the maximum condition holds; it cannot
    be constructed here and must be supplied.
    """
    if psi is None:
        raise MissingAdjointError("psi_gap needs the maximum-principle adjoint psi(t)")
    if psi.dim != p.state_dim:
        raise ValueError(f"psi has {psi.dim} components, expected {p.state_dim}")
    idx, T, k_max = _prepare(field, candidate, T_grid)
    nodes = _nodes(p, candidate, k_max)
    alt = _control_samples(p, u_alt, nodes)
    sides = ("right", "right", "left")
    base, push = [], []
    for x, uh, ua, t, side in zip(nodes.x, nodes.u, alt, nodes.t, sides):
        pu = np.einsum("kij,kj->ki", p.f_u_batch(x, uh, t), uh - ua)
        base.append(-np.einsum("ki,ki->k", psi(t, side=side), pu)[None])
        push.append(pu[None])
    K = _sweep(field, idx, tuple(base), tuple(push))[0]
    return ConditionReport.from_curve(Variant.PSI_GAP, u_alt.label, T, K, tail_fraction, eps)


def condition_ham_diff(
    p: ControlProblem,
    candidate: Trajectory,
    field: CauchyAdjointField,
    pair_alt: tuple,
    T_grid=None,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    eps: Optional[float] = None,
) -> ConditionReport:
    """``K(T) = int [H(x, u_hat, t, J_x, 1) - H(x, u, t, J_x, 1)] dt`` at the competitor state ``x``."""
    u_alt, traj_alt = pair_alt
    report = is_admissible(p, u_alt, traj_alt)
    if not report:
        raise InadmissibleControlError(f"competitor {u_alt.label} is inadmissible: {report.describe()}")
    idx, T, k_max = _prepare(field, candidate, T_grid)
    _same_grid(field, traj_alt, k_max)
    hat = _nodes(p, candidate, k_max)
    alt = _nodes(p, traj_alt, k_max)
    base, push = [], []
    for x, uh, ua, t in zip(alt.x, hat.u, alt.u, alt.t):
        base.append((p.g_batch(x, uh, t) - p.g_batch(x, ua, t))[None])
        push.append((p.f_batch(x, uh, t) - p.f_batch(x, ua, t))[None])
    K = _sweep(field, idx, tuple(base), tuple(push))[0]
    return ConditionReport.from_curve(Variant.HAM_DIFF, u_alt.label, T, K, tail_fraction, eps)


def condition_classic(
    p: ControlProblem,
    candidate: Trajectory,
    psi: Optional[ControlSignal],
    pair_alt: tuple,
    T_grid: Sequence[float],
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    eps: Optional[float] = None,
) -> ConditionReport:
    """``K(T) = <psi(T), x_hat(T) - x(T)>`` (no integral)."""
    if psi is None:
        raise MissingAdjointError("the classic condition needs the maximum-principle adjoint psi(t)")
    u_alt, traj_alt = pair_alt
    idx, T = snap_horizons(candidate, T_grid)
    if traj_alt.t.size <= idx[-1] or traj_alt.h != candidate.h:
        raise ValueError("competitor trajectory does not cover the horizon grid")
    K = np.einsum("ki,ki->k", psi(T), candidate.x[idx] - traj_alt.x[idx])
    return ConditionReport.from_curve(Variant.CLASSIC, u_alt.label, T, K, tail_fraction, eps)


# -- concavity probing ------------------------------------------------------------


@dataclass(frozen=True)
class ProbeSpec:
    """Where to sample the Hessian of ``H(., ., t, J_x(t,T), 1)``.

    ``mode`` is ``"joint"`` for concavity in ``(x, u)`` or ``"x"`` for
    concavity in ``x`` alone.
    """

    x_lower: np.ndarray
    x_upper: np.ndarray
    u_lower: np.ndarray
    u_upper: np.ndarray
    t_values: np.ndarray
    T_values: np.ndarray
    count: int = 1000
    mode: str = "joint"
    seed: int = 0
    rtol: float = PROBE_RTOL


@dataclass(frozen=True)
class ConcavityProbeReport:
    samples: int
    max_eig: np.ndarray
    hess_norm: np.ndarray
    tol: np.ndarray
    verdict: str  # "sampled-linear" | "sampled-concave" | "not-concave"
    mode: str
    T_probed: np.ndarray
    witness: Optional[dict] = None
    points: Optional[dict] = field(default=None, repr=False)

    @property
    def linear(self) -> bool:
        return self.verdict == "sampled-linear"

    @property
    def concave(self) -> bool:
        return self.verdict in ("sampled-linear", "sampled-concave")


def _inner_range(lo, hi, data_lo, data_hi, pad):
    """Padded data range pulled strictly inside ``(lo, hi)`` where bounds are finite."""
    a, b = data_lo - pad, data_hi + pad
    with np.errstate(invalid="ignore"):
        a = np.where(np.isfinite(lo), np.maximum(a, lo + 0.5 * (data_lo - lo)), a)
        b = np.where(np.isfinite(hi), np.minimum(b, hi - 0.5 * (hi - data_hi)), b)
    return a, b


def default_probe_spec(
    p: ControlProblem, candidate: Trajectory, field: CauchyAdjointField, count: int = 1000, mode: str = "joint"
) -> ProbeSpec:
    """Sample around the candidate's range, kept inside the domain and box."""
    xmin, xmax = candidate.x.min(axis=0), candidate.x.max(axis=0)
    xl, xh = _inner_range(
        p.state_lower, p.state_upper, xmin, xmax, 0.1 * (xmax - xmin) + 0.05 * (1 + np.abs(xmin) + np.abs(xmax))
    )
    umin, umax = candidate.u.min(axis=0), candidate.u.max(axis=0)
    boxed = np.isfinite(p.control_lower) & np.isfinite(p.control_upper)
    ul, uh = _inner_range(p.control_lower, p.control_upper, umin, umax, 0.5 * (1 + np.abs(umin) + np.abs(umax)))
    ul = np.where(boxed, p.control_lower, ul)
    uh = np.where(boxed, p.control_upper, uh)
    T_vals = field.T if field.T.size <= 20 else field.T[np.linspace(0, field.T.size - 1, 20).round().astype(int)]
    t_vals = candidate.t[np.linspace(0, int(field.T_index[-1]), 20).round().astype(int)]
    return ProbeSpec(xl, xh, ul, uh, np.unique(t_vals), np.unique(T_vals), count, mode)


def probe_concavity(
    p: ControlProblem, candidate: Trajectory, field: CauchyAdjointField, spec: ProbeSpec
) -> ConcavityProbeReport:
    """Estimate the Hessian of ``H(x, u, t, J_x(t, T), 1)`` by central second differences.

    Per-sample tolerance is ``rtol * (1 + |H|)``.  A sample whose largest
    Hessian eigenvalue exceeds it is a non-concavity witness.
    """
    n, m = p.state_dim, p.control_dim
    if spec.mode not in ("joint", "x"):
        raise ValueError("mode must be 'joint' or 'x'")
    bounds = [np.asarray(b, dtype=float) for b in (spec.x_lower, spec.x_upper, spec.u_lower, spec.u_upper)]
    if not all(np.all(np.isfinite(b)) for b in bounds):
        raise ValueError("sampling box must be finite")
    xl, xh, ul, uh = bounds
    if np.any(xl <= p.state_lower) or np.any(xh >= p.state_upper):
        raise ProblemError("sampling box extends outside the state domain")
    rng = np.random.default_rng(spec.seed)
    S = int(spec.count)
    X = rng.uniform(xl, xh, (S, n))
    U = rng.uniform(ul, uh, (S, m))
    T_idx = np.array([field.fm.index(float(v)) for v in spec.T_values])
    t_idx_all = np.array([field.fm.index(float(v)) for v in spec.t_values])
    Tk = T_idx[rng.integers(0, T_idx.size, S)]
    tk = np.empty(S, dtype=int)
    for s in range(S):
        ok = t_idx_all[t_idx_all <= Tk[s]]
        tk[s] = ok[rng.integers(0, ok.size)] if ok.size else Tk[s]
    PSI = np.empty((S, n))
    for k in np.unique(Tk):
        sel = Tk == k
        PSI[sel] = field.values_at_index(int(k))[tk[sel]]
    tt = field.t[tk]

    Z = np.concatenate([X, U], axis=1)
    d = n + m if spec.mode == "joint" else n
    step = 1e-4 * (1 + np.abs(Z[:, :d]))

    def H(Zs):
        with np.errstate(all="ignore"):
            return p.hamiltonian_batch(Zs[:, :n], Zs[:, n:], tt, PSI, 1.0)

    H0 = H(Z)
    Hess = np.empty((S, d, d))
    for i in range(d):
        ei = np.zeros_like(Z)
        ei[:, i] = step[:, i]
        Hess[:, i, i] = (H(Z + ei) - 2 * H0 + H(Z - ei)) / step[:, i] ** 2
        for j in range(i + 1, d):
            ej = np.zeros_like(Z)
            ej[:, j] = step[:, j]
            v = (H(Z + ei + ej) - H(Z + ei - ej) - H(Z - ei + ej) + H(Z - ei - ej)) / (4 * step[:, i] * step[:, j])
            Hess[:, i, j] = Hess[:, j, i] = v
    if not np.all(np.isfinite(Hess)):
        raise ProblemError("non-finite Hamiltonian inside the sampling box")
    eig = np.linalg.eigvalsh(Hess)
    max_eig = eig[:, -1]
    hnorm = np.max(np.abs(eig), axis=1)
    tol = spec.rtol * (1 + np.abs(H0))
    witness = None
    if np.any(max_eig > tol):
        s = int(np.argmax(max_eig / tol))
        verdict = "not-concave"
        witness = dict(
            x=X[s].copy(), u=U[s].copy(), t=float(tt[s]), T=float(field.t[Tk[s]]),
            eigenvalue=float(max_eig[s]), tol=float(tol[s]),
        )
    elif np.all(hnorm <= tol):
        verdict = "sampled-linear"
    else:
        verdict = "sampled-concave"
    return ConcavityProbeReport(
        S, max_eig, hnorm, tol, verdict, spec.mode, np.unique(field.t[T_idx]), witness,
        dict(x=X, u=U, t=tt, T=field.t[Tk]),
    )


# -- aggregation --------------------------------------------------------------------

_PROBE_MODE = {Variant.GRAD_U: "joint", Variant.PSI_GAP: "joint", Variant.HAM_DIFF: "x", Variant.CLASSIC: "joint"}


@dataclass(frozen=True)
class Certification:
    verdict: Verdict
    variant: Variant
    reports: tuple
    probe: Optional[ConcavityProbeReport]
    refused: bool
    notes: tuple

    @property
    def exit_code(self) -> int:
        if self.refused or self.verdict == Verdict.INCONCLUSIVE:
            return 2
        return 1 if self.verdict == Verdict.VIOLATED else 0

    @property
    def iff(self) -> bool:
        """True when the sampled Hamiltonian is linear, so the conditions are also necessary."""
        return self.probe is not None and self.probe.linear and self.variant in (Variant.GRAD_U, Variant.HAM_DIFF)

    def summary(self) -> str:
        lines = [f"variant: {self.variant.value}", f"overall: {self.verdict.value}"]
        if self.refused:
            lines.append("certification refused: concavity hypothesis failed on samples")
        if self.probe is not None:
            lines.append(f"concavity probe ({self.probe.mode}, {self.probe.samples} samples): {self.probe.verdict}")
        for r in self.reports:
            flag = " (marginal)" if r.marginal else ""
            lines.append(
                f"  {r.competitor}: {r.verdict.value}{flag}  tail-min={r.tail_min:.12g}  "
                f"tail-max={r.tail_max:.12g}  eps={r.eps:.3g}"
            )
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines)


def aggregate(reports: Sequence[ConditionReport]) -> Verdict:
    """Weakest verdict over the competitor reports (inconclusive if empty)."""
    if not reports:
        return Verdict.INCONCLUSIVE
    return min((r.verdict for r in reports), key=lambda v: _RANK[v])


def certify(
    p: ControlProblem,
    candidate: Trajectory,
    competitors: Sequence[ControlSignal],
    variant=Variant.GRAD_U,
    T_grid: Optional[Sequence[float]] = None,
    eps: Optional[float] = None,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    psi: Optional[ControlSignal] = None,
    field: Optional[CauchyAdjointField] = None,
    probe_spec: Optional[ProbeSpec] = None,
    probe: bool = True,
) -> Certification:
    """Evaluate one condition family against every competitor and aggregate.

    The concavity hypothesis matching ``variant`` is probed first; if the
    probe finds a witness of non-concavity, certification is refused.
    Competitors are integrated on the candidate's grid and must be
    admissible.
    """
    variant = Variant(variant)
    if T_grid is None:
        T_grid = field.T if field is not None else [candidate.T]
    if field is None:
        Y = fundamental_matrix(p, candidate)
        field = cauchy_field(p, candidate, Y, T_grid)
    notes = [
        "verdicts refer to the tested competitor family only; the conditions quantify over all admissible controls"
    ]
    probe_report = None
    if probe:
        spec = probe_spec or default_probe_spec(p, candidate, field, mode=_PROBE_MODE[variant])
        probe_report = probe_concavity(p, candidate, field, spec)
        if not probe_report.concave:
            notes.append(f"concavity witness: {probe_report.witness}")
            return Certification(Verdict.INCONCLUSIVE, variant, (), probe_report, True, tuple(notes))
        if probe_report.linear and variant in (Variant.GRAD_U, Variant.HAM_DIFF):
            notes.append("Hamiltonian sampled-linear: the tested conditions are necessary and sufficient")
    T_max = float(np.max(T_grid))
    if candidate.T < T_max - 1e-9 * max(1.0, T_max):
        raise ValueError("candidate trajectory is shorter than the horizon grid")
    pairs = []
    for u_alt in competitors:
        traj = integrate_state(p, u_alt, candidate.T, candidate.h)
        adm = is_admissible(p, u_alt, traj)
        if not adm:
            raise InadmissibleControlError(f"competitor {u_alt.label} is inadmissible: {adm.describe()}")
        pairs.append((u_alt, traj))
    reports = []
    if variant == Variant.GRAD_U and pairs:
        reports = condition_grad_u_batch(p, candidate, field, [u for u, _ in pairs], T_grid, tail_fraction, eps)
    for u_alt, traj in pairs if variant != Variant.GRAD_U else ():
        if variant == Variant.PSI_GAP:
            rep = condition_psi_gap(p, candidate, field, psi, u_alt, T_grid, tail_fraction, eps)
        elif variant == Variant.HAM_DIFF:
            rep = condition_ham_diff(p, candidate, field, (u_alt, traj), T_grid, tail_fraction, eps)
        else:
            rep = condition_classic(p, candidate, psi, (u_alt, traj), T_grid, tail_fraction, eps)
        reports.append(rep)
    verdict = aggregate(reports)
    if not reports:
        notes.append("no competitors supplied")
    return Certification(verdict, variant, tuple(reports), probe_report, False, tuple(notes))


# -- adversarial search -------------------------------------------------------------


@dataclass(frozen=True)
class WitnessSearch:
    """Outcome of searching for a competitor that breaks the OO condition."""

    reports: tuple
    witness: Optional[ConditionReport]

    @property
    def found(self) -> bool:
        return self.witness is not None

    def describe(self) -> str:
        if self.witness is None:
            return f"no witness found among {len(self.reports)} swept competitors"
        w = self.witness
        return f"OO-violating competitor {w.competitor}: tail-min={w.tail_min:.12g} < -eps={-w.eps:.3g}"


def sweep_competitors(p: ControlProblem, omegas: Sequence[float], t_end: float, phases=(0.0, 0.25, 0.5, 0.75)):
    """Oscillating competitors ``mid - half*cos(w t)`` and bang-bang of period ``2 pi / w``."""
    lo, hi = p.control_lower, p.control_upper
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("competitor sweep needs a finite control box")
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    out = []
    for w in omegas:
        texts = [f"{float(mid[j])!r} - {float(half[j])!r}*cos({float(w)!r}*t)" for j in range(p.control_dim)]
        out.append(ControlSignal.from_expressions(texts, label=f"expr:-cos({float(w):.12g}*t)"))
        for ph in phases:
            out.append(ControlSignal.bang_bang(2 * math.pi / w, lo, hi, p.t0, t_end, ph))
    return out


def search_oo_witness(
    p: ControlProblem,
    candidate: Trajectory,
    field: CauchyAdjointField,
    omegas: Sequence[float],
    variant=Variant.GRAD_U,
    T_grid=None,
    eps: Optional[float] = None,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
) -> WitnessSearch:
    """Sweep oscillating competitors for one with tail-min below ``-eps``.

    Returns the most negative offender, or no witness.  Failing to find one
    is not evidence that the OO condition holds.
    """
    variant = Variant(variant)
    comps = sweep_competitors(p, omegas, candidate.T)
    if variant == Variant.GRAD_U:
        reports = condition_grad_u_batch(p, candidate, field, comps, T_grid, tail_fraction, eps)
    elif variant == Variant.HAM_DIFF:
        reports = []
        for u_alt in comps:
            traj = integrate_state(p, u_alt, candidate.T, candidate.h)
            reports.append(condition_ham_diff(p, candidate, field, (u_alt, traj), T_grid, tail_fraction, eps))
    else:
        raise ValueError("witness search supports grad_u and ham_diff")
    offenders = [r for r in reports if r.oo_violated]
    witness = min(offenders, key=lambda r: r.tail_min / r.eps) if offenders else None
    return WitnessSearch(tuple(reports), witness)


def increment_bound_gap(p, candidate, field, pair_alt, T_grid=None) -> np.ndarray:
    """``Delta J(T) - K_ham_diff(T)`` on the horizon grid (nonnegative under x-concavity)."""
    u_alt, traj_alt = pair_alt
    rep = condition_ham_diff(p, candidate, field, pair_alt, T_grid)
    inc = increment_from_trajectories(candidate, traj_alt, rep.T)
    return inc.dJ - rep.K
