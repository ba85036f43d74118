"""Control problems, the Hamilton-Pontryagin function and admissibility.

A problem is declared in a small sectioned text format (see
``docs/problem_format.md``)::

    [dimensions]
    n = 2
    m = 1

    [params]
    b = 1

    [dynamics]
    f1 = x2
    f2 = u1 - x1

    [payoff]
    g = x2 + b*u1

    [derivatives]
    df1/dx2 = 1
    df2/dx1 = -1
    df2/du1 = 1
    dg/dx2 = 1
    dg/du1 = b

    [control]
    u1 = -1, 1

    [initial]
    x1 = 0
    x2 = 0

Derivative entries that are omitted are zero.  They are not derived
symbolically; :func:`parse_problem` cross-checks them against central
finite differences and rejects the file on mismatch.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import expr as ex

SECTIONS = (
    "dimensions",
    "params",
    "dynamics",
    "payoff",
    "derivatives",
    "control",
    "state",
    "initial",
)

DERIVATIVE_RTOL = 1e-5


class ProblemError(ValueError):
    """Invalid problem definition."""


class ProblemFileError(ProblemError):
    """Syntax or semantic error located in a problem file."""

    def __init__(self, message: str, line: int, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class DerivativeMismatchError(ProblemError):
    pass


class DomainError(ProblemError):
    pass


@dataclass(frozen=True)
class HamiltonianEval:
    """Value and gradients of ``H = lambda*g + <psi, f>`` at one point."""

    value: float
    dHdx: np.ndarray
    dHdu: np.ndarray
    x: np.ndarray
    u: np.ndarray
    t: float
    psi: np.ndarray
    lam: float


def _vec(a) -> np.ndarray:
    out = np.array(a, dtype=float).reshape(-1)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ControlProblem:
    """Infinite-horizon control problem ``max int g dt`` s.t. ``x' = f``.

    Expression fields hold parsed trees; ``dfdx`` is a tuple of ``n`` rows of
    ``n`` trees and ``dfdu`` ``n`` rows of ``m`` trees.
    """

    state_dim: int
    control_dim: int
    dynamics: tuple
    payoff: ex.Node
    dfdx: tuple
    dfdu: tuple
    dgdx: tuple
    dgdu: tuple
    control_lower: np.ndarray
    control_upper: np.ndarray
    state_lower: np.ndarray
    state_upper: np.ndarray
    x0: np.ndarray
    t0: float = 0.0
    params: Mapping[str, float] = field(default_factory=dict)
    param_nodes: Mapping[str, ex.Node] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        n, m = self.state_dim, self.control_dim
        if n < 1 or m < 1:
            raise ProblemError("state and control dimensions must be positive")
        shapes = {
            "dynamics": (len(self.dynamics), n),
            "dfdx rows": (len(self.dfdx), n),
            "dfdu rows": (len(self.dfdu), n),
            "dgdx": (len(self.dgdx), n),
            "dgdu": (len(self.dgdu), m),
        }
        shapes.update({f"dfdx row {i + 1}": (len(r), n) for i, r in enumerate(self.dfdx)})
        shapes.update({f"dfdu row {i + 1}": (len(r), m) for i, r in enumerate(self.dfdu)})
        for what, (got, want) in shapes.items():
            if got != want:
                raise ProblemError(f"shape mismatch: {what} has {got} entries, expected {want}")
        for name in ("control_lower", "control_upper", "state_lower", "state_upper", "x0"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        if self.control_lower.size != m or self.control_upper.size != m:
            raise ProblemError("control box must have m bounds per side")
        if self.state_lower.size != n or self.state_upper.size != n or self.x0.size != n:
            raise ProblemError("state domain and x0 must have n entries")
        if np.any(self.control_lower > self.control_upper):
            raise ProblemError("control box has lower > upper")
        if np.any(self.state_lower >= self.state_upper):
            raise ProblemError("state domain must be a nonempty open box")
        if not self.in_state_domain(self.x0):
            raise DomainError(f"x0 = {self.x0.tolist()} is not strictly inside the state domain")
        object.__setattr__(self, "params", dict(self.params))
        p = self.params
        flat_fx = [e for row in self.dfdx for e in row]
        flat_fu = [e for row in self.dfdu for e in row]
        kernels = {}
        for vec in (False, True):
            kernels[vec] = dict(
                f=ex.compile_nodes(self.dynamics, p, vec),
                g=ex.compile_nodes([self.payoff], p, vec),
                fx=ex.compile_nodes(flat_fx, p, vec),
                fu=ex.compile_nodes(flat_fu, p, vec),
                gx=ex.compile_nodes(self.dgdx, p, vec),
                gu=ex.compile_nodes(self.dgdu, p, vec),
            )
        object.__setattr__(self, "_scalar", kernels[False])
        object.__setattr__(self, "_vector", kernels[True])

    # -- domain --------------------------------------------------------------

    def in_state_domain(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(np.isfinite(x)) and np.all(x > self.state_lower) and np.all(x < self.state_upper))

    def in_control_box(self, u) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.control_lower) and np.all(u <= self.control_upper))

    # -- pointwise evaluation -------------------------------------------------

    def f(self, x, u, t: float) -> np.ndarray:
        return np.array(self._scalar["f"](x, u, t), dtype=float)

    def g(self, x, u, t: float) -> float:
        return float(self._scalar["g"](x, u, t)[0])

    def f_x(self, x, u, t: float) -> np.ndarray:
        n = self.state_dim
        return np.array(self._scalar["fx"](x, u, t), dtype=float).reshape(n, n)

    def f_u(self, x, u, t: float) -> np.ndarray:
        return np.array(self._scalar["fu"](x, u, t), dtype=float).reshape(self.state_dim, self.control_dim)

    def g_x(self, x, u, t: float) -> np.ndarray:
        return np.array(self._scalar["gx"](x, u, t), dtype=float)

    def g_u(self, x, u, t: float) -> np.ndarray:
        return np.array(self._scalar["gu"](x, u, t), dtype=float)

    def scalar_dynamics(self):
        """Raw ``f(x, u, t) -> tuple`` kernel on Python floats (hot loop use)."""
        return self._scalar["f"]

    # -- batched evaluation ---------------------------------------------------
    # X: (..., n), U: (..., m), T: broadcastable to X.shape[:-1]

    def _batch(self, key, X, U, T, shape):
        X = np.asarray(X, dtype=float)
        U = np.asarray(U, dtype=float)
        lead = np.broadcast_shapes(X.shape[:-1], U.shape[:-1], np.shape(T))
        T = np.broadcast_to(np.asarray(T, dtype=float), lead)
        with np.errstate(all="ignore"):
            comps = self._vector[key](np.moveaxis(X, -1, 0), np.moveaxis(U, -1, 0), T)
        out = np.empty(lead + (len(comps),))
        for k, c in enumerate(comps):
            out[..., k] = c
        return out.reshape(lead + shape)

    def f_batch(self, X, U, T) -> np.ndarray:
        return self._batch("f", X, U, T, (self.state_dim,))

    def g_batch(self, X, U, T) -> np.ndarray:
        return self._batch("g", X, U, T, ())

    def f_x_batch(self, X, U, T) -> np.ndarray:
        n = self.state_dim
        return self._batch("fx", X, U, T, (n, n))

    def f_u_batch(self, X, U, T) -> np.ndarray:
        return self._batch("fu", X, U, T, (self.state_dim, self.control_dim))

    def g_x_batch(self, X, U, T) -> np.ndarray:
        return self._batch("gx", X, U, T, (self.state_dim,))

    def g_u_batch(self, X, U, T) -> np.ndarray:
        return self._batch("gu", X, U, T, (self.control_dim,))

    def hamiltonian_batch(self, X, U, T, PSI, lam=1.0) -> np.ndarray:
        """``lam*g + <psi, f>`` over a batch of points."""
        return lam * self.g_batch(X, U, T) + np.einsum("...i,...i->...", PSI, self.f_batch(X, U, T))

    def with_params(self, **overrides) -> "ControlProblem":
        """Re-parse this problem with some parameter values replaced."""
        return parse_problem(format_problem(self), params=overrides, name=self.name)


def eval_hamiltonian(p: ControlProblem, x, u, t: float, psi, lam: float = 1.0) -> HamiltonianEval:
    """Evaluate the Hamilton-Pontryagin function and its gradients.

    Raises
    ------
    DomainError
        If ``x`` is outside the open state domain.
    """
    x = _vec(x)
    u = _vec(u)
    psi = _vec(psi)
    if x.size != p.state_dim or u.size != p.control_dim or psi.size != p.state_dim:
        raise ProblemError("x, u, psi dimensions do not match the problem")
    if not p.in_state_domain(x):
        raise DomainError(f"x = {x.tolist()} is outside the state domain")
    lam = float(lam)
    value = lam * p.g(x, u, t) + float(psi @ p.f(x, u, t))
    dHdx = lam * p.g_x(x, u, t) + p.f_x(x, u, t).T @ psi
    dHdu = lam * p.g_u(x, u, t) + p.f_u(x, u, t).T @ psi
    return HamiltonianEval(value, _vec(dHdx), _vec(dHdu), x, u, float(t), psi, lam)


# -- admissibility -----------------------------------------------------------


@dataclass(frozen=True)
class AdmissibilityReport:
    admissible: bool
    kind: Optional[str] = None  # "control" | "state" | "incomplete"
    time: Optional[float] = None
    index: Optional[int] = None
    coordinate: Optional[int] = None
    value: Optional[float] = None

    def __bool__(self):
        return self.admissible

    def describe(self) -> str:
        if self.admissible:
            return "admissible"
        if self.kind == "incomplete":
            return f"state left the domain at t = {self.time:.12g}"
        name = "u" if self.kind == "control" else "x"
        return (
            f"{self.kind} {name}{self.coordinate + 1} = {self.value:.12g} outside bounds "
            f"at t = {self.time:.12g}"
        )


def is_admissible(p: ControlProblem, u, traj) -> AdmissibilityReport:
    """Check that ``traj`` (integrated from control ``u``) stays in ``U`` and ``X``.

    Control samples are taken at every grid node and at step midpoints.
    """
    t = traj.t
    samples = [(t, u(t))]
    if t.size > 1:
        mid = 0.5 * (t[:-1] + t[1:])
        samples.append((mid, u(mid)))
    first = None
    for times, vals in samples:
        bad = (vals < p.control_lower) | (vals > p.control_upper)
        if np.any(bad):
            k, j = np.argwhere(bad)[0]
            cand = (float(times[k]), int(k), int(j), float(vals[k, j]))
            if first is None or cand[0] < first[0]:
                first = cand
    if first is not None:
        return AdmissibilityReport(False, "control", first[0], first[1], first[2], first[3])
    X = traj.x
    bad = ~np.isfinite(X) | (X <= p.state_lower) | (X >= p.state_upper)
    if np.any(bad):
        k, j = np.argwhere(bad)[0]
        return AdmissibilityReport(False, "state", float(t[k]), int(k), int(j), float(X[k, j]))
    if traj.violation is not None:
        v = traj.violation
        return AdmissibilityReport(False, "incomplete", v.time, v.index, v.coordinate, v.value)
    return AdmissibilityReport(True)


# -- derivative validation ---------------------------------------------------


def _sample_points(p: ControlProblem, count: int, rng: np.random.Generator):
    n, m = p.state_dim, p.control_dim
    X = np.empty((count, n))
    for i in range(n):
        lo, hi, c = p.state_lower[i], p.state_upper[i], p.x0[i]
        if np.isfinite(lo) and np.isfinite(hi):
            X[:, i] = rng.uniform(lo + 0.01 * (hi - lo), hi - 0.01 * (hi - lo), count)
        elif np.isfinite(lo):
            X[:, i] = lo + (c - lo) * np.exp(rng.normal(0, 0.5, count))
        elif np.isfinite(hi):
            X[:, i] = hi - (hi - c) * np.exp(rng.normal(0, 0.5, count))
        else:
            X[:, i] = c + rng.normal(0, 1 + abs(c), count)
    U = np.empty((count, m))
    for j in range(m):
        lo, hi = p.control_lower[j], p.control_upper[j]
        if np.isfinite(lo) and np.isfinite(hi):
            U[:, j] = rng.uniform(lo, hi, count) if hi > lo else lo
        elif np.isfinite(lo):
            U[:, j] = lo + (1 + abs(lo)) * rng.exponential(1.0, count)
        elif np.isfinite(hi):
            U[:, j] = hi - (1 + abs(hi)) * rng.exponential(1.0, count)
        else:
            U[:, j] = rng.normal(0, 1, count)
    T = p.t0 + rng.uniform(0, 10, count)
    return X, U, T


def _central_jacobian(fn, Z, step):
    """d fn / d Z[..., k] by central differences; fn maps (S, d) -> (S, q)."""
    cols = []
    for k in range(Z.shape[1]):
        dz = np.zeros_like(Z)
        dz[:, k] = step[:, k]
        cols.append((fn(Z + dz) - fn(Z - dz)) / (2 * step[:, k : k + 1]))
    return np.stack(cols, axis=-1)


def check_derivatives(p: ControlProblem, samples: int = 16, seed: int = 0, rtol: float = DERIVATIVE_RTOL):
    """Compare declared derivatives with central finite differences.

    The comparison is ``|declared - fd| <= rtol * max(1, |declared|, |fd|)``.
    Raises :class:`DerivativeMismatchError` naming the first offending entry.
    """
    n, m = p.state_dim, p.control_dim
    rng = np.random.default_rng(seed)
    X, U, T = _sample_points(p, 4 * samples, rng)
    with np.errstate(all="ignore"):
        ok = np.isfinite(p.f_batch(X, U, T)).all(-1) & np.isfinite(p.g_batch(X, U, T))
    X, U, T = X[ok][:samples], U[ok][:samples], T[ok][:samples]
    if len(T) == 0:
        raise ProblemError("could not find sample points where f and g are finite")
    Z = np.concatenate([X, U], axis=1)
    step = 1e-5 * (1 + np.abs(Z))

    def fg(Zs):
        Xs, Us = Zs[:, :n], Zs[:, n:]
        return np.concatenate([p.f_batch(Xs, Us, T), p.g_batch(Xs, Us, T)[:, None]], axis=1)

    with np.errstate(all="ignore"):
        fd = _central_jacobian(fg, Z, step)  # (S, n+1, n+m)
        declared = {
            "df/dx": p.f_x_batch(X, U, T),
            "df/du": p.f_u_batch(X, U, T),
            "dg/dx": p.g_x_batch(X, U, T),
            "dg/du": p.g_u_batch(X, U, T),
        }
    numeric = {
        "df/dx": fd[:, :n, :n],
        "df/du": fd[:, :n, n:],
        "dg/dx": fd[:, n, :n],
        "dg/du": fd[:, n, n:],
    }
    for key, a in declared.items():
        b = numeric[key]
        scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
        err = np.abs(a - b) / scale
        err = np.where(np.isfinite(b), err, 0.0)
        if not np.all(np.isfinite(a)) or np.any(err > rtol):
            s = int(np.unravel_index(np.nanargmax(np.where(np.isfinite(a), err, np.inf)), err.shape)[0])
            raise DerivativeMismatchError(
                f"{key} disagrees with finite differences at x={X[s].tolist()}, "
                f"u={U[s].tolist()}, t={T[s]:.6g}: declared {np.asarray(a[s]).tolist()}, "
                f"numeric {np.asarray(b[s]).tolist()}"
            )


# -- file format ---------------------------------------------------------------

_DERIV_KEY = re.compile(r"^d(f([1-9][0-9]*)|g)/d(x|u)([1-9][0-9]*)$")
_IDENT = re.compile(r"^[A-Za-z_][A-Za-z_0-9]*$")
_RESERVED = re.compile(r"^(t|[xu][1-9][0-9]*|sin|cos|exp|log|sqrt|inf)$")


def _read_sections(source: str):
    """Split text into ``{section: {key: (value, line, value_column)}}``."""
    sections: dict = {}
    current = None
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ProblemFileError("unterminated section header", lineno, line.index("[") + 1)
            name = stripped[1:-1].strip()
            if name not in SECTIONS:
                raise ProblemFileError(f"unknown section [{name}]", lineno, line.index("[") + 1)
            if name in sections:
                raise ProblemFileError(f"duplicate section [{name}]", lineno, line.index("[") + 1)
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            raise ProblemFileError("expected 'key = value'", lineno, len(line) - len(line.lstrip()) + 1)
        if current is None:
            raise ProblemFileError("key outside of any section", lineno, 1)
        key_part, value = line.split("=", 1)
        key = key_part.strip()
        if key in sections[current]:
            raise ProblemFileError(f"duplicate key {key!r}", lineno, len(key_part) - len(key_part.lstrip()) + 1)
        col = len(key_part) + 2 + (len(value) - len(value.lstrip()))
        sections[current][key] = (value.strip(), lineno, col)
    return sections


def _parse_entry(entry, n, m, params):
    value, line, col = entry
    try:
        return ex.parse(value, n, m, params)
    except ex.ExpressionError as err:
        raise ProblemFileError(str(err).rsplit(" (column", 1)[0], line, col + err.column - 1) from None


def _parse_bound(text, line, col, params, values):
    t = text.strip()
    if t in ("inf", "+inf"):
        return math.inf
    if t == "-inf":
        return -math.inf
    try:
        return ex.constant_value(ex.parse(t, 0, 0, params), values)
    except (ex.ExpressionError, ValueError) as err:
        raise ProblemFileError(f"bad bound {t!r}: {err}", line, col) from None


def _parse_interval(entry, params, values):
    value, line, col = entry
    parts = value.split(",")
    if len(parts) != 2:
        raise ProblemFileError("interval must be 'lower, upper'", line, col)
    lo = _parse_bound(parts[0], line, col, params, values)
    hi = _parse_bound(parts[1], line, col + len(parts[0]) + 1, params, values)
    return lo, hi


def _int_entry(sec, key, name):
    if key not in sec:
        raise ProblemFileError(f"[{name}] is missing {key!r}", 1)
    value, line, col = sec[key]
    try:
        out = int(value)
    except ValueError:
        raise ProblemFileError(f"{key} must be a positive integer", line, col) from None
    if out < 1:
        raise ProblemFileError(f"{key} must be a positive integer", line, col)
    return out


def parse_problem(
    source: str,
    params: Optional[Mapping[str, float]] = None,
    validate: bool = True,
    name: str = "",
) -> ControlProblem:
    """Parse problem-file text into a validated :class:`ControlProblem`.

    Parameters
    ----------
    source : str
        Problem file contents.
    params : mapping, optional
        Overrides for values in the ``[params]`` section (names must exist).
    validate : bool
        Cross-check declared derivatives against finite differences.

    Raises
    ------
    ProblemFileError
        Syntax errors, unknown keys or sections (with line and column).
    ProblemError, DomainError, DerivativeMismatchError
        Shape problems, ``x0`` outside the state domain, wrong derivatives.
    """
    secs = _read_sections(source)
    for required in ("dimensions", "dynamics", "payoff", "initial"):
        if required not in secs:
            raise ProblemFileError(f"missing section [{required}]", 1)
    dims = secs["dimensions"]
    for key, (_, line, _c) in dims.items():
        if key not in ("n", "m"):
            raise ProblemFileError(f"unknown key {key!r} in [dimensions]", line)
    n = _int_entry(dims, "n", "dimensions")
    m = _int_entry(dims, "m", "dimensions")

    param_nodes: dict = {}
    values: dict = {}
    overrides = dict(params or {})
    for key, entry in secs.get("params", {}).items():
        if not _IDENT.match(key) or _RESERVED.match(key):
            raise ProblemFileError(f"invalid parameter name {key!r}", entry[1])
        node = _parse_entry(entry, 0, 0, list(values))
        param_nodes[key] = node
        if key in overrides:
            values[key] = float(overrides.pop(key))
            param_nodes[key] = ex.Num(values[key]) if values[key] >= 0 else ex.Neg(ex.Num(-values[key]))
        else:
            values[key] = ex.constant_value(node, values)
    if overrides:
        raise ProblemError(f"unknown parameter override(s): {sorted(overrides)}")
    pnames = list(values)

    dyn = secs["dynamics"]
    for key, entry in dyn.items():
        if key not in {f"f{i}" for i in range(1, n + 1)}:
            raise ProblemFileError(f"unknown key {key!r} in [dynamics]", entry[1])
    dynamics = []
    for i in range(1, n + 1):
        if f"f{i}" not in dyn:
            raise ProblemFileError(f"[dynamics] is missing f{i}", 1)
        dynamics.append(_parse_entry(dyn[f"f{i}"], n, m, pnames))

    pay = secs["payoff"]
    for key, entry in pay.items():
        if key != "g":
            raise ProblemFileError(f"unknown key {key!r} in [payoff]", entry[1])
    if "g" not in pay:
        raise ProblemFileError("[payoff] is missing g", 1)
    payoff = _parse_entry(pay["g"], n, m, pnames)

    zero = ex.Num(0.0)
    fx = [[zero] * n for _ in range(n)]
    fu = [[zero] * m for _ in range(n)]
    gx = [zero] * n
    gu = [zero] * m
    for key, entry in secs.get("derivatives", {}).items():
        km = _DERIV_KEY.match(key)
        if not km:
            raise ProblemFileError(f"unknown key {key!r} in [derivatives]", entry[1])
        row = int(km.group(2)) if km.group(2) else None
        var, col_idx = km.group(3), int(km.group(4))
        if (row is not None and row > n) or col_idx > (n if var == "x" else m):
            raise ProblemFileError(f"derivative index out of range in {key!r}", entry[1])
        node = _parse_entry(entry, n, m, pnames)
        if row is None:
            (gx if var == "x" else gu)[col_idx - 1] = node
        else:
            (fx if var == "x" else fu)[row - 1][col_idx - 1] = node

    clo, chi = [-math.inf] * m, [math.inf] * m
    for key, entry in secs.get("control", {}).items():
        km = re.match(r"^u([1-9][0-9]*)$", key)
        if not km or int(km.group(1)) > m:
            raise ProblemFileError(f"unknown key {key!r} in [control]", entry[1])
        j = int(km.group(1)) - 1
        clo[j], chi[j] = _parse_interval(entry, pnames, values)
    slo, shi = [-math.inf] * n, [math.inf] * n
    for key, entry in secs.get("state", {}).items():
        km = re.match(r"^x([1-9][0-9]*)$", key)
        if not km or int(km.group(1)) > n:
            raise ProblemFileError(f"unknown key {key!r} in [state]", entry[1])
        i = int(km.group(1)) - 1
        slo[i], shi[i] = _parse_interval(entry, pnames, values)

    init = secs["initial"]
    x0 = [None] * n
    t0 = 0.0
    for key, entry in init.items():
        km = re.match(r"^x([1-9][0-9]*)$", key)
        if key == "t0":
            t0 = _parse_bound(entry[0], entry[1], entry[2], pnames, values)
        elif km and int(km.group(1)) <= n:
            x0[int(km.group(1)) - 1] = _parse_bound(entry[0], entry[1], entry[2], pnames, values)
        else:
            raise ProblemFileError(f"unknown key {key!r} in [initial]", entry[1])
    if any(v is None for v in x0):
        raise ProblemFileError("[initial] must give x1..xn", 1)

    prob = ControlProblem(
        state_dim=n,
        control_dim=m,
        dynamics=tuple(dynamics),
        payoff=payoff,
        dfdx=tuple(tuple(r) for r in fx),
        dfdu=tuple(tuple(r) for r in fu),
        dgdx=tuple(gx),
        dgdu=tuple(gu),
        control_lower=clo,
        control_upper=chi,
        state_lower=slo,
        state_upper=shi,
        x0=x0,
        t0=t0,
        params=values,
        param_nodes=param_nodes,
        name=name,
    )
    if validate:
        check_derivatives(prob)
    return prob


def load_problem(path, params=None, validate=True) -> ControlProblem:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read(), params=params, validate=validate, name=str(path))


def _fmt_bound(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def format_problem(p: ControlProblem) -> str:
    """Render ``p`` in the problem-file format (inverse of :func:`parse_problem`)."""
    out = ["[dimensions]", f"n = {p.state_dim}", f"m = {p.control_dim}", ""]
    if p.param_nodes:
        out.append("[params]")
        out += [f"{k} = {ex.to_text(v)}" for k, v in p.param_nodes.items()]
        out.append("")
    out.append("[dynamics]")
    out += [f"f{i + 1} = {ex.to_text(e)}" for i, e in enumerate(p.dynamics)]
    out += ["", "[payoff]", f"g = {ex.to_text(p.payoff)}", "", "[derivatives]"]
    zero = ex.Num(0.0)
    for i, row in enumerate(p.dfdx):
        out += [f"df{i + 1}/dx{j + 1} = {ex.to_text(e)}" for j, e in enumerate(row) if e != zero]
    for i, row in enumerate(p.dfdu):
        out += [f"df{i + 1}/du{j + 1} = {ex.to_text(e)}" for j, e in enumerate(row) if e != zero]
    out += [f"dg/dx{j + 1} = {ex.to_text(e)}" for j, e in enumerate(p.dgdx) if e != zero]
    out += [f"dg/du{j + 1} = {ex.to_text(e)}" for j, e in enumerate(p.dgdu) if e != zero]
    out += ["", "[control]"]
    out += [
        f"u{j + 1} = {_fmt_bound(lo)}, {_fmt_bound(hi)}"
        for j, (lo, hi) in enumerate(zip(p.control_lower, p.control_upper))
    ]
    out += ["", "[state]"]
    out += [
        f"x{i + 1} = {_fmt_bound(lo)}, {_fmt_bound(hi)}"
        for i, (lo, hi) in enumerate(zip(p.state_lower, p.state_upper))
    ]
    out += ["", "[initial]"]
    out += [f"x{i + 1} = {_fmt_bound(v)}" for i, v in enumerate(p.x0)]
    out += [f"t0 = {_fmt_bound(p.t0)}", ""]
    return "\n".join(out)


def same_expressions(a: ControlProblem, b: ControlProblem) -> bool:
    """Structural equality of all expression trees, bounds and initial data."""
    return (
        a.state_dim == b.state_dim
        and a.control_dim == b.control_dim
        and a.dynamics == b.dynamics
        and a.payoff == b.payoff
        and a.dfdx == b.dfdx
        and a.dfdu == b.dfdu
        and a.dgdx == b.dgdx
        and a.dgdu == b.dgdu
        and dict(a.param_nodes) == dict(b.param_nodes)
        and np.array_equal(a.control_lower, b.control_lower)
        and np.array_equal(a.control_upper, b.control_upper)
        and np.array_equal(a.state_lower, b.state_lower)
        and np.array_equal(a.state_upper, b.state_upper)
        and np.array_equal(a.x0, b.x0)
        and a.t0 == b.t0
    )


def hamiltonian_linear_in_psi(p: ControlProblem, x, u, t, psi1, psi2, lam) -> float:
    """Relative defect of ``H(psi1+psi2) + lam*g - H(psi1) - H(psi2)``."""
    h12 = eval_hamiltonian(p, x, u, t, np.add(psi1, psi2), lam).value
    h1 = eval_hamiltonian(p, x, u, t, psi1, lam).value
    h2 = eval_hamiltonian(p, x, u, t, psi2, lam).value
    lg = lam * p.g(x, u, t)
    scale = max(1.0, abs(h1), abs(h2), abs(h12), abs(lg))
    return abs(h12 + lg - h1 - h2) / scale


__all__: Sequence[str] = [
    "ControlProblem",
    "HamiltonianEval",
    "AdmissibilityReport",
    "ProblemError",
    "ProblemFileError",
    "DerivativeMismatchError",
    "DomainError",
    "parse_problem",
    "load_problem",
    "format_problem",
    "eval_hamiltonian",
    "is_admissible",
    "check_derivatives",
    "same_expressions",
]
