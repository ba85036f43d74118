"""The four benchmark problems with analytic transition matrices and fields.

============  ==========================================  =======================
name          parameters (defaults)                       candidate
============  ==========================================  =======================
oscillator    b=1                                         u = 1
unbounded     (none)                                      u = 1
tobin_q       r=0.05 delta=0.05 c=1 alpha=0.5             u = delta*x* at x0 = x*
              u_lo=0 u_hi=1 x0=x*
ramsey        alpha=0.5 delta=0.1 x0=x*                   u = x*^alpha - delta*x*
============  ==========================================  =======================

For ``tobin_q`` the production function is ``x**alpha`` and ``x*`` is the
steady state of the optimal investment path.  For ``ramsey`` ``x*`` is the
golden-rule capital stock; the steady-state candidate there is
illustrative only, no optimal control is known in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .problem import ControlProblem, parse_problem
from .signals import ControlSignal


class BenchmarkError(ValueError):
    pass


@dataclass(frozen=True)
class ExpectedVerdict:
    variant: str
    verdict: str
    precondition: str


@dataclass(frozen=True, eq=False)
class Benchmark:
    """A problem bundled with its candidate and closed-form oracles.

    ``transition(s, t)`` returns ``Phi(s, t)``; ``field(t, T)`` takes an array
    of ``t`` and returns ``J_x`` with shape ``(len(t), n)``; ``integrand(t, T)``
    is ``dH/du`` at ``psi = J_x`` where a closed form is known.
    """

    name: str
    params: dict
    problem: ControlProblem
    candidate: ControlSignal
    transition: Optional[Callable]
    field: Optional[Callable]
    integrand: Optional[Callable] = None
    psi: Optional[ControlSignal] = None
    expected: tuple = ()
    competitors: tuple = ()
    T_max: float = 40.0
    h: float = 1e-3
    notes: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def tgrid(self) -> tuple:
        """Default horizon grid specs: geometric from 1 plus a dense upper half."""
        T = self.T_max
        return (f"geo:1:{T:g}", f"lin:{T / 2:g}:{T:g}:41")


PARAM_SCHEMAS = {
    "oscillator": {"b": (1.0, "b >= 0")},
    "unbounded": {},
    "tobin_q": {
        "r": (0.05, "r > 0"),
        "delta": (0.05, "delta > 0"),
        "c": (1.0, "c > 0"),
        "alpha": (0.5, "0 < alpha < 1"),
        "u_lo": (0.0, "u_lo < delta*x* < u_hi"),
        "u_hi": (1.0, "u_hi > u_lo"),
        "x0": (None, "x0 > 0 (default: steady state x*)"),
    },
    "ramsey": {
        "alpha": (0.5, "0 < alpha < 1"),
        "delta": (0.1, "delta > 0"),
        "x0": (None, "x0 > 0 (default: golden-rule x*)"),
    },
}

OSCILLATOR = """\
[dimensions]
n = 2
m = 1

[params]
b = {b!r}

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
t0 = 0
"""

UNBOUNDED = """\
[dimensions]
n = 1
m = 1

[dynamics]
f1 = u1

[payoff]
g = x1

[derivatives]
df1/du1 = 1
dg/dx1 = 1

[control]
u1 = -inf, 1

[initial]
x1 = 0
t0 = 0
"""

TOBIN_Q = """\
[dimensions]
n = 1
m = 1

[params]
r = {r!r}
delta = {delta!r}
c = {c!r}
alpha = {alpha!r}

[dynamics]
f1 = u1 - delta*x1

[payoff]
g = exp(-r*t)*(x1^alpha - u1 - c/2*u1^2)

[derivatives]
df1/dx1 = -delta
df1/du1 = 1
dg/dx1 = exp(-r*t)*alpha*x1^(alpha - 1)
dg/du1 = exp(-r*t)*(-1 - c*u1)

[control]
u1 = {u_lo!r}, {u_hi!r}

[state]
x1 = 0, inf

[initial]
x1 = {x0!r}
t0 = 0
"""

RAMSEY = """\
[dimensions]
n = 1
m = 1

[params]
alpha = {alpha!r}
delta = {delta!r}

[dynamics]
f1 = x1^alpha - u1 - delta*x1

[payoff]
g = log(u1)

[derivatives]
df1/dx1 = alpha*x1^(alpha - 1) - delta
df1/du1 = -1
dg/du1 = 1/u1

[control]
u1 = 0, inf

[state]
x1 = 0, inf

[initial]
x1 = {x0!r}
t0 = 0
"""


def names() -> list:
    return list(PARAM_SCHEMAS)


def _resolve(name: str, params: Optional[dict]) -> dict:
    if name not in PARAM_SCHEMAS:
        raise BenchmarkError(f"unknown benchmark {name!r}; choose from {', '.join(PARAM_SCHEMAS)}")
    schema = PARAM_SCHEMAS[name]
    params = dict(params or {})
    unknown = set(params) - set(schema)
    if unknown:
        raise BenchmarkError(f"unknown parameter(s) for {name}: {sorted(unknown)}")
    out = {k: (float(params[k]) if k in params else v[0]) for k, v in schema.items()}
    return out


def _positive(values: dict, *keys):
    for k in keys:
        if not values[k] > 0:
            raise BenchmarkError(f"{k} must be positive, got {values[k]!r}")


def _unit(values: dict, key):
    if not 0 < values[key] < 1:
        raise BenchmarkError(f"{key} must lie in (0, 1), got {values[key]!r}")


def tobin_steady_state(r: float, delta: float, c: float, alpha: float) -> float:
    """Capital ``x*`` where ``f'(x) = (delta + r)(1 + c*delta*x)`` for ``f = x**alpha``."""

    def gap(x):
        return alpha * x ** (alpha - 1) - (delta + r) * (1 + c * delta * x)

    lo, hi = 1.0, 1.0
    while gap(lo) < 0:
        lo /= 2
    while gap(hi) > 0:
        hi *= 2
    return brentq(gap, lo, hi, xtol=1e-14, rtol=1e-15)


def golden_rule(alpha: float, delta: float) -> float:
    return (alpha / delta) ** (1 / (1 - alpha))


def _oscillator(v):
    b = v["b"]
    if not b >= 0:
        raise BenchmarkError(f"b must be >= 0, got {b!r}")
    prob = parse_problem(OSCILLATOR.format(b=b), name="oscillator")

    def transition(s, t):
        c, sn = math.cos(s - t), math.sin(s - t)
        return np.array([[c, sn], [-sn, c]])

    def field_fn(t, T):
        t = np.asarray(t, dtype=float)
        return np.column_stack([np.cos(T - t) - 1, np.sin(T - t)])

    def integrand(t, T):
        return b + np.sin(T - np.asarray(t, dtype=float))

    if b >= 1:
        expected = (ExpectedVerdict("grad_u", "OO-condition-satisfied", "b >= 1"),)
    else:
        expected = (
            ExpectedVerdict("grad_u", "WOO-condition-satisfied", "0 <= b < 1"),
            ExpectedVerdict("grad_u", "OO violated by some competitor (search)", "0 <= b < 1"),
        )
    return Benchmark(
        "oscillator", v, prob, ControlSignal.constant(1.0, 1, "const:1"), transition, field_fn, integrand,
        expected=expected, competitors=("const:-1", "const:0", f"bang:{math.pi!r}"), T_max=40.0,
    )


def _unbounded(v):
    prob = parse_problem(UNBOUNDED, name="unbounded")
    return Benchmark(
        "unbounded", v, prob, ControlSignal.constant(1.0, 1, "const:1"),
        lambda s, t: np.eye(1),
        lambda t, T: (T - np.asarray(t, dtype=float))[:, None],
        lambda t, T: T - np.asarray(t, dtype=float),
        expected=(ExpectedVerdict("grad_u", "OO-condition-satisfied", "always"),),
        competitors=("const:0", "const:-1", "expr:cos(t)"), T_max=10.0,
    )


def _tobin(v):
    _positive(v, "r", "delta", "c")
    _unit(v, "alpha")
    r, delta, c, alpha = v["r"], v["delta"], v["c"], v["alpha"]
    xs = tobin_steady_state(r, delta, c, alpha)
    steady = v["x0"] is None
    x0 = xs if steady else v["x0"]
    _positive({"x0": x0}, "x0")
    us = delta * xs
    if not v["u_lo"] < us < v["u_hi"]:
        raise BenchmarkError(f"control box [{v['u_lo']}, {v['u_hi']}] must contain the steady investment {us:.6g}")
    v = dict(v, x0=x0)
    prob = parse_problem(TOBIN_Q.format(**v), name="tobin_q")
    q_star = alpha * xs ** (alpha - 1) / (delta + r)
    field_fn = None
    psi = None
    if steady:
        def field_fn(t, T):
            t = np.asarray(t, dtype=float)
            return (np.exp(-r * t) * q_star * (1 - np.exp(-(delta + r) * (T - t))))[:, None]

        psi = ControlSignal.from_expressions([f"{q_star!r}*exp(-{r!r}*t)"], label="psi:q*exp(-rt)")
    return Benchmark(
        "tobin_q", v, prob, ControlSignal.constant(us, 1, f"const:{us:.12g}"),
        lambda s, t: np.array([[math.exp(-delta * (s - t))]]),
        field_fn, None, psi,
        expected=(ExpectedVerdict("psi_gap", "OO-condition-satisfied", "steady-state candidate, bounded competitors"),),
        competitors=(f"const:{v['u_lo']!r}", f"const:{v['u_hi']!r}", f"expr:{us!r} + 0.4*{us!r}*sin(t)"),
        T_max=800.0,
        h=1e-2,
        extras=dict(x_star=xs, u_star=us, q_star=q_star, steady=steady),
    )


def _ramsey(v):
    _positive(v, "delta")
    _unit(v, "alpha")
    alpha, delta = v["alpha"], v["delta"]
    xs = golden_rule(alpha, delta)
    steady = v["x0"] is None
    x0 = xs if steady else v["x0"]
    _positive({"x0": x0}, "x0")
    v = dict(v, x0=x0)
    prob = parse_problem(RAMSEY.format(**v), name="ramsey")
    us = xs ** alpha - delta * xs
    transition = (lambda s, t: np.eye(1)) if steady else None
    return Benchmark(
        "ramsey", v, prob, ControlSignal.constant(us, 1, f"const:{us:.12g}"),
        transition, lambda t, T: np.zeros((np.size(t), 1)), None,
        ControlSignal.constant(1.0 / us, 1, f"psi:1/{us:.12g}"),
        expected=(),
        competitors=(f"const:{0.9 * us!r}", f"expr:{us!r} - 0.5*exp(-0.1*t)"),
        T_max=40.0,
        notes="steady-state candidate is illustrative; the OO condition for this problem is open",
        extras=dict(x_star=xs, u_star=us, steady=steady),
    )


_BUILDERS = {"oscillator": _oscillator, "unbounded": _unbounded, "tobin_q": _tobin, "ramsey": _ramsey}


def load_benchmark(name: str, params: Optional[dict] = None) -> Benchmark:
    """Build a benchmark by name; see the module table for parameters."""
    values = _resolve(name, params)
    return _BUILDERS[name](values)


@dataclass(frozen=True)
class OracleReport:
    max_error: float
    tol: float
    at: tuple

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tol


def oracle_check(bench: Benchmark, numeric, tol: float, t_max: Optional[float] = None) -> OracleReport:
    """Largest ``|J_x numeric - J_x analytic|`` over the field's (t, T) nodes.

    ``t_max`` restricts the ``t`` range (``t <= min(T, t_max)``).
    """
    if bench.field is None:
        raise BenchmarkError(f"{bench.name} has no analytic field for these parameters")
    if numeric.t[0] != bench.problem.t0 or numeric.Ig.shape[1] != bench.problem.state_dim:
        raise BenchmarkError("numeric field was not computed on this benchmark's grid")
    worst, at = 0.0, (math.nan, math.nan)
    for k, T in zip(numeric.T_index, numeric.T):
        J = numeric.values_at_index(int(k))
        t = numeric.t[: int(k) + 1]
        if t_max is not None:
            keep = t <= t_max + 1e-12
            J, t = J[keep], t[keep]
        err = np.max(np.abs(J - bench.field(t, float(T))), axis=1)
        i = int(np.argmax(err))
        if err[i] > worst:
            worst, at = float(err[i]), (float(t[i]), float(T))
    return OracleReport(worst, tol, at)


def describe(name: str) -> str:
    schema = PARAM_SCHEMAS[name]
    if not schema:
        return f"{name}: no parameters"
    items = ", ".join(f"{k}={'x*' if d is None else repr(d)} ({rule})" for k, (d, rule) in schema.items())
    return f"{name}: {items}"
