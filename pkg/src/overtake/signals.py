"""Time signals: candidate and competitor controls, user-supplied adjoints.

Three representations are supported:

``pwc``
    piecewise constant; on ``[t_k, t_{k+1})`` the value of knot ``k`` is used.
``pwl``
    piecewise linear interpolation between knots, constant outside.
``expr``
    closed form, one expression in ``t`` (and parameters) per component.

The competitor mini-grammar understood by :func:`parse_signal`::

    const:<v>              constant (broadcast to every component, or v1;v2;...)
    pwc:<t1=v1,t2=v2,...>  piecewise constant, knot times strictly increasing
    pwl:<t1=v1,t2=v2,...>  piecewise linear
    expr:<e1[;e2...]>      closed form in t
    bang:<period>[@<phase>] bang-bang between the box bounds, upper first
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import expr as ex

KINDS = ("pwc", "pwl", "expr")


class SignalError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """Immutable vector-valued signal of time.

    Calling the signal with a scalar returns shape ``(m,)``; with an array of
    times it returns ``(len(t), m)``.  ``side="left"`` returns left limits,
    which differ from ordinary values only at ``pwc`` knots.
    """

    kind: str
    dim: int
    knots: np.ndarray = field(default_factory=lambda: np.zeros(0))
    values: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    exprs: tuple = ()
    params: Mapping[str, float] = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SignalError(f"unknown signal kind {self.kind!r}")
        if self.kind == "expr":
            if len(self.exprs) != self.dim:
                raise SignalError(f"expected {self.dim} expressions, got {len(self.exprs)}")
            for e in self.exprs:
                bad = ex.free_names(e) - {"t"} - set(self.params)
                if bad:
                    raise SignalError(f"signal expressions may only use t and parameters, got {sorted(bad)}")
            object.__setattr__(self, "_fn", ex.compile_nodes(self.exprs, dict(self.params), vector=True))
            return
        knots = np.array(self.knots, dtype=float).reshape(-1)
        values = np.array(self.values, dtype=float).reshape(len(knots), -1)
        if len(knots) == 0:
            raise SignalError("a tabulated signal needs at least one knot")
        if values.shape[1] != self.dim:
            raise SignalError(f"knot values have {values.shape[1]} components, expected {self.dim}")
        if np.any(np.diff(knots) <= 0):
            raise SignalError("knot times must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise SignalError("knot values must be finite")
        knots.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)

    def __call__(self, t, side: str = "right") -> np.ndarray:
        scalar = np.ndim(t) == 0
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind == "pwc":
            idx = np.searchsorted(self.knots, tt, side="right" if side == "right" else "left") - 1
            out = self.values[np.clip(idx, 0, len(self.knots) - 1)]
        elif self.kind == "pwl":
            out = np.column_stack([np.interp(tt, self.knots, self.values[:, j]) for j in range(self.dim)])
        else:
            with np.errstate(all="ignore"):
                comps = self._fn((), (), tt)
            out = np.empty((tt.size, self.dim))
            for j, c in enumerate(comps):
                out[:, j] = c
        return out[0].copy() if scalar else out

    # -- constructors ----------------------------------------------------------

    @classmethod
    def constant(cls, value, dim: int = 1, label: str = "") -> "ControlSignal":
        v = np.broadcast_to(np.asarray(value, dtype=float), (dim,))
        return cls("pwc", dim, np.zeros(1), v[None, :], label=label or f"const:{_fmt_vec(v)}")

    @classmethod
    def piecewise_constant(cls, knots, values, label: str = "") -> "ControlSignal":
        values = np.asarray(values, dtype=float)
        values = values.reshape(len(knots), -1)
        return cls("pwc", values.shape[1], knots, values, label=label)

    @classmethod
    def piecewise_linear(cls, knots, values, label: str = "") -> "ControlSignal":
        values = np.asarray(values, dtype=float)
        values = values.reshape(len(knots), -1)
        return cls("pwl", values.shape[1], knots, values, label=label)

    @classmethod
    def from_expressions(cls, texts: Sequence[str], params: Optional[Mapping[str, float]] = None, label: str = ""):
        params = dict(params or {})
        nodes = tuple(ex.parse(s, 0, 0, list(params)) for s in texts)
        return cls("expr", len(nodes), exprs=nodes, params=params, label=label or "expr:" + ";".join(texts))

    @classmethod
    def bang_bang(cls, period: float, lower, upper, t0: float, t_end: float, phase: float = 0.0, label: str = ""):
        """Switch between ``upper`` (first half period) and ``lower``.

        ``phase`` shifts the switching pattern forward by that fraction of a period.
        """
        if not period > 0:
            raise SignalError("bang-bang period must be positive")
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise SignalError("bang-bang control needs a finite control box")
        half = 0.5 * period
        start = t0 - (phase % 1.0) * period
        count = int(math.ceil((t_end - start) / half)) + 2
        edges = start + half * np.arange(count)
        keep = edges > t0
        knots = np.concatenate([[t0], edges[keep]])
        first_level = int(np.count_nonzero(~keep) - 1) % 2  # 0 -> upper
        levels = (first_level + np.arange(len(knots))) % 2
        values = np.where(levels[:, None] == 0, upper, lower)
        if not label:
            label = f"bang:{period:.12g}" + (f"@{phase:.12g}" if phase else "")
        return cls("pwc", lower.size, knots, values, label=label)


def _fmt_vec(v) -> str:
    return ";".join(f"{x:.12g}" for x in np.asarray(v).reshape(-1))


_TAG = re.compile(r",(?=\s*(?:const|pwc|pwl|expr|bang):)")


def split_specs(text: str) -> list:
    """Split a comma-separated competitor list without breaking ``pwc:`` knots."""
    return [s.strip() for s in _TAG.split(text) if s.strip()]


def _knot_list(body: str, dim: int):
    knots, values = [], []
    for item in body.split(","):
        if "=" not in item:
            raise SignalError(f"knot {item!r} must look like t=v")
        t, v = item.split("=", 1)
        knots.append(float(t))
        vals = [float(s) for s in v.split(";")]
        if len(vals) == 1:
            vals = vals * dim
        if len(vals) != dim:
            raise SignalError(f"knot value {v!r} needs {dim} components")
        values.append(vals)
    return knots, values


def parse_signal(
    spec: str,
    dim: int,
    params: Optional[Mapping[str, float]] = None,
    box: Optional[tuple] = None,
    t0: float = 0.0,
    t_end: float = 0.0,
) -> ControlSignal:
    """Build a :class:`ControlSignal` from the competitor mini-grammar.

    ``box`` (lower, upper) and the interval ``[t0, t_end]`` are only needed
    for ``bang:`` specs.
    """
    if ":" not in spec:
        raise SignalError(f"signal spec {spec!r} must start with const:, pwc:, pwl:, expr: or bang:")
    tag, body = spec.split(":", 1)
    tag, body = tag.strip(), body.strip()
    try:
        if tag == "const":
            vals = [float(s) for s in body.split(";")]
            if len(vals) not in (1, dim):
                raise SignalError(f"const needs 1 or {dim} values")
            return ControlSignal.constant(vals if len(vals) == dim else vals[0], dim, label=spec)
        if tag in ("pwc", "pwl"):
            knots, values = _knot_list(body, dim)
            cls = ControlSignal.piecewise_constant if tag == "pwc" else ControlSignal.piecewise_linear
            return cls(knots, values, label=spec)
        if tag == "expr":
            texts = body.split(";")
            if len(texts) == 1 and dim > 1:
                texts = texts * dim
            if len(texts) != dim:
                raise SignalError(f"expr needs {dim} components")
            return ControlSignal.from_expressions(texts, params, label=spec)
        if tag == "bang":
            if box is None:
                raise SignalError("bang: needs the control box")
            period, _, phase = body.partition("@")
            return ControlSignal.bang_bang(
                float(period), box[0], box[1], t0, t_end, float(phase) if phase else 0.0, label=spec
            )
    except ex.ExpressionError as err:
        raise SignalError(f"in {spec!r}: {err}") from None
    except ValueError as err:
        if isinstance(err, SignalError):
            raise
        raise SignalError(f"in {spec!r}: {err}") from None
    raise SignalError(f"unknown signal tag {tag!r}")
