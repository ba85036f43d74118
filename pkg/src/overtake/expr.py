"""Small arithmetic expression language used to declare dynamics and payoffs.

Grammar (whitespace insignificant)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("-" | "+") unary | power
    power  := atom (("^" | "**") unary)?        # right associative
    atom   := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

``FUNC`` is one of ``sin cos exp log sqrt``.  Names resolve to state
variables ``x1..xn``, controls ``u1..um``, time ``t`` or named scalar
parameters; anything else is a parse error.

Parsed trees are immutable and can be printed back to text
(:func:`to_text`) such that ``parse(to_text(tree)) == tree``.  Trees are
compiled to Python callables in two flavours: a scalar kernel built on
:mod:`math` for the sequential integrator loop and a numpy kernel for
vectorized evaluation over grids and sample batches.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class ExpressionError(ValueError):
    """Raised for malformed expressions; carries a 1-based column."""

    def __init__(self, message: str, column: int, text: str = ""):
        self.column = column
        self.text = text
        super().__init__(f"{message} (column {column})")


# -- tree -------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    """State ``x<i>``, control ``u<j>`` (1-based) or time ``t``."""

    kind: str
    index: int = 0


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


Node = Union[Num, Var, Param, Call, Neg, BinOp]

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


# -- tokenizer --------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()]))"
)
_VAR = re.compile(r"^(x|u)([1-9][0-9]*)$")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    end = len(text.rstrip())
    while pos < end:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExpressionError(f"unexpected character {text[col - 1]!r}", col, text)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    tokens.append(("end", "", end + 1))
    return tokens


class _Parser:
    def __init__(self, text, n, m, params):
        self.text = text
        self.n = n
        self.m = m
        self.params = params
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok):
        raise ExpressionError(message, tok[2], self.text)

    def parse(self) -> Node:
        if self.peek()[0] == "end":
            self.fail("empty expression", self.peek())
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}", self.peek())
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Neg(self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] in ("^", "**"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.take()
        kind, value, col = tok
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if value in FUNCTIONS:
                if self.peek()[1] != "(":
                    self.fail(f"function {value!r} needs an argument", self.peek())
                self.take()
                arg = self.expr()
                if self.peek()[1] != ")":
                    self.fail("expected ')'", self.peek())
                self.take()
                return Call(value, arg)
            if value == "t":
                return Var("t")
            vm = _VAR.match(value)
            if vm:
                idx = int(vm.group(2))
                limit = self.n if vm.group(1) == "x" else self.m
                if idx > limit:
                    self.fail(f"{value} exceeds declared dimension {limit}", tok)
                return Var(vm.group(1), idx)
            if value in self.params:
                return Param(value)
            self.fail(f"unknown name {value!r}", tok)
        if kind == "op" and value == "(":
            node = self.expr()
            if self.peek()[1] != ")":
                self.fail("expected ')'", self.peek())
            self.take()
            return node
        if kind == "end":
            self.fail("unexpected end of expression", tok)
        self.fail(f"unexpected {value!r}", tok)


def parse(text: str, n: int = 0, m: int = 0, params: Sequence[str] = ()) -> Node:
    """Parse ``text`` with ``n`` states, ``m`` controls and the given parameter names."""
    return _Parser(text, n, m, frozenset(params)).parse()


# -- printing ---------------------------------------------------------------


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return 5


def to_text(node: Node) -> str:
    """Render ``node`` so that re-parsing reproduces the identical tree."""
    if isinstance(node, Num):
        return repr(node.value) if node.value >= 0 else f"({node.value!r})"
    if isinstance(node, Var):
        return "t" if node.kind == "t" else f"{node.kind}{node.index}"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, Neg):
        inner = to_text(node.operand)
        # "--x" would tokenize fine but "-(-x)" reads better
        if _prec(node.operand) < _PREC["neg"] or isinstance(node.operand, Neg):
            inner = f"({inner})"
        return f"-{inner}"
    p = _PREC[node.op]
    left, right = to_text(node.left), to_text(node.right)
    if node.op == "^":
        # right associative; the exponent is parsed as a unary
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < _PREC["neg"]:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def free_names(node: Node) -> set:
    """Variables and parameters referenced by ``node`` as strings."""
    if isinstance(node, Var):
        return {to_text(node)}
    if isinstance(node, Param):
        return {node.name}
    if isinstance(node, Call):
        return free_names(node.arg)
    if isinstance(node, Neg):
        return free_names(node.operand)
    if isinstance(node, BinOp):
        return free_names(node.left) | free_names(node.right)
    return set()


# -- compilation ------------------------------------------------------------


def _nan_pow(a, b):
    try:
        r = a ** b
    except ZeroDivisionError:
        return math.inf
    except OverflowError:
        return math.inf
    return r if isinstance(r, float) else math.nan


def _nan_log(a):
    if a > 0:
        return math.log(a)
    return -math.inf if a == 0 else math.nan


def _nan_sqrt(a):
    return math.sqrt(a) if a >= 0 else math.nan


def _safe_exp(a):
    try:
        return math.exp(a)
    except OverflowError:
        return math.inf


def _safe_div(a, b):
    try:
        return a / b
    except ZeroDivisionError:
        return math.nan if a == 0 else math.copysign(math.inf, a) * math.copysign(1.0, b)


_SCALAR_ENV = {
    "_sin": math.sin,
    "_cos": math.cos,
    "_exp": _safe_exp,
    "_log": _nan_log,
    "_sqrt": _nan_sqrt,
    "_pow": _nan_pow,
    "_div": _safe_div,
}
_VECTOR_ENV = {
    "_sin": np.sin,
    "_cos": np.cos,
    "_exp": np.exp,
    "_log": np.log,
    "_sqrt": np.sqrt,
    "_pow": np.power,
    "_div": np.divide,
}


def _emit(node: Node, params: Mapping[str, float]) -> str:
    if isinstance(node, Num):
        return f"({node.value!r})"
    if isinstance(node, Var):
        if node.kind == "t":
            return "_t"
        return f"_{node.kind}[{node.index - 1}]"
    if isinstance(node, Param):
        return f"({float(params[node.name])!r})"
    if isinstance(node, Call):
        return f"_{node.func}({_emit(node.arg, params)})"
    if isinstance(node, Neg):
        return f"(-{_emit(node.operand, params)})"
    a, b = _emit(node.left, params), _emit(node.right, params)
    if node.op == "^":
        return f"_pow({a}, {b})"
    if node.op == "/":
        return f"_div({a}, {b})"
    return f"({a} {node.op} {b})"


def compile_nodes(
    nodes: Sequence[Node], params: Mapping[str, float], vector: bool = False
) -> Callable:
    """Compile ``nodes`` into ``fn(x, u, t) -> tuple`` of component values.

    ``x`` and ``u`` are indexable by component.  In vector mode components may
    be numpy arrays of a common shape; constant components come back as
    Python floats and are broadcast by the caller.
    """
    body = ", ".join(_emit(nd, params) for nd in nodes)
    src = f"lambda _x, _u, _t: ({body}{',' if len(nodes) == 1 else ''})"
    env = dict(_VECTOR_ENV if vector else _SCALAR_ENV)
    env["__builtins__"] = {}
    return eval(compile(src, "<overtake-expr>", "eval"), env)


def constant_value(node: Node, params: Mapping[str, float]) -> float:
    """Evaluate an expression that references only parameters."""
    names = free_names(node) - set(params)
    if names:
        raise ValueError(f"expression must be constant, references {sorted(names)}")
    return float(compile_nodes([node], params)((), (), 0.0)[0])
