import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from overtake import expr as ex


def ev(text, x=(), u=(), t=0.0, params=None, n=2, m=1):
    params = params or {}
    node = ex.parse(text, n, m, list(params))
    return ex.compile_nodes([node], params)(x, u, t)[0]


def test_precedence_and_associativity():
    assert ev("1 + 2*3") == 7
    assert ev("2^3^2") == 2 ** 9
    assert ev("2**3") == 8
    assert ev("-2^2") == -4
    assert ev("(1 - 2) - 3") == -4
    assert ev("8/4/2") == 1


def test_variables_and_params():
    assert ev("x1*u1 + t + k", x=(2.0, 5.0), u=(3.0,), t=1.5, params={"k": 10.0}) == 17.5


def test_functions():
    assert ev("sin(0) + cos(0) + exp(0) + log(1) + sqrt(4)") == pytest.approx(4.0)


@pytest.mark.parametrize(
    "text,col",
    [("x3", 1), ("1 + ", 4), ("foo(1)", 1), ("1 $ 2", 3), ("u2", 1), ("(1", 3)],
)
def test_errors_carry_column(text, col):
    with pytest.raises(ex.ExpressionError) as info:
        ex.parse(text, 2, 1, ["k"])
    assert info.value.column == col


def test_domain_errors_give_nan_not_exceptions():
    assert math.isnan(ev("log(-1)"))
    assert math.isnan(ev("sqrt(-1)"))
    assert math.isnan(ev("(-8)^0.5"))


def test_vector_mode_matches_scalar():
    node = ex.parse("x1^0.5*exp(-r*t) - u1^2/2", 1, 1, ["r"])
    params = {"r": 0.05}
    sc = ex.compile_nodes([node], params)
    vec = ex.compile_nodes([node], params, vector=True)
    xs = np.linspace(0.1, 5, 7)
    us = np.linspace(-1, 1, 7)
    ts = np.linspace(0, 3, 7)
    got = vec((xs,), (us,), ts)[0]
    want = [sc((a,), (b,), c)[0] for a, b, c in zip(xs, us, ts)]
    np.testing.assert_allclose(got, want, rtol=1e-15)


def test_constant_value():
    node = ex.parse("2*c + 1", 0, 0, ["c"])
    assert ex.constant_value(node, {"c": 3.0}) == 7.0
    with pytest.raises(ValueError):
        ex.constant_value(ex.parse("x1", 1, 0), {})


leaf = st.one_of(
    st.floats(0, 1e3, allow_nan=False).map(lambda v: ex.Num(float(v))),
    st.sampled_from([ex.Var("x", 1), ex.Var("x", 2), ex.Var("u", 1), ex.Var("t", 0), ex.Param("k")]),
)


def _extend(children):
    return st.one_of(
        st.builds(ex.Neg, children),
        st.builds(ex.BinOp, st.sampled_from("+-*/^"), children, children),
        st.builds(ex.Call, st.sampled_from(["sin", "cos", "exp", "log", "sqrt"]), children),
    )


trees = st.recursive(leaf, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(trees)
def test_print_parse_round_trip(tree):
    assert ex.parse(ex.to_text(tree), 2, 1, ["k"]) == tree
