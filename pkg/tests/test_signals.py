import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from overtake.signals import ControlSignal, SignalError, parse_signal, split_specs


def test_constant_and_vector():
    u = parse_signal("const:-1", 1)
    np.testing.assert_array_equal(u(3.0), [-1.0])
    v = parse_signal("const:1;2", 2)
    np.testing.assert_array_equal(v(np.array([0.0, 5.0])), [[1, 2], [1, 2]])


def test_pwc_uses_left_value_between_knots():
    u = parse_signal("pwc:0=1,2=-1,5=0.5", 1)
    np.testing.assert_array_equal(u(np.array([0.0, 1.9, 2.0, 4.0, 5.0, 9.0]))[:, 0], [1, 1, -1, -1, 0.5, 0.5])
    assert u(2.0, side="left")[0] == 1.0


def test_pwl_interpolates():
    u = parse_signal("pwl:0=0,2=1", 1)
    assert u(1.0)[0] == 0.5
    assert u(3.0)[0] == 1.0


def test_expr_with_params():
    u = parse_signal("expr:a*sin(t)", 1, params={"a": 2.0})
    assert u(np.pi / 2)[0] == pytest.approx(2.0)
    with pytest.raises(SignalError):
        parse_signal("expr:x1", 1)


def test_bang_bang_pattern():
    u = parse_signal("bang:2", 1, box=([-1.0], [1.0]), t0=0.0, t_end=5.0)
    np.testing.assert_array_equal(u(np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.5]))[:, 0], [1, 1, -1, -1, 1, -1])
    shifted = parse_signal("bang:2@0.25", 1, box=([-1.0], [1.0]), t0=0.0, t_end=5.0)
    np.testing.assert_array_equal(shifted(np.array([0.0, 0.6, 1.6]))[:, 0], [1, -1, 1])


def test_bang_needs_finite_box():
    with pytest.raises(SignalError):
        parse_signal("bang:1", 1, box=([-np.inf], [1.0]), t_end=3.0)


@pytest.mark.parametrize("spec", ["nope", "foo:1", "const:a", "pwc:0=1,1", "pwc:1=0,0=1", "expr:1 +"])
def test_bad_specs(spec):
    with pytest.raises(SignalError):
        parse_signal(spec, 1)


def test_split_specs_keeps_knots_together():
    assert split_specs("const:-1,pwc:0=1,2=0,expr:cos(t), bang:3.14") == [
        "const:-1", "pwc:0=1,2=0", "expr:cos(t)", "bang:3.14",
    ]


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=8), st.floats(0, 20))
def test_pwc_values_come_from_knots(vals, t):
    knots = np.arange(len(vals), dtype=float) * 2.5
    u = ControlSignal.piecewise_constant(knots, vals)
    k = min(int(t // 2.5), len(vals) - 1)
    assert u(t)[0] == vals[k]
