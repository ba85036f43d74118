import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from overtake.bench import OSCILLATOR, RAMSEY, TOBIN_Q, UNBOUNDED, load_benchmark
from overtake.integrate import integrate_state
from overtake.problem import (
    DerivativeMismatchError,
    DomainError,
    ProblemError,
    ProblemFileError,
    eval_hamiltonian,
    format_problem,
    hamiltonian_linear_in_psi,
    is_admissible,
    parse_problem,
    same_expressions,
)
from overtake.signals import ControlSignal

OSC = OSCILLATOR.format(b=1.0)
TOBIN = TOBIN_Q.format(r=0.05, delta=0.05, c=1.0, alpha=0.5, u_lo=0.0, u_hi=1.0, x0=10.0)


def test_parse_oscillator():
    p = parse_problem(OSC)
    assert (p.state_dim, p.control_dim) == (2, 1)
    np.testing.assert_array_equal(p.f([0.5, 2.0], [1.0], 0.0), [2.0, 0.5])
    assert p.g([0.5, 2.0], [1.0], 0.0) == 3.0


def test_parse_unbounded():
    p = parse_problem(UNBOUNDED)
    assert (p.state_dim, p.control_dim) == (1, 1)
    assert p.control_upper[0] == 1.0 and p.control_lower[0] == -math.inf


def test_wrong_derivative_rejected():
    bad = OSC.replace("dg/dx2 = 1", "dg/dx2 = 1.1")
    with pytest.raises(DerivativeMismatchError):
        parse_problem(bad)


def test_omitted_derivative_rejected():
    bad = OSC.replace("df2/dx1 = -1\n", "")
    with pytest.raises(DerivativeMismatchError):
        parse_problem(bad)


@pytest.mark.parametrize(
    "old,new,line",
    [
        ("[payoff]", "[payof]", 12),
        ("f2 = u1 - x1", "f2 = u1 - x3", 10),
        ("g = x2 + b*u1", "h = x2", 13),
        ("n = 2", "n = 2\nn = 2", 3),
    ],
)
def test_file_errors_have_location(old, new, line):
    with pytest.raises(ProblemFileError) as info:
        parse_problem(OSC.replace(old, new, 1))
    assert info.value.line == line


def test_expression_error_column():
    with pytest.raises(ProblemFileError) as info:
        parse_problem(OSC.replace("f2 = u1 - x1", "f2 = u1 - * x1"))
    assert info.value.line == 10
    assert info.value.column == 11


def test_shape_mismatch():
    with pytest.raises(ProblemError):
        parse_problem(OSC.replace("f2 = u1 - x1\n", ""))


def test_x0_outside_domain():
    with pytest.raises(DomainError):
        parse_problem(TOBIN.replace("x1 = 10.0", "x1 = 0"))


def test_param_override():
    p = parse_problem(OSC, params={"b": 0.25})
    assert p.g([0, 0], [1.0], 0) == 0.25
    with pytest.raises(ProblemError):
        parse_problem(OSC, params={"nope": 1})


def test_hamiltonian_oscillator_value():
    p = parse_problem(OSC)
    h = eval_hamiltonian(p, [0, 0], [1], 0.0, [0, 0], 1.0)
    assert h.value == 1.0
    np.testing.assert_array_equal(h.dHdx, [0.0, 1.0])
    np.testing.assert_array_equal(h.dHdu, [1.0])


def test_hamiltonian_zero_multipliers():
    for p in (parse_problem(OSC), parse_problem(TOBIN)):
        n, m = p.state_dim, p.control_dim
        h = eval_hamiltonian(p, p.x0, np.full(m, 0.3), 1.0, np.zeros(n), 0.0)
        assert h.value == 0.0
        assert not np.any(h.dHdx) and not np.any(h.dHdu)


@pytest.mark.parametrize("x,u,t,psi", [(10.0, 0.5, 0.0, 0.0), (3.0, 0.2, 7.0, 1.3), (20.0, 0.9, 40.0, -0.4)])
def test_hamiltonian_tobin_dHdu(x, u, t, psi):
    p = parse_problem(TOBIN)
    h = eval_hamiltonian(p, [x], [u], t, [psi], 1.0)
    assert h.dHdu[0] == pytest.approx(math.exp(-0.05 * t) * (-1 - u) + psi, rel=1e-14)


def test_hamiltonian_domain_error():
    with pytest.raises(DomainError):
        eval_hamiltonian(parse_problem(TOBIN), [-1.0], [0.5], 0.0, [0.0])


problems = {
    "oscillator": parse_problem(OSC),
    "tobin_q": parse_problem(TOBIN),
    "ramsey": parse_problem(RAMSEY.format(alpha=0.5, delta=0.1, x0=25.0)),
    "unbounded": parse_problem(UNBOUNDED),
}


@settings(max_examples=200, deadline=None)
@given(
    st.sampled_from(sorted(problems)),
    st.floats(0.1, 30),
    st.floats(0.1, 3),
    st.floats(0, 50),
    st.floats(-5, 5),
    st.floats(-5, 5),
    st.floats(0, 2),
)
def test_hamiltonian_linear_in_psi(name, x, u, t, a, b, lam):
    p = problems[name]
    n = p.state_dim
    xs = np.full(n, x)
    u = min(u, p.control_upper[0])
    defect = hamiltonian_linear_in_psi(p, xs, [u], t, np.full(n, a), np.linspace(b, -b, n), lam)
    assert defect <= 1e-12


@pytest.mark.parametrize("name", sorted(problems))
def test_gradients_match_finite_differences(name):
    p = problems[name]
    n, m = p.state_dim, p.control_dim
    rng = np.random.default_rng(7)
    for _ in range(100):
        x = rng.uniform(0.5, 20, n)
        u = rng.uniform(0.1, 1.0, m)
        t = rng.uniform(0, 30)
        psi = rng.normal(size=n)
        h = eval_hamiltonian(p, x, u, t, psi, 1.0)
        z = np.concatenate([x, u])
        grad = np.concatenate([h.dHdx, h.dHdu])
        for i in range(n + m):
            step = 1e-5 * (1 + abs(z[i]))
            zp, zm = z.copy(), z.copy()
            zp[i] += step
            zm[i] -= step
            fp = eval_hamiltonian(p, zp[:n], zp[n:], t, psi).value
            fm = eval_hamiltonian(p, zm[:n], zm[n:], t, psi).value
            fd = (fp - fm) / (2 * step)
            assert abs(fd - grad[i]) <= 1e-5 * max(1.0, abs(fd), abs(grad[i]))


@pytest.mark.parametrize("name", sorted(problems))
def test_format_parse_round_trip(name):
    p = problems[name]
    q = parse_problem(format_problem(p))
    assert same_expressions(p, q)
    assert format_problem(q) == format_problem(p)


def test_admissible_candidate():
    b = load_benchmark("oscillator")
    traj = integrate_state(b.problem, b.candidate, 10.0, 1e-2)
    assert is_admissible(b.problem, b.candidate, traj)


def test_control_out_of_box_at_t0():
    p = problems["oscillator"]
    u = ControlSignal.constant(2.0)
    rep = is_admissible(p, u, integrate_state(p, u, 5.0, 1e-2))
    assert not rep
    assert rep.kind == "control" and rep.time == 0.0 and rep.value == 2.0


def test_ramsey_state_hits_zero():
    p = problems["ramsey"]
    u = ControlSignal.constant(5.0)
    traj = integrate_state(p, u, 40.0, 1e-3)
    rep = is_admissible(p, u, traj)
    assert not rep and rep.kind == "incomplete"

    def hit(t, x):
        return x[0] - 1e-9

    hit.terminal = True
    sol = solve_ivp(lambda t, x: [math.sqrt(max(x[0], 0)) - 5.0 - 0.1 * x[0]], (0, 40), [25.0],
                    events=hit, rtol=1e-12, atol=1e-14)
    assert rep.time == pytest.approx(sol.t_events[0][0], abs=2e-3)
    assert "left the domain" in rep.describe()
