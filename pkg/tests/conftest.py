import sys

import numpy as np
import pytest

from overtake.adjoint import cauchy_field, fundamental_matrix
from overtake.bench import load_benchmark
from overtake.integrate import integrate_state


def build(name, params=None, T=None, h=None, T_grid=None):
    b = load_benchmark(name, params)
    T = T or b.T_max
    traj = integrate_state(b.problem, b.candidate, T, h or b.h)
    fm = fundamental_matrix(b.problem, traj)
    grid = T_grid if T_grid is not None else np.linspace(T / 40, T, 40)
    return b, traj, fm, cauchy_field(b.problem, traj, fm, grid)


@pytest.fixture(scope="session")
def oscillator():
    return build("oscillator", {"b": 1.0}, T=40.0)


@pytest.fixture(scope="session")
def oscillator_b0():
    return build("oscillator", {"b": 0.0}, T=40.0)


@pytest.fixture(scope="session")
def unbounded():
    return build("unbounded", T=10.0)


@pytest.fixture(scope="session")
def tobin():
    return build("tobin_q", T=100.0, h=1e-3)


@pytest.fixture(scope="session")
def ramsey():
    return build("ramsey", T=40.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
