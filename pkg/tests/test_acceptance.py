"""Acceptance criteria 1-10 at their stated tolerances.

Each criterion records PASS or FAIL; the terminal summary prints one line
per criterion (see ``conftest.pytest_terminal_summary``).
"""

import io
import time
from contextlib import contextmanager

import numpy as np
import pytest

from overtake.adjoint import adjoint_residual, cauchy_field, fundamental_matrix, tobin_q_decomposition
from overtake.bench import load_benchmark, oracle_check
from overtake.certify import (
    Verdict,
    aggregate,
    certify,
    condition_grad_u,
    condition_ham_diff,
    default_probe_spec,
    increment_bound_gap,
    probe_concavity,
    search_oo_witness,
)
from overtake.cli import run
from overtake.integrate import increment_from_trajectories, integrate_state, parse_horizons
from overtake.problem import parse_problem
from overtake.signals import ControlSignal, parse_signal

from conftest import build

RESULTS = {}

TITLES = {
    1: "oscillator field oracle <= 1e-6, runtime < 10 s",
    2: "unbounded field oracle <= 1e-10, K(T) = T^2/2 to 1e-8",
    3: "Ramsey field identically zero",
    4: "Tobin transition to 1e-8, steady-state q to 1e-6",
    5: "verdicts: b=1 OO, b=0.5 WOO with witness or explicit no-witness",
    6: "adjoint residual <= 1e-4 and halving ratio in [2.5, 6]",
    7: "linear-case equivalence: grad_u = ham_diff (1e-10) = Delta J (1e-8)",
    8: "concave case: Delta J >= K_ham_diff - 1e-6",
    9: "probe verdicts linear/concave/not-concave, 1000 samples < 2 s",
    10: "byte-identical CLI CSVs",
}


@contextmanager
def criterion(n, part=""):
    try:
        yield
    except BaseException:
        RESULTS.setdefault(n, []).append((part, False))
        raise
    RESULTS.setdefault(n, []).append((part, True))


def summary_lines():
    lines = []
    for n in sorted(RESULTS):
        parts = RESULTS[n]
        ok = all(p for _, p in parts)
        failed = [name for name, p in parts if not p]
        extra = f" [failing: {', '.join(failed)}; see decisions ledger]" if failed else ""
        lines.append(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {TITLES[n]}{extra}")
    return lines


# -- 1 ------------------------------------------------------------------------


def test_c01_oscillator_oracle():
    with criterion(1):
        start = time.perf_counter()
        b = load_benchmark("oscillator", {"b": 1.0})
        traj = integrate_state(b.problem, b.candidate, 40.0, 1e-3)
        fm = fundamental_matrix(b.problem, traj)
        field = cauchy_field(b.problem, traj, fm, np.arange(0.5, 40.0001, 0.5))
        rep = oracle_check(b, field, 1e-6, t_max=20.0)
        elapsed = time.perf_counter() - start
        assert rep.passed, rep
        assert elapsed < 10.0, elapsed


# -- 2 ------------------------------------------------------------------------


def test_c02_unbounded():
    with criterion(2):
        b, traj, _, f = build("unbounded", T=10.0, T_grid=np.linspace(0.25, 10, 40))
        assert oracle_check(b, f, 1e-10).passed
        rep = condition_grad_u(b.problem, traj, f, ControlSignal.constant(0.0))
        np.testing.assert_allclose(rep.K, rep.T**2 / 2, rtol=0, atol=1e-8)


# -- 3 ------------------------------------------------------------------------


def test_c03_ramsey_zero():
    with criterion(3):
        b, _, _, f = build("ramsey", T=40.0)
        for k in f.T_index:
            assert not np.any(f.values_at_index(int(k)))
        assert oracle_check(b, f, 0.0).max_error == 0.0


# -- 4 ------------------------------------------------------------------------


def test_c04_tobin():
    with criterion(4):
        b, traj, fm, f = build("tobin_q", T=800.0, h=1e-2, T_grid=[400.0, 800.0])
        delta, r = b.params["delta"], b.params["r"]
        assert delta == 0.05
        t_idx = np.arange(0, 20001, 500)
        s_idx = (t_idx[:, None] + np.arange(-5000, 5001, 250)[None, :]).ravel()
        t_rep = np.repeat(t_idx, s_idx.size // t_idx.size)
        keep = s_idx >= 0
        s_idx, t_rep = s_idx[keep], t_rep[keep]
        phi = fm.transition(s_idx, t_rep)[:, 0, 0]
        exact = np.exp(-delta * (fm.t[s_idx] - fm.t[t_rep]))
        np.testing.assert_allclose(phi, exact, rtol=0, atol=1e-8)
        q = tobin_q_decomposition(b.problem, traj, f, r, delta)
        assert q.max_discrepancy <= 1e-6
        early = q.t <= 400.0
        np.testing.assert_allclose(q.q_field[early], b.extras["q_star"], rtol=0, atol=1e-6)


# -- 5 ------------------------------------------------------------------------


def _verdict_run(b_value):
    b = load_benchmark("oscillator", {"b": b_value})
    T_grid = parse_horizons(b.tgrid)
    traj = integrate_state(b.problem, b.candidate, b.T_max, b.h)
    f = cauchy_field(b.problem, traj, fundamental_matrix(b.problem, traj), T_grid)
    comps = [parse_signal(s, 1, box=(b.problem.control_lower, b.problem.control_upper), t_end=b.T_max)
             for s in ("const:-1", "const:0", f"bang:{np.pi!r}")]
    cert = certify(b.problem, traj, comps, "grad_u", f.T, field=f)
    K = cert.reports[0].K
    np.testing.assert_allclose(K, 2 * b_value * f.T + 2 * (1 - np.cos(f.T)), rtol=0, atol=1e-6)
    return b, traj, f, cert


def test_c05_verdict_b1():
    with criterion(5, "b=1"):
        _, _, _, cert = _verdict_run(1.0)
        assert cert.verdict == Verdict.OO
        assert cert.iff


def test_c05_verdict_b_half():
    with criterion(5, "b=0.5"):
        b, traj, f, cert = _verdict_run(0.5)
        search = search_oo_witness(b.problem, traj, f, [0.5, 0.75, 0.9, 1, 1.1, 1.5, 2, 3], T_grid=f.T)
        overall = aggregate(cert.reports + search.reports)
        assert overall != Verdict.OO
        if search.found:
            assert overall == Verdict.WOO
            assert search.witness.verdict == Verdict.WOO
        else:
            assert search.describe().startswith("no witness found")


# -- 6 ------------------------------------------------------------------------


def _residuals(name, T):
    b = load_benchmark(name)
    out = []
    for h in (1e-3, 5e-4):
        traj = integrate_state(b.problem, b.candidate, T, h)
        f = cauchy_field(b.problem, traj, fundamental_matrix(b.problem, traj), [T])
        out.append(adjoint_residual(b.problem, traj, f, T))
    return out


HORIZON = {"oscillator": 40.0, "unbounded": 10.0, "tobin_q": 100.0, "ramsey": 40.0}
DEGENERATE = (
    "the O(h^2) difference error is below double-precision roundoff (or exactly zero), "
    "so the halving ratio is noise; see decisions ledger"
)


@pytest.mark.parametrize("name", list(HORIZON))
def test_c06_residual_bound(name):
    with criterion(6, f"{name} bound"):
        r1, _ = _residuals(name, HORIZON[name])
        assert r1 <= 1e-4


@pytest.mark.parametrize(
    "name",
    [
        "oscillator",
        pytest.param("unbounded", marks=pytest.mark.xfail(strict=True, reason=DEGENERATE)),
        pytest.param("tobin_q", marks=pytest.mark.xfail(strict=True, reason=DEGENERATE)),
        pytest.param("ramsey", marks=pytest.mark.xfail(strict=True, reason=DEGENERATE)),
    ],
)
def test_c06_residual_ratio(name):
    with criterion(6, f"{name} ratio"):
        r1, r2 = _residuals(name, HORIZON[name])
        assert r2 > 0 and 2.5 <= r1 / r2 <= 6


# -- 7 ------------------------------------------------------------------------

LINEAR_FAMILY = [
    "const:-1", "const:0", "const:0.5", "expr:-cos(t)", "expr:sin(3*t)", "pwl:0=-1,4=1,9=0",
    "pwc:0=1,1=-1,2.5=0.25", "bang:2", f"bang:{np.pi!r}",
]


@pytest.mark.parametrize("name, T", [("oscillator", 40.0), ("unbounded", 10.0)])
def test_c07_linear_equivalence(name, T):
    with criterion(7, name):
        b, traj, _, f = build(name, T=T)
        p = b.problem
        for spec in LINEAR_FAMILY:
            if spec.startswith("bang") and not np.all(np.isfinite([p.control_lower, p.control_upper])):
                spec = spec.replace("bang:", "pwc:0=1,") + "=-1"
            u = parse_signal(spec, 1, box=(p.control_lower, p.control_upper), t_end=T)
            alt = integrate_state(p, u, T, traj.h)
            gu = condition_grad_u(p, traj, f, u)
            hd = condition_ham_diff(p, traj, f, (u, alt))
            inc = increment_from_trajectories(traj, alt, gu.T)
            np.testing.assert_allclose(gu.K, hd.K, rtol=0, atol=1e-10, err_msg=spec)
            np.testing.assert_allclose(gu.K, inc.dJ, rtol=0, atol=1e-8, err_msg=spec)


# -- 8 ------------------------------------------------------------------------


def test_c08_concave_inequality(tobin):
    with criterion(8):
        b, traj, _, f = tobin
        p = b.problem
        assert b.params["alpha"] == 0.5
        lo, hi = float(p.control_lower[0]), float(p.control_upper[0])
        rng = np.random.default_rng(20261016)
        specs = []
        for _ in range(3):
            knots = np.sort(rng.choice(np.arange(1, 100), 6, replace=False))
            vals = rng.uniform(lo, hi, 7)
            specs.append("pwc:" + ",".join(f"{int(t)}={float(v)!r}" for t, v in zip([0, *knots], vals)))
        for _ in range(2):
            a, w = float(rng.uniform(lo + 0.2, hi - 0.2)), float(rng.uniform(0.05, 2))
            specs.append(f"expr:{a!r} + 0.15*sin({w!r}*t)")
        for spec in specs:
            u = parse_signal(spec, 1, box=(p.control_lower, p.control_upper), t_end=traj.T)
            gap = increment_bound_gap(p, traj, f, (u, integrate_state(p, u, traj.T, traj.h)))
            assert gap.min() >= -1e-6, spec


# -- 9 ------------------------------------------------------------------------

CONVEX = """[dimensions]
n = 1
m = 1
[dynamics]
f1 = u1
[payoff]
g = x1^2
[derivatives]
df1/du1 = 1
dg/dx1 = 2*x1
[control]
u1 = -1, 1
[initial]
x1 = 0.5
"""


def _timed_probe(p, traj, f):
    spec = default_probe_spec(p, traj, f, count=1000)
    start = time.perf_counter()
    rep = probe_concavity(p, traj, f, spec)
    return rep, time.perf_counter() - start


def test_c09_probe_verdicts(oscillator, tobin):
    with criterion(9):
        b, traj, _, f = oscillator
        rep, dt = _timed_probe(b.problem, traj, f)
        assert rep.verdict == "sampled-linear" and rep.samples == 1000 and dt < 2.0
        b, traj, _, f = tobin
        rep, dt = _timed_probe(b.problem, traj, f)
        assert rep.verdict == "sampled-concave" and rep.samples == 1000 and dt < 2.0
        p = parse_problem(CONVEX)
        traj = integrate_state(p, ControlSignal.constant(0.0), 5.0, 1e-2)
        f = cauchy_field(p, traj, fundamental_matrix(p, traj), [2.5, 5.0])
        rep, dt = _timed_probe(p, traj, f)
        assert rep.verdict == "not-concave" and rep.witness is not None and rep.samples == 1000 and dt < 2.0


# -- 10 -----------------------------------------------------------------------


def test_c10_determinism(tmp_path):
    with criterion(10):
        commands = [
            ["verify", "--bench", "oscillator", "--param", "b=0.5", "--Tgrid", "lin:2:20:10", "--sweep"],
            ["adjoint", "--bench", "tobin_q", "--Tgrid", "list:10,50"],
            ["increment", "--bench", "unbounded"],
            ["concavity", "--bench", "oscillator", "--Tgrid", "list:5,10", "--samples", "200"],
        ]
        for argv in commands:
            blobs = []
            for rep in ("a", "b"):
                out = tmp_path / rep / argv[0]
                code = run([*argv, "--outdir", str(out)], io.StringIO(), io.StringIO())
                assert code in (0, 1, 2)
                blobs.append((out / f"{argv[0]}.csv").read_bytes())
            assert blobs[0] == blobs[1] and blobs[0]
