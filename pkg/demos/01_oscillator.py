"""Oscillator benchmark: when does the constant control stay ahead?

The candidate u = 1 is compared with u = -1.  The condition integral is
K(T) = 2bT + 2(1 - cos T), so it grows without bound for every b > 0.
For b < 1 an oscillating competitor can push K below zero at
arbitrarily large horizons, and the candidate then keeps only the weak
property.  Run with ``python3 demos/01_oscillator.py``.
"""

import numpy as np

from overtake import (
    ControlSignal,
    cauchy_field,
    certify,
    fundamental_matrix,
    integrate_state,
    load_benchmark,
    search_oo_witness,
)
from overtake.certify import aggregate

T_MAX, H = 40.0, 1e-3
T_GRID = np.linspace(1.0, T_MAX, 79)

for b_value in (1.0, 0.5):
    bench = load_benchmark("oscillator", {"b": b_value})
    p = bench.problem
    traj = integrate_state(p, bench.candidate, T_MAX, H)
    field = cauchy_field(p, traj, fundamental_matrix(p, traj), T_GRID)

    # the field has a closed form here, so the numerics can be eyeballed directly
    t = np.array([0.0, 5.0, 10.0])
    print(f"b = {b_value}")
    print("  J_x(t, 20) numeric :", np.round(field.values_at(20.0)[[0, 5000, 10000]], 9).tolist())
    print("  J_x(t, 20) exact   :", np.round(bench.field(t, 20.0), 9).tolist())

    cert = certify(p, traj, [ControlSignal.constant(-1.0, label="const:-1")], "grad_u", field.T, field=field)
    rep = cert.reports[0]
    print(f"  const:-1 -> {rep.verdict.value}, K(40) = {rep.K[-1]:.6f}")

    search = search_oo_witness(p, traj, field, [0.5, 1.0, 2.0])
    overall = aggregate(cert.reports + search.reports)
    print(f"  sweep: {search.describe()}")
    print(f"  overall: {overall.value}\n")
