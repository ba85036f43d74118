"""Investment with adjustment costs: the adjoint field is discounted marginal q.

At the steady state the Cauchy adjoint J_x(t, T) equals
e^{-rt} q* (1 - e^{-(delta+r)(T-t)}), which tends to the maximum-principle
adjoint e^{-rt} q* as the horizon grows.  The psi_gap condition therefore
vanishes in the tail.  The concavity probe confirms that the Hamiltonian
is concave, so the payoff increment bounds the condition integral.
"""

import numpy as np

from overtake import (
    cauchy_field,
    certify,
    default_probe_spec,
    fundamental_matrix,
    integrate_state,
    load_benchmark,
    parse_signal,
    probe_concavity,
)
from overtake.adjoint import tobin_q_decomposition
from overtake.certify import increment_bound_gap

bench = load_benchmark("tobin_q")
p, r, delta = bench.problem, bench.params["r"], bench.params["delta"]
print(f"steady state x* = {bench.extras['x_star']:.6f}, q* = {bench.extras['q_star']:.6f}")

traj = integrate_state(p, bench.candidate, bench.T_max, bench.h)
field = cauchy_field(p, traj, fundamental_matrix(p, traj), np.linspace(100, bench.T_max, 15))

q = tobin_q_decomposition(p, traj, field, r, delta)
print(f"q from the field vs direct quadrature: max gap {q.max_discrepancy:.2e}")
print(f"q(0) = {q.q_field[0]:.9f}")

box = (p.control_lower, p.control_upper)
comps = [parse_signal(s, 1, box=box, t_end=traj.T) for s in bench.competitors]
cert = certify(p, traj, comps, "psi_gap", field.T, psi=bench.psi, field=field)
print(cert.summary())

probe = probe_concavity(p, traj, field, default_probe_spec(p, traj, field))
print(f"probe: {probe.verdict}, largest eigenvalue {np.max(probe.max_eig):.3e}")
gap = increment_bound_gap(p, traj, field, (comps[2], integrate_state(p, comps[2], traj.T, traj.h)))
print(f"min over T of Delta J - K_ham_diff: {gap.min():.3e}  (nonnegative under concavity)")
