"""Checking a problem of your own, from a problem file.

A linear-quadratic regulator with discounting.  The candidate u = -x is
not optimal, and the grad_u condition finds that out against the
competitor u = -2x.  Because the file declares derivatives by hand, a
typo in dg/dx1 is caught at load time.  The script finishes by showing
the same check through the command line.
"""

import io
import tempfile

import numpy as np

from overtake import cauchy_field, condition_grad_u, fundamental_matrix, integrate_state, parse_problem
from overtake.cli import run
from overtake.problem import DerivativeMismatchError
from overtake.signals import ControlSignal

SOURCE = """
[dimensions]
n = 1
m = 1
[params]
rho = 0.1
[dynamics]
f1 = 0.5*x1 + u1
[payoff]
g = -exp(-rho*t)*(x1^2 + u1^2)
[derivatives]
df1/dx1 = 0.5
df1/du1 = 1
dg/dx1 = -2*exp(-rho*t)*x1
dg/du1 = -2*exp(-rho*t)*u1
[initial]
x1 = 1
"""

try:
    parse_problem(SOURCE.replace("dg/dx1 = -2*", "dg/dx1 = -3*"))
except DerivativeMismatchError as err:
    print("rejected:", err)

p = parse_problem(SOURCE)
# feedback u = -k x closes to x = exp((0.5 - k) t), so both are open-loop signals here
candidate = ControlSignal.from_expressions(["-exp(-0.5*t)"], label="u=-x")
alt = ControlSignal.from_expressions(["-2*exp(-1.5*t)"], label="u=-2x")

traj = integrate_state(p, candidate, 30.0, 1e-3)
field = cauchy_field(p, traj, fundamental_matrix(p, traj), np.linspace(1, 30, 30))
rep = condition_grad_u(p, traj, field, alt)
print(f"{alt.label}: {rep.verdict.value}, tail K in [{rep.tail_min:.4f}, {rep.tail_max:.4f}]")

with tempfile.TemporaryDirectory() as tmp:
    path = f"{tmp}/lqr.ini"
    with open(path, "w") as fh:
        fh.write(SOURCE)
    out = io.StringIO()
    code = run(["verify", "--problem", path, "--candidate", "expr:-exp(-0.5*t)",
                "--competitors", "expr:-2*exp(-1.5*t)", "--Tgrid", "lin:1:30:30", "--outdir", tmp], out)
    print(out.getvalue())
    print("exit code", code)
