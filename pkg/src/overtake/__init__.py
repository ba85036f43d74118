"""Numerical checks of overtaking-optimality conditions for infinite-horizon control.

The central object is the Cauchy adjoint field ``J_x(t, T)``, the adjoint
solution that vanishes at the horizon ``T``.  Condition integrals built from
it are evaluated over growing horizons against competitor controls.
"""

from .adjoint import (
    CauchyAdjointField,
    FundamentalMatrix,
    QCurve,
    adjoint_residual,
    cauchy_field,
    fundamental_matrix,
    tobin_q_decomposition,
)
from .bench import Benchmark, BenchmarkError, load_benchmark, oracle_check
from .certify import (
    Certification,
    ConcavityProbeReport,
    ConditionReport,
    MissingAdjointError,
    ProbeSpec,
    Variant,
    Verdict,
    certify,
    condition_classic,
    condition_grad_u,
    condition_grad_u_batch,
    condition_ham_diff,
    condition_psi_gap,
    default_probe_spec,
    probe_concavity,
    search_oo_witness,
    tail_verdict,
)
from .integrate import (
    IncrementCurve,
    InadmissibleControlError,
    IntegrationError,
    Trajectory,
    finite_horizon_value,
    increment_curve,
    integrate_state,
    parse_horizons,
)
from .problem import (
    ControlProblem,
    DerivativeMismatchError,
    DomainError,
    HamiltonianEval,
    ProblemError,
    ProblemFileError,
    eval_hamiltonian,
    format_problem,
    is_admissible,
    load_problem,
    parse_problem,
)
from .signals import ControlSignal, SignalError, parse_signal

__version__ = "0.1.0"
