"""Command-line front end.

::

    overtake verify    (--problem FILE | --bench NAME) [options]
    overtake adjoint   (--problem FILE | --bench NAME) [options]
    overtake concavity (--problem FILE | --bench NAME) [options]
    overtake increment (--problem FILE | --bench NAME) [options]
    overtake bench     list | show NAME

Exit codes: 0 all conditions satisfied, 1 violation found, 2 inconclusive
or certification refused, 64 usage error, 70 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bench as benchlib
from .adjoint import cauchy_field, fundamental_matrix
from .certify import (
    DEFAULT_TAIL_FRACTION,
    Variant,
    aggregate,
    certify,
    default_probe_spec,
    probe_concavity,
    search_oo_witness,
)
from .integrate import DEFAULT_STEP, increment_curve, integrate_state, parse_horizons
from .problem import ProblemError, is_admissible, load_problem
from .signals import SignalError, parse_signal, split_specs

EXIT_OK, EXIT_VIOLATED, EXIT_INCONCLUSIVE = 0, 1, 2
EXIT_USAGE, EXIT_RUNTIME = 64, 70
OUTDIR_ENV = "OVERTAKE_OUTDIR"
DEFAULT_OMEGAS = "0.5,0.75,0.9,1,1.1,1.5,2,3"


class UsageError(Exception):
    pass


def fmt(v) -> str:
    return f"{float(v):.12g}"


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one run; echoed in the report header."""

    subcommand: str
    problem: Optional[str] = None
    bench: Optional[str] = None
    params: tuple = ()
    candidate: Optional[str] = None
    competitors: tuple = ()
    variant: str = "grad_u"
    psi: Optional[str] = None
    tgrid: tuple = ()
    h: Optional[float] = None
    eps: Optional[float] = None
    tail_fraction: float = DEFAULT_TAIL_FRACTION
    outdir: str = "."
    sweep: bool = False
    omegas: tuple = ()
    samples: int = 1000
    mode: Optional[str] = None
    probe: bool = True

    def __post_init__(self):
        if (self.problem is None) == (self.bench is None):
            raise UsageError("exactly one of --problem and --bench is required")
        if self.h is not None and not self.h > 0:
            raise UsageError("--h must be positive")
        if self.eps is not None and not self.eps > 0:
            raise UsageError("--eps must be positive")
        if not 0 < self.tail_fraction < 1:
            raise UsageError("--tail-fraction must lie in (0, 1)")
        if self.samples < 1:
            raise UsageError("--samples must be positive")

    def header(self) -> str:
        items = [
            ("subcommand", self.subcommand),
            ("problem", self.problem),
            ("bench", self.bench),
            ("params", ",".join(f"{k}={v}" for k, v in self.params) or None),
            ("candidate", self.candidate),
            ("competitors", ",".join(self.competitors) or None),
            ("variant", self.variant if self.subcommand == "verify" else None),
            ("psi", self.psi),
            ("tgrid", " ".join(self.tgrid)),
            ("h", fmt(self.h) if self.h is not None else "default"),
            ("outdir", self.outdir),
        ]
        if self.subcommand == "verify":
            items += [
                ("eps", fmt(self.eps) if self.eps is not None else "auto"),
                ("tail_fraction", fmt(self.tail_fraction)),
                ("probe", "on" if self.probe else "off"),
                ("sweep", "on" if self.sweep else "off"),
            ]
        if self.sweep:
            items.append(("omegas", ",".join(self.omegas)))
        if self.subcommand == "concavity":
            items += [("samples", str(self.samples)), ("mode", self.mode)]
        return "\n".join(f"# {k}: {v}" for k, v in items if v is not None)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _param(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter value {value!r} is not a number") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="overtake", description="Check overtaking-optimality conditions via the Cauchy adjoint field.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, competitors=True):
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--problem", help="problem file")
        src.add_argument("--bench", help="benchmark name (see 'bench list')")
        sp.add_argument("--param", action="append", type=_param, default=[], metavar="K=V", help="parameter override")
        sp.add_argument("--candidate", help="candidate control spec (default: the benchmark's)")
        if competitors:
            sp.add_argument(
                "--competitors", action="append", default=[], metavar="SPECS",
                help="comma-separated competitor specs: const:, pwc:, pwl:, expr:, bang:",
            )
        sp.add_argument("--Tgrid", action="append", default=[], metavar="SPEC", help="lin:a:b:n, geo:a:b[:r] or list:T1,T2")
        sp.add_argument("--h", type=float, help=f"integration step (default: the benchmark's, else {DEFAULT_STEP:g})")
        sp.add_argument("--outdir", help=f"output directory (default ${OUTDIR_ENV} or .)")

    v = sub.add_parser("verify", help="evaluate a condition family against competitors")
    common(v)
    v.add_argument("--variant", choices=[x.value for x in Variant], default="grad_u")
    v.add_argument("--psi", help="max-principle adjoint spec (psi_gap, classic)")
    v.add_argument("--eps", type=float, help="tail tolerance (default 1e-6*(1+max|K|))")
    v.add_argument("--tail-fraction", type=float, default=DEFAULT_TAIL_FRACTION)
    v.add_argument(
        "--sweep",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="search oscillating competitors for an OO witness (grad_u, ham_diff; finite control box)",
    )
    v.add_argument("--omegas", default=DEFAULT_OMEGAS, help="sweep frequencies")
    v.add_argument("--no-probe", action="store_true", help="skip the concavity probe")

    a = sub.add_parser("adjoint", help="tabulate J_x(t, T)")
    common(a, competitors=False)

    c = sub.add_parser("concavity", help="probe concavity of the Hamiltonian")
    common(c, competitors=False)
    c.add_argument("--samples", type=int, default=1000)
    c.add_argument("--mode", choices=["joint", "x"], default="joint")

    i = sub.add_parser("increment", help="tabulate Delta J(T) against competitors")
    common(i)

    b = sub.add_parser("bench", help="list or describe benchmarks")
    b.add_argument("action", choices=["list", "show"])
    b.add_argument("name", nargs="?")
    b.add_argument("--param", action="append", type=_param, default=[], metavar="K=V")
    return parser


def _config(args) -> RunConfig:
    outdir = args.outdir or os.environ.get(OUTDIR_ENV) or "."
    comps = tuple(s for chunk in getattr(args, "competitors", []) for s in split_specs(chunk))
    omegas = tuple(w.strip() for w in getattr(args, "omegas", DEFAULT_OMEGAS).split(",") if w.strip())
    return RunConfig(
        subcommand=args.command,
        problem=args.problem,
        bench=args.bench,
        params=tuple(args.param),
        candidate=args.candidate,
        competitors=comps,
        variant=getattr(args, "variant", "grad_u"),
        psi=getattr(args, "psi", None),
        tgrid=tuple(args.Tgrid),
        h=args.h,
        eps=getattr(args, "eps", None),
        tail_fraction=getattr(args, "tail_fraction", DEFAULT_TAIL_FRACTION),
        outdir=outdir,
        sweep=getattr(args, "sweep", False) and getattr(args, "variant", None) in (Variant.GRAD_U, Variant.HAM_DIFF),
        omegas=omegas if getattr(args, "sweep", False) else (),
        samples=getattr(args, "samples", 1000),
        mode=getattr(args, "mode", None),
        probe=not getattr(args, "no_probe", False),
    )


@dataclass
class _Setup:
    problem: object
    bench: Optional[benchlib.Benchmark]
    candidate: object
    T_grid: np.ndarray
    T_max: float


def _setup(cfg: RunConfig) -> tuple[RunConfig, _Setup]:
    params = dict(cfg.params)
    bench = None
    if cfg.bench is not None:
        bench = benchlib.load_benchmark(cfg.bench, params)
        prob = bench.problem
        default_grid, default_h = bench.tgrid, bench.h
    else:
        prob = load_problem(cfg.problem, params=params or None)
        default_grid, default_h = ("geo:1:40", "lin:20:40:41"), DEFAULT_STEP
    tgrid = cfg.tgrid or default_grid
    try:
        T_grid = parse_horizons(tgrid)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if T_grid[0] <= prob.t0:
        raise UsageError("horizon grid must lie after t0")
    T_max = float(T_grid[-1])
    spec = cfg.candidate
    if spec is None:
        if bench is None:
            raise UsageError("--candidate is required with --problem")
        cand = bench.candidate
    else:
        cand = _signal(spec, prob, T_max)
    cfg = RunConfig(
        **{**cfg.__dict__, "tgrid": tuple(tgrid), "candidate": spec or cand.label, "h": cfg.h or default_h}
    )
    return cfg, _Setup(prob, bench, cand, T_grid, T_max)


def _signal(spec, prob, T_max, dim=None):
    try:
        return parse_signal(
            spec, dim or prob.control_dim, prob.params, (prob.control_lower, prob.control_upper), prob.t0, T_max
        )
    except SignalError as exc:
        raise UsageError(str(exc)) from None


def _candidate_field(s: _Setup, h: float):
    traj = integrate_state(s.problem, s.candidate, s.T_max, h)
    adm = is_admissible(s.problem, s.candidate, traj)
    if not adm:
        raise ProblemError(f"candidate {s.candidate.label} is inadmissible: {adm.describe()}")
    fm = fundamental_matrix(s.problem, traj)
    return traj, cauchy_field(s.problem, traj, fm, s.T_grid)


def _write_csv(outdir: str, name: str, header: Sequence[str], rows) -> Path:
    path = Path(outdir)
    path.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    target = path / name
    target.write_text(buf.getvalue(), encoding="utf-8")
    return target


def _competitors(cfg: RunConfig, s: _Setup):
    specs = cfg.competitors
    if not specs and s.bench is not None:
        specs = s.bench.competitors
    return specs, [_signal(c, s.problem, s.T_max) for c in specs]


def cmd_verify(cfg: RunConfig, s: _Setup, out) -> int:
    specs, comps = _competitors(cfg, s)
    cfg = RunConfig(**{**cfg.__dict__, "competitors": tuple(specs)})
    psi = None
    if cfg.psi is not None:
        psi = _signal(cfg.psi, s.problem, s.T_max, dim=s.problem.state_dim)
    elif s.bench is not None and s.bench.psi is not None:
        psi = s.bench.psi
        cfg = RunConfig(**{**cfg.__dict__, "psi": psi.label})
    print(cfg.header(), file=out)
    traj, fld = _candidate_field(s, cfg.h)
    cert = certify(
        s.problem, traj, comps, cfg.variant, fld.T, cfg.eps, cfg.tail_fraction, psi, fld, probe=cfg.probe,
    )
    search = None
    bounded = np.all(np.isfinite(s.problem.control_lower)) and np.all(np.isfinite(s.problem.control_upper))
    if cfg.sweep and not bounded:
        cert = replace(cert, notes=cert.notes + ("witness search skipped: the control box is unbounded",))
    if cfg.sweep and bounded and not cert.refused:
        try:
            omegas = [float(w) for w in cfg.omegas]
        except ValueError:
            raise UsageError("--omegas must be comma-separated numbers") from None
        search = search_oo_witness(s.problem, traj, fld, omegas, cfg.variant, fld.T, cfg.eps, cfg.tail_fraction)
        reports = cert.reports + search.reports
        cert = replace(cert, reports=reports, verdict=aggregate(reports))
    print(cert.summary(), file=out)
    if search is not None:
        print(f"witness search: {search.describe()}", file=out)
    rows = [(r.variant.value, r.competitor, T, K) for r in cert.reports for T, K in zip(r.T, r.K)]
    path = _write_csv(cfg.outdir, "verify.csv", ["variant", "competitor", "T", "K"], rows)
    print(f"# wrote {path}", file=out)
    return cert.exit_code


def cmd_adjoint(cfg: RunConfig, s: _Setup, out) -> int:
    print(cfg.header(), file=out)
    _, fld = _candidate_field(s, cfg.h)
    n = s.problem.state_dim
    rows = fld.table()
    path = _write_csv(cfg.outdir, "adjoint.csv", ["t", "T"] + [f"Jx_{i + 1}" for i in range(n)], rows)
    print(f"J_x(t, T) on {len(fld.T)} horizons, {len(rows)} rows", file=out)
    print(f"# wrote {path}", file=out)
    return EXIT_OK


def cmd_concavity(cfg: RunConfig, s: _Setup, out) -> int:
    print(cfg.header(), file=out)
    traj, fld = _candidate_field(s, cfg.h)
    spec = default_probe_spec(s.problem, traj, fld, count=cfg.samples, mode=cfg.mode)
    rep = probe_concavity(s.problem, traj, fld, spec)
    print(f"verdict: {rep.verdict}", file=out)
    print(f"max eigenvalue: {fmt(np.max(rep.max_eig))}", file=out)
    print(f"T probed: {' '.join(fmt(T) for T in rep.T_probed)}", file=out)
    print("note: concavity is checked only on the probed horizons; no bound on T1 is derived", file=out)
    if rep.witness is not None:
        w = rep.witness
        print(
            f"witness: x=({', '.join(fmt(v) for v in w['x'])}) u=({', '.join(fmt(v) for v in w['u'])}) "
            f"t={fmt(w['t'])} T={fmt(w['T'])} eigenvalue={fmt(w['eigenvalue'])}",
            file=out,
        )
    n, m = s.problem.state_dim, s.problem.control_dim
    pts = rep.points
    header = ["t", "T"] + [f"x{i + 1}" for i in range(n)] + [f"u{j + 1}" for j in range(m)] + ["max_eig", "hess_norm", "tol"]
    rows = [
        (pts["t"][k], pts["T"][k], *pts["x"][k], *pts["u"][k], rep.max_eig[k], rep.hess_norm[k], rep.tol[k])
        for k in range(rep.samples)
    ]
    path = _write_csv(cfg.outdir, "concavity.csv", header, rows)
    print(f"# wrote {path}", file=out)
    return EXIT_OK if rep.concave else EXIT_INCONCLUSIVE


def cmd_increment(cfg: RunConfig, s: _Setup, out) -> int:
    specs, comps = _competitors(cfg, s)
    cfg = RunConfig(**{**cfg.__dict__, "competitors": tuple(specs)})
    print(cfg.header(), file=out)
    rows = []
    for spec, u in zip(specs, comps):
        inc = increment_curve(s.problem, s.candidate, u, s.T_grid, cfg.h)
        rows += [(spec, T, d) for T, d in zip(inc.T, inc.dJ)]
        print(f"  {spec}: Delta J(T_max) = {fmt(inc.dJ[-1])}", file=out)
    path = _write_csv(cfg.outdir, "increment.csv", ["competitor", "T", "dJ"], rows)
    print(f"# wrote {path}", file=out)
    return EXIT_OK


def cmd_bench(args, out) -> int:
    if args.action == "list":
        for name in benchlib.names():
            print(benchlib.describe(name), file=out)
        return EXIT_OK
    if args.name is None:
        raise UsageError("bench show needs a benchmark name")
    b = benchlib.load_benchmark(args.name, dict(args.param))
    print(benchlib.describe(b.name), file=out)
    print(f"candidate: {b.candidate.label}", file=out)
    print(f"default competitors: {', '.join(b.competitors)}", file=out)
    for e in b.expected:
        print(f"expected ({e.variant}, {e.precondition}): {e.verdict}", file=out)
    if b.notes:
        print(f"note: {b.notes}", file=out)
    for k, v in sorted(b.extras.items()):
        print(f"{k}: {fmt(v) if isinstance(v, float) else v}", file=out)
    return EXIT_OK


_COMMANDS = {"verify": cmd_verify, "adjoint": cmd_adjoint, "concavity": cmd_concavity, "increment": cmd_increment}


def run(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    """Run the CLI and return the exit code instead of exiting."""
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage())
        if args.command == "bench":
            return cmd_bench(args, out)
        cfg, setup = _setup(_config(args))
        return _COMMANDS[args.command](cfg, setup, out)
    except UsageError as exc:
        print(f"usage error: {exc}".rstrip(), file=err)
        return EXIT_USAGE
    except benchlib.BenchmarkError as exc:
        print(f"usage error: {exc}", file=err)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (ProblemError, ValueError, ArithmeticError, np.linalg.LinAlgError, OSError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run())
