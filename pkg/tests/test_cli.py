import csv
import io

import numpy as np
import pytest

from overtake.cli import EXIT_RUNTIME, EXIT_USAGE, RunConfig, UsageError, run


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_verify_oscillator_oo(tmp_path):
    code, out, _ = call(
        "verify", "--bench", "oscillator", "--param", "b=1", "--variant", "grad_u",
        "--competitors", "const:-1,const:0", "--outdir", str(tmp_path),
    )
    assert code == 0
    assert "OO-condition-satisfied" in out
    assert "# variant: grad_u" in out and "# competitors: const:-1,const:0" in out
    rows = read_csv(tmp_path / "verify.csv")
    assert rows[0] == ["variant", "competitor", "T", "K"]
    for variant, comp, T, K in rows[1:]:
        T, K = float(T), float(K)
        if comp == "const:-1":
            assert K == pytest.approx(2 * T + 2 * (1 - np.cos(T)), abs=1e-6)


def test_adjoint_unbounded_rows(tmp_path):
    code, out, _ = call("adjoint", "--bench", "unbounded", "--Tgrid", "lin:1:10:10", "--outdir", str(tmp_path))
    assert code == 0
    rows = read_csv(tmp_path / "adjoint.csv")
    assert rows[0] == ["t", "T", "Jx_1"]
    assert len(rows) > 10
    for t, T, J in rows[1:]:
        assert float(J) == pytest.approx(float(T) - float(t), abs=1e-10)


def test_increment_and_concavity(tmp_path):
    code, _, _ = call("increment", "--bench", "unbounded", "--Tgrid", "list:2,4", "--competitors", "const:0",
                      "--outdir", str(tmp_path))
    assert code == 0
    rows = read_csv(tmp_path / "increment.csv")
    assert rows[0] == ["competitor", "T", "dJ"]
    assert [float(r[2]) for r in rows[1:]] == pytest.approx([2.0, 8.0], abs=1e-9)
    code, out, _ = call("concavity", "--bench", "oscillator", "--Tgrid", "list:5,10", "--samples", "50",
                        "--outdir", str(tmp_path))
    assert code == 0 and "sampled-linear" in out
    assert read_csv(tmp_path / "concavity.csv")[0][-3:] == ["max_eig", "hess_norm", "tol"]


@pytest.mark.parametrize(
    "argv",
    [
        ["verify"],
        [],
        ["verify", "--bench", "oscillator", "--problem", "x.toml"],
        ["verify", "--bench", "oscillator", "--h", "-1"],
        ["verify", "--bench", "oscillator", "--eps", "0"],
        ["verify", "--bench", "oscillator", "--tail-fraction", "1.5"],
        ["verify", "--bench", "oscillator", "--param", "b"],
        ["verify", "--bench", "oscillator", "--variant", "nope"],
        ["verify", "--bench", "oscillator", "--Tgrid", "lin:1"],
        ["verify", "--bench", "oscillator", "--competitors", "wave:3"],
        ["verify", "--bench", "nosuch"],
        ["frobnicate"],
        ["bench", "show"],
    ],
)
def test_usage_errors(argv):
    code, out, err = call(*argv)
    assert code == EXIT_USAGE
    assert "usage" in err


def test_runtime_errors(tmp_path):
    code, _, err = call("verify", "--problem", str(tmp_path / "missing.ini"), "--candidate", "const:0")
    assert code == EXIT_RUNTIME and err.startswith("error:")
    bad = tmp_path / "bad.ini"
    bad.write_text("[state]\nn = 1\n")
    code, _, _ = call("adjoint", "--problem", str(bad), "--candidate", "const:0")
    assert code == EXIT_RUNTIME


def test_outdir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("OVERTAKE_OUTDIR", str(tmp_path / "env"))
    code, out, _ = call("adjoint", "--bench", "unbounded", "--Tgrid", "list:2")
    assert code == 0
    assert (tmp_path / "env" / "adjoint.csv").exists()
    assert f"# outdir: {tmp_path / 'env'}" in out
    code, _, _ = call("adjoint", "--bench", "unbounded", "--Tgrid", "list:2", "--outdir", str(tmp_path / "flag"))
    assert (tmp_path / "flag" / "adjoint.csv").exists()


def test_byte_identical_outputs(tmp_path):
    argv = ["verify", "--bench", "oscillator", "--param", "b=0.5", "--Tgrid", "lin:2:20:10", "--no-probe"]
    outs = []
    for d in ("a", "b"):
        code, out, _ = call(*argv, "--outdir", str(tmp_path / d))
        assert code in (0, 1, 2)
        outs.append(out.replace(str(tmp_path / d), "OUT"))
    assert (tmp_path / "a" / "verify.csv").read_bytes() == (tmp_path / "b" / "verify.csv").read_bytes()
    assert outs[0] == outs[1]


def test_header_echoes_config(tmp_path):
    code, out, _ = call("verify", "--bench", "unbounded", "--competitors", "const:0", "--Tgrid", "list:1,2",
                        "--eps", "1e-3", "--outdir", str(tmp_path))
    assert code == 0
    header = dict(line[2:].split(": ", 1) for line in out.splitlines() if line.startswith("# ") and ": " in line)
    assert header["eps"] == "0.001"
    assert header["h"] == "0.001"
    assert header["tgrid"] == "list:1,2"
    assert header["candidate"] == "const:1"


def test_bench_list_and_show():
    code, out, _ = call("bench", "list")
    assert code == 0 and out.splitlines()[0].startswith("oscillator")
    code, out, _ = call("bench", "show", "tobin_q", "--param", "r=0.04")
    assert code == 0
    assert "x_star" in out and "psi_gap" in out


def test_run_config_invariants():
    with pytest.raises(UsageError):
        RunConfig("verify")
    with pytest.raises(UsageError):
        RunConfig("verify", bench="oscillator", tail_fraction=0.0)
    assert "# bench: oscillator" in RunConfig("verify", bench="oscillator").header()


def test_help_exits_zero():
    assert call("--help")[0] == 0


def test_sweep_default_prevents_false_oo(tmp_path):
    code, out, _ = call("verify", "--bench", "oscillator", "--param", "b=0.5", "--outdir", str(tmp_path))
    assert code == 0
    assert "overall: WOO-condition-satisfied" in out
    assert "witness search: OO-violating competitor" in out
    code, out, _ = call("verify", "--bench", "oscillator", "--param", "b=0.5", "--no-sweep", "--outdir", str(tmp_path))
    assert "# sweep: off" in out and "witness search" not in out


def test_sweep_skipped_for_unbounded_box(tmp_path):
    code, out, _ = call("verify", "--bench", "unbounded", "--outdir", str(tmp_path))
    assert code == 0
    assert "witness search skipped" in out
