import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from gwilab.cli import run

DATA = Path(__file__).parent / "data"
CONFIGS = Path(__file__).parent.parent / "configs"


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_kernel_u(capsys):
    code, out, _ = call(capsys, "kernel", "u", "--psi", "quadratic:beta=1", "--a", "1", "--lambda", "1")
    assert code == 0
    assert json.loads(out) == {"value": 0.5, "method": "closed", "est_error": 0.0}


def test_kernel_ode_and_csv(capsys):
    code, out, _ = call(capsys, "kernel", "u", "--psi", "quadratic:beta=1", "--a", "1", "--lambda", "1",
                        "--method", "ode", "--format", "csv")
    assert code == 0
    header, row = out.splitlines()
    assert header == "value,method,est_error"
    assert float(row.split(",")[0]) == pytest.approx(0.5, rel=1e-9) and row.split(",")[1] == "ode"


def test_kernel_laplace_and_v(capsys):
    code, out, _ = call(capsys, "kernel", "laplace", "--psi", "quadratic:beta=1", "--phi", "linear:m=2",
                        "--a", "1", "--lambda", "3", "--x0", "1")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(math.exp(-0.75) / 16, rel=1e-12)
    code, out, _ = call(capsys, "kernel", "v", "--psi", "stable:c=1,gamma=1.5", "--a", "2")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(1.0, rel=1e-12)


def test_non_grey_v_is_usage_error(capsys):
    code, _, err = call(capsys, "kernel", "v", "--psi", "finitejump:alpha=1,pairs=1:1", "--a", "1")
    assert code == 2 and "error" in err


def test_mech(capsys):
    code, out, _ = call(capsys, "mech", "psi", "--psi", "stable:c=1,gamma=1.5", "--lambda", "4")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(8.0)
    code, out, _ = call(capsys, "mech", "phi", "--phi", "sizebiased", "--psi", "quadratic:beta=1", "--p", "1", "--q", "3")
    assert json.loads(out)["value"] == pytest.approx(4.0)
    code, out, _ = call(capsys, "mech", "check", "--psi", "quadratic:beta=1")
    assert json.loads(out) == {"subcritical": True, "conservative": True, "grey": True, "uv_continuous": True}


def test_encode_height(capsys):
    code, out, _ = call(capsys, "tree", "encode", str(DATA / "fixture.luk"), "--to", "height")
    assert code == 0 and out == "0 1 2 1\n"
    code, out, _ = call(capsys, "tree", "encode", str(DATA / "fixture.luk"), "--to", "contour")
    assert out == "0 1 2 1 0 1 0\n"
    code, out, _ = call(capsys, "tree", "encode", str(DATA / "fixture.luk"), "--to", "paren")
    assert out == (DATA / "fixture.paren").read_text()
    code, out, _ = call(capsys, "tree", "encode", str(DATA / "fixture.sin"), "--to", "height")
    assert out == "0 1 1 2 3\n"


def test_encode_bare_counts(capsys, tmp_path):
    f = tmp_path / "t.txt"
    f.write_text("2 1 0 0\n")
    code, out, _ = call(capsys, "tree", "encode", str(f), "--to", "height")
    assert code == 0 and out == "0 1 2 1\n"


def test_encode_bad_input(capsys, tmp_path):
    f = tmp_path / "t.luk"
    f.write_text("LUK v1\n2 x\n")
    code, _, err = call(capsys, "tree", "encode", str(f), "--to", "height")
    assert code == 2 and "byte 9" in err
    code, _, _ = call(capsys, "tree", "encode", str(tmp_path / "none.luk"), "--to", "height")
    assert code == 2


def test_tree_check(capsys):
    for name in ("fixture.luk", "fixture.paren", "fixture.sin"):
        code, out, _ = call(capsys, "tree", "check", str(DATA / name))
        assert code == 0 and all(json.loads(out).values())


def test_sample_roundtrip(capsys, tmp_path):
    out_file = tmp_path / "s.sin"
    code, _, _ = call(capsys, "tree", "sample-gwi", "--offspring", "geometric:q=0.6", "--dispatch", "sizebiased",
                      "--depth", "12", "--seed", "5", "--out", str(out_file))
    assert code == 0
    code, out, _ = call(capsys, "tree", "check", str(out_file))
    assert code == 0
    code, out1, _ = call(capsys, "tree", "sample-gw", "--offspring", "geometric:q=0.6", "--seed", "3")
    code, out2, _ = call(capsys, "tree", "sample-gw", "--offspring", "geometric:q=0.6", "--seed", "3")
    assert code == 0 and out1 == out2 and out1.startswith("LUK v1\n")


def test_size_cap_is_runtime_error(capsys):
    code, _, err = call(capsys, "tree", "sample-gw", "--offspring", "dirac:k=2", "--size-cap", "100")
    assert code == 3 and "runtime" in err


def test_usage_errors(capsys):
    assert call(capsys, "verify", "strong-gwi", "--config", "missing.cfg")[0] == 2
    assert call(capsys, "kernel", "u", "--psi", "quadratic:beta=1", "--a", "1", "--lambda", "1", "--bogus")[0] == 2
    assert call(capsys, "kernel", "u", "--psi", "nope", "--a", "1", "--lambda", "1")[0] == 2
    assert call(capsys, "frobnicate")[0] == 2
    assert call(capsys, "verify", "extinction", "--workers", "0")[0] == 2


def test_missing_config_prints_usage(capsys):
    code, out, err = call(capsys, "verify", "strong-gwi", "--config", "missing.cfg")
    assert code == 2 and out == "" and "usage" in err and "missing.cfg" in err


def test_verify_pass_fail_and_config_echo(capsys, tmp_path):
    code, out, _ = call(capsys, "verify", "extinction", "--config", str(CONFIGS / "extinction.cfg"))
    rep = json.loads(out)
    assert code == 0 and rep["passed"]
    assert rep["config"]["p_ladder"] == [10, 100, 1000, 10000] and rep["config"]["seed"] == 1
    f = tmp_path / "tight.cfg"
    f.write_text("[extinction]\nreference = exp(-1)\ntolerance = 1e-6\n")
    code, out, _ = call(capsys, "verify", "extinction", "--config", str(f))
    assert code == 1 and not json.loads(out)["passed"]


def test_verify_csv(capsys):
    code, out, _ = call(capsys, "verify", "size-biased", "--config", str(CONFIGS / "size_biased.cfg"), "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "key,empirical,target,stderr,n,discrete" and len(lines) == 5


def test_workers_do_not_change_output(capsys, tmp_path):
    f = tmp_path / "small.cfg"
    f.write_text("[strong-gwi]\nreplicas = 3000\nblock = 1000\ntolerance = 1\n")
    outs = [call(capsys, "verify", "strong-gwi", "--config", str(f), "--workers", w)[1] for w in ("1", "2")]
    assert outs[0] == outs[1]


def test_committed_configs_resolve():
    from gwilab.limits import read_config

    for name, exp in [("strong_gwi", "strong-gwi"), ("ray_knight", "ray-knight"), ("self_consistency", "self-consistency"),
                      ("size_biased", "size-biased"), ("occupation", "occupation"), ("extinction", "extinction")]:
        read_config(CONFIGS / f"{name}.cfg", exp)


def test_entry_point_subprocess():
    proc = subprocess.run(
        [sys.executable, "-m", "gwilab.cli", "kernel", "u", "--psi", "quadratic:beta=1", "--a", "1", "--lambda", "1"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["value"] == 0.5
    assert "finished" in proc.stderr
