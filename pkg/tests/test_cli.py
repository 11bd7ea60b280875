"""End-to-end tests for the command-line interface and its exit contract."""

import json
import shutil
import subprocess

import pytest

from sludgesim import cli, io

SINGLE_MODEL = """\
model:
  S0: 12.0
  theta: 5.0
  K_S: 60.0
  R: 0.0
  regimes:
    - {k_m: 8.0, k_d: 0.06, Y: 0.6, sigma1: 0.2, sigma2: 0.2}
integrator:
  dt: 0.01
"""

LAMBDA_QUAD = SINGLE_MODEL + """\
experiment:
  kind: lambda
  method: quadrature
seed: 7
"""

LAMBDA_MC = SINGLE_MODEL + """\
experiment:
  kind: lambda
  method: mc
  burn_in: 5.0
  horizon: 30.0
  replicas: 2
seed: 7
"""

SIMULATE = SINGLE_MODEL + """\
experiment:
  kind: simulate
  horizon: 2.0
  s_init: 12.0
  x_init: 1.0
seed: 7
"""

WASHOUT_STUCK = SINGLE_MODEL + """\
experiment:
  kind: washout
  method: quadrature
  theta_lo: 2.0
  theta_hi: 5.0
seed: 7
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def _run(tmp_path, text, command, *extra, name="run.yaml"):
    cfg = _write(tmp_path, name, text)
    out = tmp_path / "out"
    code = cli.main([command, "--config", str(cfg), "--output", str(out), *extra])
    return code, out


def test_help_exits_cleanly(capsys):
    assert cli.main(["--help"]) == 0
    assert "simulate" in capsys.readouterr().out


def test_lambda_quadrature_run_produces_outputs(tmp_path, capsys):
    code, out = _run(tmp_path, LAMBDA_QUAD, "lambda")
    assert code == cli.EXIT_OK
    assert (out / "lambda.csv").is_file()
    assert (out / "manifest.json").is_file()
    stdout = capsys.readouterr().out
    assert "lambda" in stdout and "wrote" in stdout
    est = io.read_lambda_csv(out / "lambda.csv")
    assert est.value == pytest.approx(0.50844973678225800, rel=1e-10)


def test_simulate_run_renders_a_figure(tmp_path, capsys):
    code, out = _run(tmp_path, SIMULATE, "simulate")
    assert code == cli.EXIT_OK
    assert (out / "trajectory.csv").is_file()
    png = out / "paths.png"
    assert png.is_file()
    assert png.read_bytes()[:4] == b"\x89PNG"


def test_manifest_identifies_the_run(tmp_path, capsys):
    code, out = _run(tmp_path, LAMBDA_QUAD, "lambda")
    assert code == cli.EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["experiment"] == "lambda"
    assert manifest["seed"] == 7
    assert "lambda.csv" in manifest["outputs"]


def test_same_config_and_seed_reproduce_bytes(tmp_path, capsys):
    cfg = _write(tmp_path, "run.yaml", LAMBDA_MC)
    first, second = tmp_path / "a", tmp_path / "b"
    assert cli.main(["lambda", "--config", str(cfg), "--output", str(first)]) == 0
    assert cli.main(["lambda", "--config", str(cfg), "--output", str(second)]) == 0
    assert (first / "lambda.csv").read_bytes() == (second / "lambda.csv").read_bytes()


def test_seed_flag_overrides_config(tmp_path, capsys):
    cfg = _write(tmp_path, "run.yaml", LAMBDA_MC)
    base, reseeded = tmp_path / "a", tmp_path / "b"
    assert cli.main(["lambda", "--config", str(cfg), "--output", str(base)]) == 0
    assert cli.main(["lambda", "--config", str(cfg), "--output", str(reseeded),
                     "--seed", "123"]) == 0
    assert ((base / "lambda.csv").read_bytes()
            != (reseeded / "lambda.csv").read_bytes())
    assert json.loads((reseeded / "manifest.json").read_text())["seed"] == 123


def test_subcommand_must_match_config_kind(tmp_path, capsys):
    code, _ = _run(tmp_path, LAMBDA_QUAD, "washout")
    assert code == cli.EXIT_CONFIG
    assert "invoked as" in capsys.readouterr().err


def test_bad_config_exits_2(tmp_path, capsys):
    code, _ = _run(tmp_path, LAMBDA_QUAD.replace("theta: 5.0", "theta: 0.0"), "lambda")
    assert code == cli.EXIT_CONFIG


def test_missing_config_exits_4(tmp_path, capsys):
    out = tmp_path / "out"
    code = cli.main(["lambda", "--config", str(tmp_path / "absent.yaml"),
                     "--output", str(out)])
    assert code == cli.EXIT_IO


def test_compute_failure_exits_3_with_error_record(tmp_path, capsys):
    code, out = _run(tmp_path, WASHOUT_STUCK, "washout")
    assert code == cli.EXIT_COMPUTE
    assert "NoSignChange" in capsys.readouterr().err
    record = json.loads((out / "error.json").read_text())
    assert record["phase"] == "compute"
    assert record["exit_code"] == cli.EXIT_COMPUTE
    assert record["error"] == "NoSignChange"


def test_console_script_is_installed(tmp_path):
    exe = shutil.which("sludgesim")
    assert exe, "console script 'sludgesim' not on PATH"
    cfg = _write(tmp_path, "run.yaml", LAMBDA_QUAD)
    out = tmp_path / "out"
    proc = subprocess.run(
        [exe, "lambda", "--config", str(cfg), "--output", str(out)],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "lambda.csv").is_file()
