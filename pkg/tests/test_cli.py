import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from kamtorus.cli import dumps, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_config(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def pendulum_config(tmp_path, **verify):
    data = yaml.safe_load((CONFIGS / "pendulum.yaml").read_text())
    data["verify"] = {"T": 2.0, "dt": 1e-3, "grid_N": 64, "npoints": 4, **verify}
    return write_config(tmp_path, "pendulum_short.yaml", data)


def run_cli(args, capsys):
    code = main(args)
    return code, capsys.readouterr().out


# -- check-alpha --------------------------------------------------------------------------------


def test_check_alpha_golden(capsys):
    code, out = run_cli(["check-alpha", "--config", str(CONFIGS / "golden_check.yaml")], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# min_margin=0.38196601125")
    assert lines[1] == "k_1,divisor,amplification"
    assert len(lines) == 2 + 8


def test_check_alpha_resonant(capsys):
    code, out = run_cli(["check-alpha", "--config", str(CONFIGS / "resonant.yaml")], capsys)
    assert code == 2
    assert "inf" in out


def test_missing_alpha_is_usage_error(tmp_path, capsys):
    cfg = write_config(tmp_path, "bad.yaml", {"tau": 1.0})
    assert main(["check-alpha", "--config", cfg]) == 64


def test_bad_arguments_are_usage_errors(capsys):
    with pytest.raises(SystemExit) as err:
        main(["run"])
    assert err.value.code == 64
    with pytest.raises(SystemExit) as err:
        main(["frobnicate", "--config", "x"])
    assert err.value.code == 64
    assert main(["run", "--config", "/nonexistent/file.yaml"]) == 64


# -- certificate --------------------------------------------------------------------------------


@pytest.mark.parametrize("name,code,q", [("certificate_ok", 0, 0.08), ("certificate_zero", 0, 0.0),
                                         ("certificate_fail", 5, 4.0)])
def test_certificate_exit_codes(name, code, q, capsys):
    got, out = run_cli(["certificate", "--config", str(CONFIGS / f"{name}.yaml")], capsys)
    rep = json.loads(out)
    assert got == code
    assert rep["q"] == pytest.approx(q, rel=1e-15)
    assert rep["ok"] == (code == 0)


def test_certificate_block_required(capsys):
    assert main(["certificate", "--config", str(CONFIGS / "golden_check.yaml")]) == 64


# -- run / verify -------------------------------------------------------------------------------


def test_run_integrable(tmp_path, capsys):
    data = yaml.safe_load((CONFIGS / "integrable.yaml").read_text())
    data["verify"] = {"T": 1.0, "npoints": 3}
    code, out = run_cli(["run", "--config", write_config(tmp_path, "i.yaml", data)], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["steps"] == [] and rep["outcome"] == "converged"
    assert rep["conjugacy_residual"] <= 1e-12 and rep["invariance_residual"] <= 1e-12


def test_run_too_large_perturbation(capsys):
    code, out = run_cli(["run", "--config", str(CONFIGS / "pendulum_large.yaml")], capsys)
    rep = json.loads(out)
    assert code == 4
    assert rep["failed_precondition"] == "exp_budget"
    assert rep["outcome"] == "precondition_failed"


def test_run_resonant_frequency(capsys):
    code, out = run_cli(["run", "--config", str(CONFIGS / "resonant.yaml")], capsys)
    assert code == 2 and json.loads(out)["outcome"] == "resonance"


def test_run_pendulum_report_and_round_trip(tmp_path, capsys):
    cfg = pendulum_config(tmp_path)
    out1, maps, torus = tmp_path / "a.json", tmp_path / "maps.json", tmp_path / "torus.csv"
    code = main(["run", "--config", cfg, "--out", str(out1), "--maps", str(maps), "--torus", str(torus)])
    assert code == 0
    rep = json.loads(out1.read_text())
    for key in ["config_echo", "steps", "outcome", "fitted_exponent", "conjugacy_residual",
                "invariance_residual", "flow_check", "truncation_debt"]:
        assert key in rep
    assert rep["outcome"] == "converged" and 1 <= len(rep["steps"]) <= 5
    assert rep["verification_passed"] is True
    assert torus.read_text().splitlines()[0] == "theta_1,theta_image_1,r_image_1"

    # byte-identical reruns
    out2 = tmp_path / "b.json"
    assert main(["run", "--config", cfg, "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()

    # the echoed config reproduces the run
    echo = write_config(tmp_path, "echo.yaml", rep["config_echo"])
    out3 = tmp_path / "c.json"
    assert main(["run", "--config", echo, "--out", str(out3)]) == 0
    r3 = json.loads(out3.read_text())
    assert r3["defects"] == rep["defects"] and r3["flow_check"] == rep["flow_check"]

    # verify from the serialized maps
    vout = tmp_path / "v.json"
    assert main(["verify", "--config", cfg, "--maps", str(maps), "--out", str(vout)]) == 0
    ver = json.loads(vout.read_text())
    assert ver["passed"] is True
    assert ver["invariance_residual"] == pytest.approx(rep["invariance_residual"], rel=1e-6, abs=1e-15)
    assert ver["conjugacy_residual"] <= 1e-12


def test_verify_needs_maps(tmp_path):
    assert main(["verify", "--config", pendulum_config(tmp_path)]) == 64


def test_failed_verification_exits_3(tmp_path, capsys):
    cfg = pendulum_config(tmp_path, max_torus_distance=1e-30)
    code, out = run_cli(["run", "--config", cfg], capsys)
    assert code == 3 and json.loads(out)["verification_passed"] is False


def test_exact_conjugate_config(tmp_path, capsys):
    data = yaml.safe_load((CONFIGS / "conjugate.yaml").read_text())
    data["verify"] = {"T": 2.0, "npoints": 4, "grid_N": 64}
    code, out = run_cli(["run", "--config", write_config(tmp_path, "c.yaml", data)], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["conjugacy_residual"] <= 1e-10


def test_dumps_is_stable():
    text = dumps({"a": 0.1, "b": [1.0, 2], "c": {"d": None, "e": [{"f": True}]}, "g": float("inf")})
    assert '"a": 0.10000000000000001' in text
    assert '"b": [1, 2]' in text
    assert '"g": null' in text
    assert json.loads(text)["c"]["e"][0]["f"] is True


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "kamtorus", "check-alpha", "--config",
                           str(CONFIGS / "golden_check.yaml")], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("# min_margin=")
