"""End-to-end command-line runs: outputs, manifests, determinism, errors."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest
import yaml

from photonshaper.cli import main

BASE = {
    "cqed": {"g_mhz": 4.9, "kappa_c_mhz": 2.4, "kappa_l_mhz": 0.3, "gamma_mhz": 3.03},
    "variant": "three_level",
    "detuning_mhz": -20.0,
    "shape": {
        "family": "sech",
        "t_char_us": 0.5,
        "window_us": [-2.0, 2.0],
        "n_samples": 512,
    },
}

BUDGET_STAGES = [
    {"name": "atom_preparation", "value": 0.74, "error": 0.05},
    {"name": "photon_production", "value": 0.66},
    {"name": "fiber_coupling", "value": 0.90, "error": 0.01},
    {"name": "isolator", "value": 0.97, "error": 0.005},
    {"name": "mode_matching", "value": 0.88, "error": 0.01},
    {"name": "photodiode", "value": 0.89, "error": 0.05},
    {"name": "electronic_noise", "value": 0.98},
    {"name": "optics", "value": 0.90, "error": 0.01},
]


def write_config(tmp_path, extra, name="config.yaml"):
    cfg = json.loads(json.dumps(BASE))
    cfg.update(extra)
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def run_cli(command, config, out):
    code = main([command, "--config", str(config), "--out", str(out)])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    return manifest


def test_budget_command(tmp_path):
    cfg = write_config(tmp_path, {"budget": {"stages": BUDGET_STAGES}})
    out = tmp_path / "out"
    manifest = run_cli("budget", cfg, out)
    report = json.loads((out / "budget.json").read_text())
    assert report["total"] == pytest.approx(0.295, abs=0.001)
    assert "budget.csv" in manifest["outputs"]


def test_budget_via_subprocess(tmp_path):
    cfg = write_config(tmp_path, {"budget": {"stages": BUDGET_STAGES}})
    out = tmp_path / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "photonshaper.cli", "budget",
         "--config", str(cfg), "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "budget.json").exists()


def test_budget_rejects_out_of_range(tmp_path):
    bad = [{"name": "broken", "value": 1.4}]
    cfg = write_config(tmp_path, {"budget": {"stages": bad}})
    code = main(["budget", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code != 0


def test_sweep_command(tmp_path):
    cfg = write_config(
        tmp_path,
        {"sweep": {"start_mhz": -100.0, "stop_mhz": 150.0, "n_points": 51}},
    )
    out = tmp_path / "out"
    run_cli("sweep-efficiency", cfg, out)
    rows = (out / "efficiency_sweep.csv").read_text().splitlines()
    header = rows[0].split(",")
    assert header == ["delta_mhz", "eta_one_level", "eta_two_level", "eta_three_level"]
    assert len(rows) == 52
    data = np.loadtxt(rows[1:], delimiter=",")
    # one-level column is flat, and the interference dip shows up
    assert np.ptp(data[:, 1]) < 1e-9
    report = json.loads((out / "sweep_report.json").read_text())
    assert 0.0 < report["minimum_two_level"]["delta_mhz"] < 156.947


def test_shape_command(tmp_path):
    cfg = write_config(tmp_path, {})
    out = tmp_path / "out"
    manifest = run_cli("shape", cfg, out)
    for name in ("target_mode.csv", "emission_pulse.csv", "storage_pulse.csv",
                 "predicted_flux.csv", "shape_report.json"):
        assert name in manifest["outputs"]
    report = json.loads((out / "shape_report.json").read_text())
    assert report["flux_integral"] == pytest.approx(report["eta_analytic"], rel=0.01)


def test_shape_compensation_flag_changes_phase_only(tmp_path):
    out_on = tmp_path / "on"
    out_off = tmp_path / "off"
    cfg_on = write_config(tmp_path, {"pulse": {"compensate_phase": True}}, "on.yaml")
    run_cli("shape", cfg_on, out_on)
    # the chirped variant via the command-line switch
    code = main(["shape", "--config", str(cfg_on), "--out", str(out_off),
                 "--no-compensation"])
    assert code == 0
    a = np.loadtxt((out_on / "emission_pulse.csv").read_text().splitlines()[2:], delimiter=",")
    b = np.loadtxt((out_off / "emission_pulse.csv").read_text().splitlines()[2:], delimiter=",")
    amp_a = np.hypot(a[:, 1], a[:, 2])
    amp_b = np.hypot(b[:, 1], b[:, 2])
    assert np.allclose(amp_a, amp_b, rtol=1e-9)
    assert not np.allclose(np.arctan2(a[:, 2], a[:, 1]), np.arctan2(b[:, 2], b[:, 1]))


def test_emit_command(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "shape": {"family": "sech", "t_char_us": 0.12,
                      "window_us": [-0.48, 0.48], "n_samples": 512},
            "sim": {"mode": "both", "save_points": 120},
        },
    )
    out = tmp_path / "out"
    manifest = run_cli("emit", cfg, out)
    assert "evolution.csv" in manifest["outputs"]
    assert "coherent_amplitude.csv" in manifest["outputs"]
    report = json.loads((out / "emit_report.json").read_text())
    assert report["efficiency_signal"] >= report["coherent_efficiency"] - 1e-6
    assert report["trace_drift"] < 1e-6
    assert 0.0 <= report["incoherent_fraction"] < 0.2


def test_select_command(tmp_path):
    cfg = write_config(tmp_path, {"select": {"n_phases": 41, "eta0": 0.66}})
    out = tmp_path / "out"
    run_cli("select", cfg, out)
    report = json.loads((out / "select_report.json").read_text())
    assert report["fit_input_jump"]["phi0_rad"] == pytest.approx(math.pi / 2, abs=0.05)
    assert report["fit_input_jump"]["B"] / report["fit_input_jump"]["A"] <= 0.02
    assert report["curve_shift_rad"] == pytest.approx(math.pi, abs=0.05)
    assert report["eta_input_jump_at_pi"] <= 1e-12


def test_convert_command(tmp_path):
    cfg = write_config(
        tmp_path,
        {"variant": "one_level", "detuning_mhz": 0.0,
         "convert": {"t_in_us": 0.5, "t_out_us": 500.0}},
    )
    out = tmp_path / "out"
    run_cli("convert", cfg, out)
    report = json.loads((out / "convert_report.json").read_text())
    assert report["total_closed_form"] == pytest.approx(0.43, abs=0.02)
    assert report["total_trajectory"] == pytest.approx(report["total_closed_form"], rel=0.02)
    # Omega scales as 1/sqrt(stretch)
    ratio = report["omega_peak_in_mhz"] / report["omega_peak_out_mhz"]
    assert ratio == pytest.approx(math.sqrt(report["stretch_factor"]), rel=1e-6)


def test_homodyne_command_and_determinism(tmp_path):
    cfg = write_config(
        tmp_path,
        {"homodyne": {"trials": 5000, "n_bins": 24, "p1": 0.3, "seed": 3}},
    )
    out1, out2 = tmp_path / "a", tmp_path / "b"
    m1 = run_cli("homodyne", cfg, out1)
    m2 = run_cli("homodyne", cfg, out2)
    assert m1["outputs"] == m2["outputs"]  # identical checksums
    report = json.loads((out1 / "homodyne_report.json").read_text())
    assert report["mode_reported"] is True
    assert report["fidelity_to_target"] > 0.9
    assert "photon_stats" in report
    dec = json.loads((out1 / "decomposition.json").read_text())
    assert "eigenvalues" in dec and "reconstructed_mode" in dec
    assert len(dec["reconstructed_mode"]["re"]) == report["n_bins"]


def test_homodyne_vacuum_reports_no_mode(tmp_path):
    cfg = write_config(
        tmp_path,
        {"homodyne": {"trials": 3000, "n_bins": 16, "p1": 0.0, "seed": 1}},
    )
    out = tmp_path / "out"
    run_cli("homodyne", cfg, out)
    report = json.loads((out / "homodyne_report.json").read_text())
    assert report["mode_reported"] is False


def test_manifest_checksums_verify(tmp_path):
    import hashlib

    cfg = write_config(tmp_path, {"budget": {"stages": BUDGET_STAGES}})
    out = tmp_path / "out"
    manifest = run_cli("budget", cfg, out)
    for name, digest in manifest["outputs"].items():
        actual = hashlib.sha256((out / name).read_bytes()).hexdigest()
        assert actual == digest


def test_unitless_field_rejected(tmp_path):
    raw = {
        "cqed": {"g": 4.9, "kappa_c_mhz": 2.4, "kappa_l_mhz": 0.3, "gamma_mhz": 3.03},
    }
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(raw))
    code = main(["budget", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code == 2


def test_error_json_on_failure(tmp_path, capsys):
    path = tmp_path / "missing.yaml"
    code = main(["budget", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code != 0
    err = capsys.readouterr().err.strip()
    payload = json.loads(err.splitlines()[-1])
    assert "error" in payload and "message" in payload


def test_unknown_top_level_key_rejected(tmp_path):
    cfg = dict(BASE)
    cfg["unknown_block"] = {"x": 1}
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(cfg))
    code = main(["budget", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code == 2
