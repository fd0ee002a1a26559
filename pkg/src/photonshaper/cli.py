"""Command-line experiment runner.

Subcommands: sweep-efficiency | shape | emit | select | convert | homodyne |
budget.  Every run validates its config, writes plot-ready CSV/JSON files
into --out and closes with a run manifest carrying config snapshot and
per-output checksums.  Failures exit nonzero with a machine-readable error
JSON on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigurationError, config_digest, load_config
from .cqed import (
    CqedParams,
    Variant,
    adiabatic_coeffs,
    build_scheme,
    efficiency_sweep,
    emission_efficiency,
    load_reference_data,
)
from .homodyne import (
    NoSignalError,
    autocorrelation,
    decompose,
    decomposition_to_json,
    loss_budget,
    photon_stats,
    reconstruct_mode,
    save_records,
    synth_records,
    vacuum_eigenvalue_threshold,
)
from .lindblad import (
    SimConfig,
    build_operators,
    build_space,
    coherent_evolve,
    emission_experiment,
    simresult_summary,
    simresult_to_csv,
)
from .pulses import (
    PulseOptions,
    ShapeSpec,
    TemporalMode,
    emission_control,
    make_shape,
    mode_fidelity,
    mode_to_csv,
    pulse_to_csv,
    resample,
    selection_efficiency,
    spin_wave,
    storage_control,
)

VARIANTS = {
    "one_level": Variant.ONE_LEVEL,
    "two_level": Variant.TWO_LEVEL,
    "three_level": Variant.THREE_LEVEL,
}


def _params(cfg) -> CqedParams:
    c = cfg["cqed"]
    return CqedParams(
        g=c["g_mhz"], kappa_c=c["kappa_c_mhz"],
        kappa_l=c["kappa_l_mhz"], gamma=c["gamma_mhz"],
    )


def _reference(cfg):
    return load_reference_data(cfg.get("reference_data"))


def _variant(cfg) -> Variant:
    return VARIANTS[cfg.get("variant", "three_level")]


def _shape_spec(block, phase_jump_override=None) -> ShapeSpec:
    jump = phase_jump_override
    if jump is None and "phase_jump" in block:
        jump = (block["phase_jump"]["time_us"], block["phase_jump"]["dphi_rad"])
    return ShapeSpec(
        family=block["family"],
        t_char=block.get("t_char_us", 0.0),
        window=tuple(block["window_us"]),
        n_samples=block.get("n_samples", 1024),
        phase_jump=jump,
    )


def _pulse_options(cfg) -> PulseOptions:
    p = cfg.get("pulse", {})
    return PulseOptions(
        compensate_phase=p.get("compensate_phase", True),
        omega_max=p.get("omega_max_mhz", 50.0),
        tail_epsilon=p.get("tail_epsilon", 1e-4),
    )


def _sim_config(cfg) -> SimConfig:
    s = cfg.get("sim", {})
    return SimConfig(
        dt=s.get("dt_us"),
        integrator=s.get("integrator", "rk4"),
        save_points=s.get("save_points", 400),
        drain_margin=s.get("drain_margin_us"),
        use_numba=s.get("use_numba", True),
    )


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, header: list, columns: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(f"{x:.12g}" for x in row) + "\n")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _finish(out_dir: Path, command: str, cfg: dict, seed, t_wall) -> None:
    outputs = {
        p.name: _sha256(p)
        for p in sorted(out_dir.iterdir())
        if p.is_file() and p.name != "manifest.json"
    }
    manifest = {
        "command": command,
        "config": cfg,
        "config_digest": config_digest(cfg),
        "toolkit_version": __version__,
        "seed": seed,
        "wall_clock_s": round(t_wall, 3),
        "outputs": outputs,
    }
    _write_json(out_dir / "manifest.json", manifest)


def cmd_sweep_efficiency(cfg, out, seed, threads):
    params = _params(cfg)
    ref = _reference(cfg)
    sw = cfg["sweep"]
    names = sw.get("variants", ["one_level", "two_level", "three_level"])
    rng = (sw["start_mhz"], sw["stop_mhz"])

    def run(name):
        return name, efficiency_sweep(params, VARIANTS[name], rng, sw["n_points"], ref)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        curves = dict(pool.map(run, names))

    first = curves[names[0]]
    _write_csv(
        out / "efficiency_sweep.csv",
        ["delta_mhz"] + [f"eta_{n}" for n in names],
        [first.deltas] + [curves[n].eta for n in names],
    )

    report = {"variants": names, "errors": {n: list(curves[n].errors) for n in names}}
    offsets = ref.hyperfine_offsets
    for name in names:
        if name == "one_level":
            continue
        cur = curves[name]
        window = (cur.deltas > 0.0) & (cur.deltas < offsets[2])
        if np.any(window):
            idx = np.nanargmin(np.where(window, cur.eta, np.nan))
            report[f"minimum_{name}"] = {
                "delta_mhz": float(cur.deltas[idx]),
                "eta": float(cur.eta[idx]),
            }

    checks = []
    for d in sw.get("lindblad_checks_mhz", []):
        scheme = build_scheme(params, d, _variant(cfg), ref)
        coeffs = adiabatic_coeffs(params, scheme)
        spec = cfg.get("shape")
        shape = _shape_spec(spec) if spec else ShapeSpec(
            family="sech", t_char=0.5, window=(-2.0, 2.0), n_samples=1024
        )
        pulse = emission_control(make_shape(shape), coeffs, _pulse_options(cfg))
        ops = build_operators(build_space(scheme), params, scheme)
        coh = coherent_evolve(ops, _sim_config(cfg), pulse, params)
        checks.append(
            {
                "delta_mhz": d,
                "eta_analytic": emission_efficiency(params, scheme),
                "eta_lindblad_coherent": coh.efficiency,
            }
        )
    if checks:
        report["lindblad_checks"] = checks
    _write_json(out / "sweep_report.json", report)


def cmd_shape(cfg, out, seed, threads):
    params = _params(cfg)
    scheme = build_scheme(params, cfg.get("detuning_mhz", 0.0), _variant(cfg), _reference(cfg))
    coeffs = adiabatic_coeffs(params, scheme)
    mode = make_shape(_shape_spec(cfg["shape"]))
    opts = _pulse_options(cfg)
    pulse = emission_control(mode, coeffs, opts)
    storage = storage_control(mode, coeffs, opts)
    traj = spin_wave(pulse, coeffs, params)

    mode_to_csv(mode, out / "target_mode.csv")
    pulse_to_csv(pulse, out / "emission_pulse.csv")
    pulse_to_csv(storage, out / "storage_pulse.csv")
    _write_csv(
        out / "predicted_flux.csv",
        ["t_us", "re", "im", "abs2"],
        [traj.times, traj.flux_out.real, traj.flux_out.imag, np.abs(traj.flux_out) ** 2],
    )
    _write_json(
        out / "shape_report.json",
        {
            "eta_analytic": emission_efficiency(params, scheme),
            "flux_integral": traj.emitted_energy(),
            "chirp_ratio": coeffs.chirp_ratio,
            "compensated": pulse.compensated,
            "clamp_time_us": pulse.clamp_time,
            "stop_time_us": pulse.stop_time,
            "omega_peak_mhz": float(np.max(np.abs(pulse.omega))),
        },
    )


def cmd_emit(cfg, out, seed, threads):
    params = _params(cfg)
    scheme = build_scheme(params, cfg.get("detuning_mhz", 0.0), _variant(cfg), _reference(cfg))
    coeffs = adiabatic_coeffs(params, scheme)
    mode = make_shape(_shape_spec(cfg["shape"]))
    pulse = emission_control(mode, coeffs, _pulse_options(cfg))
    sim_mode = cfg.get("sim", {}).get("mode", "both")
    report = emission_experiment(
        params, scheme, mode, pulse, config=_sim_config(cfg), mode=sim_mode
    )
    if report.sim is not None:
        simresult_to_csv(report.sim, out / "evolution.csv")
    if report.coherent is not None:
        _write_csv(
            out / "coherent_amplitude.csv",
            ["t_us", "re", "im"],
            [report.coherent.times, report.coherent.amplitude.real, report.coherent.amplitude.imag],
        )
    summary = {
        "eta_analytic": emission_efficiency(params, scheme),
        "efficiency_signal": report.efficiency_signal,
        "efficiency_total": report.efficiency_total,
        "coherent_efficiency": report.coherent_efficiency,
        "incoherent_fraction": report.incoherent_fraction,
        "amplitude_fidelity": report.amplitude_fidelity,
    }
    if report.sim is not None:
        summary.update(simresult_summary(report.sim, report.coherent))
    _write_json(out / "emit_report.json", summary)


def _fit_selectivity(dphi, eta):
    """Least-squares fit of A sin^2(dphi/2 + phi0) + B.

    The argument is half the jump phase: the overlap model gives
    eta0 cos^2(dphi/2), i.e. phi0 = pi/2 for a matched control.
    """
    import warnings as _warnings

    from scipy.optimize import OptimizeWarning, curve_fit

    def model(x, a, phi0, b):
        return a * np.sin(0.5 * x + phi0) ** 2 + b

    amp = float(eta.max() - eta.min())
    # sin^2 peaks where the argument is pi/2: seed from the curve maximum
    phi_seed = 0.5 * math.pi - 0.5 * float(dphi[np.argmax(eta)])
    best = None
    for phi_try in (phi_seed, phi_seed + 0.25 * math.pi, phi_seed - 0.25 * math.pi):
        try:
            with _warnings.catch_warnings():
                # exact model fits leave the covariance singular
                _warnings.simplefilter("ignore", OptimizeWarning)
                popt, _ = curve_fit(
                    model, dphi, eta, p0=(amp, phi_try, float(eta.min()))
                )
        except RuntimeError:
            continue
        resid = float(np.sum((model(dphi, *popt) - eta) ** 2))
        if best is None or resid < best[0]:
            best = (resid, popt)
    if best is None:
        raise RuntimeError("selectivity fit failed")
    a, phi0, b = best[1]
    if a < 0:  # fold the sign ambiguity of the fit
        a, b = -a, b + a
        phi0 += 0.5 * math.pi
    phi0 = math.fmod(phi0, math.pi)
    if phi0 < 0:
        phi0 += math.pi
    return {"A": float(a), "phi0_rad": float(phi0), "B": float(b)}


def cmd_select(cfg, out, seed, threads):
    params = _params(cfg)
    sel = cfg.get("select", {})
    eta0 = sel.get("eta0", _params(cfg).ideal_efficiency ** 2)
    n_phases = sel.get("n_phases", 49)
    block = cfg["shape"]
    base = make_shape(_shape_spec(block, phase_jump_override=None))
    spec0 = _shape_spec(block)
    mid = 0.5 * (spec0.window[0] + spec0.window[1])
    accepted_pi = make_shape(_shape_spec(block, phase_jump_override=(mid, math.pi)))

    dphi = np.linspace(0.0, 2.0 * math.pi, n_phases, endpoint=False)
    eta_input, eta_ctrl = [], []
    for x in dphi:
        inp = make_shape(_shape_spec(block, phase_jump_override=(mid, float(x))))
        eta_input.append(selection_efficiency(inp, base, eta0))
        eta_ctrl.append(selection_efficiency(inp, accepted_pi, eta0))
    eta_input = np.array(eta_input)
    eta_ctrl = np.array(eta_ctrl)

    _write_csv(
        out / "selectivity.csv",
        ["dphi_rad", "eta_input_jump", "eta_control_jump"],
        [dphi, eta_input, eta_ctrl],
    )
    fit_in = _fit_selectivity(dphi, eta_input)
    fit_ctrl = _fit_selectivity(dphi, eta_ctrl)
    _write_json(
        out / "select_report.json",
        {
            "eta0": eta0,
            "fit_input_jump": fit_in,
            "fit_control_jump": fit_ctrl,
            "curve_shift_rad": 2.0 * abs(fit_in["phi0_rad"] - fit_ctrl["phi0_rad"]),
            "eta_input_jump_at_pi": float(
                selection_efficiency(
                    make_shape(_shape_spec(block, phase_jump_override=(mid, math.pi))),
                    base,
                    eta0,
                )
            ),
        },
    )


def cmd_convert(cfg, out, seed, threads):
    params = _params(cfg)
    conv = cfg["convert"]
    variant = _variant(cfg)
    ref = _reference(cfg)
    delta = cfg.get("detuning_mhz", 0.0)
    scheme = build_scheme(params, delta, variant, ref)
    coeffs = adiabatic_coeffs(params, scheme)
    opts = _pulse_options(cfg)

    def stage(t_char):
        spec = ShapeSpec(
            family="sech", t_char=t_char, window=(-4.0 * t_char, 4.0 * t_char),
            n_samples=cfg.get("shape", {}).get("n_samples", 2048),
        )
        mode = make_shape(spec)
        pulse = emission_control(mode, coeffs, opts)
        traj = spin_wave(pulse, coeffs, params)
        return mode, pulse, traj

    mode_in, pulse_in_emit, traj_in = stage(conv["t_in_us"])
    mode_out, pulse_out, traj_out = stage(conv["t_out_us"])
    storage_pulse = storage_control(mode_in, coeffs, opts)

    eta = emission_efficiency(params, scheme)
    eta_store_traj = traj_in.emitted_energy()  # time-reversal: equals emission
    eta_retrieve_traj = traj_out.emitted_energy()
    report = {
        "detuning_mhz": delta,
        "variant": variant.name.lower(),
        "eta_single_pass": eta,
        "total_closed_form": eta * eta,
        "total_trajectory": eta_store_traj * eta_retrieve_traj,
        "stretch_factor": conv["t_out_us"] / conv["t_in_us"],
        "omega_peak_in_mhz": float(np.max(np.abs(storage_pulse.omega))),
        "omega_peak_out_mhz": float(np.max(np.abs(pulse_out.omega))),
    }
    pulse_to_csv(storage_pulse, out / "store_pulse.csv")
    pulse_to_csv(pulse_out, out / "retrieve_pulse.csv")

    if conv.get("validate_lindblad", False):
        t_val = conv.get("validation_t_out_us", 100.0 * conv["t_in_us"])
        mode_v, pulse_v, _ = stage(t_val)
        ops = build_operators(build_space(scheme), params, scheme)
        coh = coherent_evolve(ops, _sim_config(cfg), pulse_v, params)
        emitted = coh.mode()
        target_rs = resample(mode_v, emitted.t0, emitted.dt, emitted.n)
        report["lindblad_validation"] = {
            "t_out_us": t_val,
            "eta_coherent": coh.efficiency,
            "eta_analytic": eta,
            "relative_deviation": abs(coh.efficiency - eta) / eta,
            "mode_fidelity": mode_fidelity(emitted, target_rs),
        }
    _write_json(out / "convert_report.json", report)


def cmd_homodyne(cfg, out, seed, threads):
    params = _params(cfg)
    scheme = build_scheme(params, cfg.get("detuning_mhz", 0.0), _variant(cfg), _reference(cfg))
    coeffs = adiabatic_coeffs(params, scheme)
    hcfg = cfg.get("homodyne", {})
    trials = hcfg.get("trials", 20000)
    n_bins = hcfg.get("n_bins", 32)
    p1 = hcfg.get("p1", 0.3)
    seed = seed if seed is not None else hcfg.get("seed", 0)

    target = make_shape(_shape_spec(cfg["shape"]))
    opts = _pulse_options(cfg)
    opts = PulseOptions(
        compensate_phase=hcfg.get("compensate_phase", opts.compensate_phase),
        omega_max=opts.omega_max,
        tail_epsilon=opts.tail_epsilon,
    )
    pulse = emission_control(target, coeffs, opts)
    traj = spin_wave(pulse, coeffs, params)
    emitted = TemporalMode.from_samples(traj.t0, traj.dt, traj.flux_out)

    t0, t1 = target.t0, target.t0 + target.n * target.dt
    dt = (t1 - t0) / n_bins
    rec = synth_records(
        emitted if p1 > 0 else None, p1, trials, t0, dt, n_bins,
        seed=seed, generator="fock_mixture",
    )
    vac = synth_records(None, 0.0, trials, t0, dt, n_bins, seed=seed + 1)
    dec = decompose(
        autocorrelation(rec), autocorrelation(vac), dt, t0=t0, trials=trials
    )
    report = {
        "trials": trials,
        "n_bins": n_bins,
        "p1": p1,
        "seed": seed,
        "compensate_phase": opts.compensate_phase,
        "eigenvalues": dec.kappas.tolist(),
    }
    if hcfg.get("save_records", False):
        save_records(rec, out / "records.npz")

    threshold = vacuum_eigenvalue_threshold(n_bins, trials)
    try:
        rm = reconstruct_mode(dec, threshold=threshold)
    except NoSignalError:
        report["mode_reported"] = False
        _write_json(out / "decomposition.json", decomposition_to_json(dec))
        _write_json(out / "homodyne_report.json", report)
        return
    report["mode_reported"] = True
    report["n1"] = rm.n1
    report["n2"] = rm.n2
    report["sign_ambiguous"] = rm.ambiguous_sign
    _write_json(out / "decomposition.json", decomposition_to_json(dec, rm))

    target_rs = resample(target, rm.t0, rm.dt, n_bins)
    fid = max(
        mode_fidelity(rm.mode, target_rs),
        mode_fidelity(rm.conjugate().mode, target_rs),
    )
    report["fidelity_to_target"] = fid
    stats = photon_stats(rec, rm)
    report["photon_stats"] = {
        "p0": float(stats.p[0]), "p1": float(stats.p[1]), "p2": float(stats.p[2]),
        "sigma": stats.sigma.tolist(),
    }
    _write_csv(
        out / "reconstructed_mode.csv",
        ["t_us", "re", "im", "phase_rad"],
        [rm.t0 + (np.arange(n_bins) + 0.5) * rm.dt, rm.samples.real, rm.samples.imag, rm.phase],
    )
    _write_json(out / "homodyne_report.json", report)


def cmd_budget(cfg, out, seed, threads):
    stages = [
        (s["name"], s["value"], s.get("error", 0.0)) for s in cfg["budget"]["stages"]
    ]
    result = loss_budget(stages)
    _write_json(
        out / "budget.json",
        {
            "total": result.total,
            "uncertainty": result.uncertainty,
            "stages": [
                {"name": n, "value": v, "error": e} for n, v, e in result.stages
            ],
        },
    )
    with open(out / "budget.csv", "w", encoding="utf-8") as fh:
        fh.write("stage,value,error\n")
        for n, v, e in result.stages:
            fh.write(f"{n},{v:.12g},{e:.12g}\n")
        fh.write(f"TOTAL,{result.total:.12g},{result.uncertainty:.12g}\n")


COMMANDS = {
    "sweep-efficiency": cmd_sweep_efficiency,
    "shape": cmd_shape,
    "emit": cmd_emit,
    "select": cmd_select,
    "convert": cmd_convert,
    "homodyne": cmd_homodyne,
    "budget": cmd_budget,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="photonshaper",
        description="Single-photon temporal-mode shaping toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="RNG seed override")
        p.add_argument("--threads", type=int, default=1, help="worker pool size")
        p.add_argument(
            "--no-compensation", action="store_true",
            help="drop the light-shift phase term (chirped variant)",
        )
    args = parser.parse_args(argv)

    t_start = time.time()
    try:
        cfg = load_config(args.config)
        if args.no_compensation:
            cfg.setdefault("pulse", {})["compensate_phase"] = False
            if "homodyne" in cfg:
                cfg["homodyne"]["compensate_phase"] = False
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out, args.seed, args.threads)
        _finish(out, args.command, cfg, args.seed, time.time() - t_start)
    except Exception as exc:  # noqa: BLE001 - single reporting point
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload), file=sys.stderr)
        return 2 if isinstance(exc, ConfigurationError) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
