"""Homodyne temporal-mode tomography: decomposition, reconstruction, statistics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photonshaper.cqed import CqedParams, Variant, adiabatic_coeffs, build_scheme
from photonshaper.homodyne import (
    MultimodeSignalError,
    NoSignalError,
    QuadratureRecords,
    autocorrelation,
    decompose,
    exact_mode_split,
    jacobi_eigh,
    load_records,
    loss_budget,
    photon_stats,
    reconstruct_mode,
    save_records,
    synth_records,
    vacuum_eigenvalue_threshold,
)
from photonshaper.pulses import (
    PulseOptions,
    ShapeSpec,
    TemporalMode,
    emission_control,
    make_shape,
    mode_fidelity,
    resample,
    spin_wave,
)

PAPER = CqedParams(g=4.9, kappa_c=2.4, kappa_l=0.3, gamma=3.03)
GRID = {"t0": -2.0, "dt": 4.0 / 64, "n_bins": 64}


@pytest.fixture(scope="module")
def sech64():
    return make_shape(ShapeSpec(family="sech", t_char=0.5, window=(-2.0, 2.0), n_samples=64))


@pytest.fixture(scope="module")
def chirped_mode():
    scheme = build_scheme(PAPER, -20.0, Variant.THREE_LEVEL)
    coeffs = adiabatic_coeffs(PAPER, scheme)
    target = make_shape(ShapeSpec(family="sech", t_char=0.5, window=(-2.0, 2.0), n_samples=512))
    pulse = emission_control(target, coeffs, PulseOptions(compensate_phase=False))
    traj = spin_wave(pulse, coeffs, PAPER)
    return TemporalMode.from_samples(traj.t0, traj.dt, traj.flux_out)


def test_jacobi_matches_reference_solver():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(48, 48))
    a = a + a.T
    vals, vecs = jacobi_eigh(a)
    ref = np.sort(np.linalg.eigvalsh(a))[::-1]
    assert np.allclose(vals, ref, atol=1e-11)
    assert np.abs(vecs.T @ vecs - np.eye(48)).max() < 1e-12
    assert np.abs(vecs @ np.diag(vals) @ vecs.T - a).max() < 1e-10


def test_jacobi_rejects_asymmetric():
    a = np.arange(16.0).reshape(4, 4)
    with pytest.raises(ValueError, match="symmetric"):
        jacobi_eigh(a)


def test_identity_input_all_unit_eigenvalues():
    dec = decompose(np.eye(12), np.eye(12), dt=0.1)
    assert np.allclose(dec.kappas, 1.0, atol=1e-12)


def test_rank_one_update_spectrum():
    rng = np.random.default_rng(5)
    f = rng.normal(size=20)
    f /= np.linalg.norm(f)
    corr = np.eye(20) + 0.6 * np.outer(f, f)
    dec = decompose(corr, np.eye(20), dt=1.0)
    assert dec.kappas[0] == pytest.approx(1.6, abs=1e-12)
    assert np.allclose(dec.kappas[1:], 1.0, atol=1e-12)
    overlap = abs(np.dot(dec.funcs[0], f))
    assert overlap == pytest.approx(1.0, abs=1e-10)


def test_eigenfunction_dt_orthonormality():
    rng = np.random.default_rng(6)
    a = rng.normal(size=(16, 16))
    dec = decompose(np.eye(16) + 0.1 * (a + a.T), np.eye(16), dt=0.05)
    gram = dec.funcs @ dec.funcs.T * 0.05
    assert np.abs(gram - np.eye(16)).max() < 1e-9


def test_vacuum_records_near_identity():
    rec = synth_records(None, 0.0, 40000, **GRID, seed=0)
    corr = autocorrelation(rec)
    assert np.abs(np.diag(corr) - 1.0).max() < 5 / math.sqrt(40000) * 3
    off = corr - np.diag(np.diag(corr))
    assert np.abs(off).max() < 5 / math.sqrt(40000)


def test_single_trial_duplicated_rank_one():
    rng = np.random.default_rng(1)
    row = rng.normal(size=8)
    rec = QuadratureRecords(t0=0.0, dt=0.1, data=np.tile(row, (5, 1)))
    corr = autocorrelation(rec)
    assert np.allclose(corr, np.outer(row, row), atol=1e-12)


def test_autocorrelation_matches_analytic_covariance(sech64):
    trials = 50000
    rec = synth_records(sech64, 0.3, trials, **GRID, seed=8)
    corr = autocorrelation(rec)
    n1, _, f1, _ = exact_mode_split(sech64, 0.3, **GRID)
    expected = np.eye(64) + 2 * n1 * GRID["dt"] * np.outer(f1, f1)
    assert np.abs(corr - expected).max() < 5 / math.sqrt(trials)


def test_real_mode_single_eigenvalue(sech64):
    trials = 100000
    rec = synth_records(sech64, 0.3, trials, **GRID, seed=9)
    dec = decompose(autocorrelation(rec), np.eye(64), GRID["dt"], t0=GRID["t0"], trials=trials)
    thr = vacuum_eigenvalue_threshold(64, trials)
    assert dec.kappas[0] == pytest.approx(1.6, abs=0.05)
    assert np.sum(dec.kappas > 1.0 + thr) == 1
    rm = reconstruct_mode(dec, threshold=thr)
    assert rm.n2 == 0.0
    assert not rm.ambiguous_sign
    assert np.allclose(rm.samples.imag, 0.0)
    # phase profile defined and zero on the support
    assert np.nanmax(np.abs(rm.phase)) == 0.0


def test_complex_mode_two_eigenvalues(chirped_mode):
    trials = 60000
    rec = synth_records(chirped_mode, 0.3, trials, **GRID, seed=10)
    dec = decompose(autocorrelation(rec), np.eye(64), GRID["dt"], t0=GRID["t0"], trials=trials)
    thr = vacuum_eigenvalue_threshold(64, trials)
    assert np.sum(dec.kappas > 1.0 + thr) == 2
    n_sum = dec.photon_numbers[:2].sum()
    assert n_sum == pytest.approx(0.3, abs=0.03)


def test_exact_covariance_recovery(chirped_mode):
    """decompose on the analytic covariance recovers occupations and mode exactly."""
    n1, n2, f1, f2 = exact_mode_split(chirped_mode, 0.3, **GRID)
    dt = GRID["dt"]
    corr = np.eye(64) + 2 * n1 * dt * np.outer(f1, f1) + 2 * n2 * dt * np.outer(f2, f2)
    dec = decompose(corr, np.eye(64), dt, t0=GRID["t0"])
    assert dec.photon_numbers[0] == pytest.approx(n1, abs=1e-9)
    assert dec.photon_numbers[1] == pytest.approx(n2, abs=1e-9)
    assert abs(abs(np.dot(dec.funcs[0], f1) * dt) - 1.0) < 1e-9
    rm = reconstruct_mode(dec, threshold=1e-6)
    target = resample(chirped_mode, rm.t0, rm.dt, 64)
    fid = max(mode_fidelity(rm.mode, target), mode_fidelity(rm.conjugate().mode, target))
    assert fid == pytest.approx(1.0, abs=1e-9)


def test_reconstructed_mode_normalized(chirped_mode):
    rec = synth_records(chirped_mode, 0.3, 20000, **GRID, seed=12)
    dec = decompose(autocorrelation(rec), np.eye(64), GRID["dt"], t0=GRID["t0"], trials=20000)
    rm = reconstruct_mode(dec, threshold=vacuum_eigenvalue_threshold(64, 20000))
    assert np.sum(np.abs(rm.samples) ** 2) * rm.dt == pytest.approx(1.0, abs=1e-9)
    assert rm.ambiguous_sign


def test_no_signal_error():
    rec = synth_records(None, 0.0, 5000, **GRID, seed=13)
    dec = decompose(autocorrelation(rec), np.eye(64), GRID["dt"], trials=5000)
    with pytest.raises(NoSignalError):
        reconstruct_mode(dec, threshold=vacuum_eigenvalue_threshold(64, 5000))


def test_multimode_error():
    # three independent occupied modes exceed the single-photon assumption
    rng = np.random.default_rng(14)
    fs = np.linalg.qr(rng.normal(size=(16, 3)))[0].T
    corr = np.eye(16)
    for k in range(3):
        corr += 0.8 * np.outer(fs[k], fs[k])
    dec = decompose(corr, np.eye(16), dt=1.0, trials=10**6)
    with pytest.raises(MultimodeSignalError):
        reconstruct_mode(dec, threshold=0.05)


def test_eigenvalue_sum_rule(sech64):
    trials = 50000
    rec = synth_records(sech64, 0.25, trials, **GRID, seed=15)
    dec = decompose(autocorrelation(rec), np.eye(64), GRID["dt"], trials=trials)
    total = dec.kappas.sum()
    expected = 64 + 2 * 0.25
    assert total == pytest.approx(expected, abs=5 * math.sqrt(2 * 64 / trials) + 0.1)


def test_photon_stats_vacuum():
    rec = synth_records(None, 0.0, 20000, **GRID, seed=16)
    # project onto an arbitrary fixed mode shape
    mode = make_shape(ShapeSpec(family="sech", t_char=0.5, window=(-2.0, 2.0), n_samples=64))
    from photonshaper.homodyne import ReconstructedMode

    rm = ReconstructedMode(
        t0=GRID["t0"], dt=GRID["dt"], samples=mode.samples.astype(complex),
        phase=np.zeros(64), n1=0.0, n2=0.0, ambiguous_sign=False,
    )
    stats = photon_stats(rec, rm)
    assert stats.p[0] == pytest.approx(1.0, abs=0.01)


def test_photon_stats_round_trip(sech64):
    trials = 100000
    rec = synth_records(sech64, 0.284, trials, **GRID, seed=17, generator="fock_mixture")
    dec = decompose(autocorrelation(rec), np.eye(64), GRID["dt"], t0=GRID["t0"], trials=trials)
    rm = reconstruct_mode(dec, threshold=vacuum_eigenvalue_threshold(64, trials))
    stats = photon_stats(rec, rm)
    assert stats.p[1] == pytest.approx(0.284, abs=0.02)
    assert stats.p[2] < 0.01
    assert stats.converged
    assert np.all(stats.sigma[:2] < 0.01)


def test_photon_stats_complex_mode(chirped_mode):
    trials = 60000
    rec = synth_records(chirped_mode, 0.3, trials, **GRID, seed=18, generator="fock_mixture")
    dec = decompose(autocorrelation(rec), np.eye(64), GRID["dt"], t0=GRID["t0"], trials=trials)
    rm = reconstruct_mode(dec, threshold=vacuum_eigenvalue_threshold(64, trials))
    stats = photon_stats(rec, rm)
    assert stats.p[1] == pytest.approx(0.3, abs=0.03)


def test_photon_stats_grid_refinement_invariance(sech64):
    """The fitted populations do not depend on the record grid resolution."""
    results = []
    for n_bins in (32, 64):
        dt = 4.0 / n_bins
        rec = synth_records(sech64, 0.25, 60000, -2.0, dt, n_bins, seed=19,
                            generator="fock_mixture")
        dec = decompose(autocorrelation(rec), np.eye(n_bins), dt, t0=-2.0, trials=60000)
        rm = reconstruct_mode(dec, threshold=vacuum_eigenvalue_threshold(n_bins, 60000))
        results.append(photon_stats(rec, rm).p[1])
    assert abs(results[0] - results[1]) < 0.01 + 0.02


def test_estimator_consistency():
    """Median reconstruction fidelity improves monotonically with trials."""
    mode = make_shape(ShapeSpec(family="sech", t_char=0.5, window=(-2.0, 2.0), n_samples=32))
    n_bins, dt = 32, 4.0 / 32
    medians = []
    for trials in (1000, 10000, 100000):
        fids = []
        for seed in range(20):
            rec = synth_records(mode, 0.3, trials, -2.0, dt, n_bins, seed=200 + seed)
            dec = decompose(autocorrelation(rec), np.eye(n_bins), dt, t0=-2.0, trials=trials)
            try:
                rm = reconstruct_mode(
                    dec, threshold=vacuum_eigenvalue_threshold(n_bins, trials)
                )
            except NoSignalError:
                fids.append(0.0)
                continue
            target = resample(mode, rm.t0, rm.dt, n_bins)
            fids.append(
                max(mode_fidelity(rm.mode, target), mode_fidelity(rm.conjugate().mode, target))
            )
        medians.append(float(np.median(fids)))
    assert medians[0] < medians[1] < medians[2]
    assert medians[2] > 0.995


def test_loss_budget_paper_chain():
    chain = [
        ("atom_preparation", 0.74, 0.05),
        ("photon_production", 0.66, 0.0),
        ("fiber_coupling", 0.90, 0.01),
        ("isolator", 0.97, 0.005),
        ("mode_matching", 0.88, 0.01),
        ("photodiode", 0.89, 0.05),
        ("electronic_noise", 0.98, 0.0),
        ("optics", 0.90, 0.01),
    ]
    result = loss_budget(chain)
    assert result.total == pytest.approx(0.295, abs=0.001)


def test_loss_budget_edges():
    assert loss_budget([]).total == 1.0
    assert loss_budget([("one", 0.5)]).total == 0.5
    with pytest.raises(ValueError):
        loss_budget([("bad", 1.5)])


@given(values=st.lists(st.floats(min_value=0.0, max_value=1.0), max_size=8))
@settings(max_examples=60, deadline=None)
def test_loss_budget_bounds(values):
    result = loss_budget([(f"s{i}", v) for i, v in enumerate(values)])
    assert 0.0 <= result.total <= 1.0


def test_records_io_roundtrip(tmp_path, sech64):
    rec = synth_records(sech64, 0.2, 500, **GRID, seed=20)
    for name in ("records.npz", "records.csv"):
        path = tmp_path / name
        save_records(rec, path)
        back = load_records(path)
        assert back.t0 == rec.t0 and back.dt == rec.dt
        assert np.allclose(back.data, rec.data, atol=1e-15)


def test_records_validation():
    with pytest.raises(ValueError):
        QuadratureRecords(t0=0.0, dt=0.1, data=np.array([np.nan, 1.0]).reshape(1, 2))
    with pytest.raises(ValueError):
        synth_records(None, 0.0, 100, 0.0, 0.1, 1, seed=0)
