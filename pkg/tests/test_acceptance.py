"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line PASS/FAIL verdict; the lines are printed in the
terminal summary (and to stdout when run with ``-s``).
"""

import math
import sys
import time

import numpy as np
import pytest

from twpa_studio.cli import main as cli_main
from twpa_studio.cme import (
    CoupledModeParams,
    analytic_undepleted_gain,
    bandwidth_above,
    compression_curve,
    degenerate_quadrature_gains,
    gain_spectrum,
    integrate_modes,
    manley_rowe_violation,
)
from twpa_studio.dispersion import bloch_dispersion
from twpa_studio.measurement import (
    calibrate,
    added_noise,
    fit_noise_model,
    iq_quadrature_noise,
    simulate_noise_measurement,
    squeezing_analysis,
    twpa_off,
)
from twpa_studio.measurement import TraceConfig
from twpa_studio.noise import pump_heating_excess

VERDICTS = {}


def record(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS[n] = line
    print(line)
    return ok


@pytest.fixture(scope="module")
def preset_curve(preset_config):
    return bloch_dispersion(preset_config.dispersion_grid.grid(), preset_config.device,
                            preset_config.operating_point.I_DC)


@pytest.fixture(scope="module")
def oracle_runs():
    """Lossless, Kerr-free propagations against the closed-form gain."""
    rng = np.random.default_rng(2024)
    I_p, seed = 1e-4, 1e-10
    runs = []
    t0 = time.perf_counter()
    targets = []
    for _ in range(96):
        L = rng.uniform(0.02, 0.2)
        gL = rng.uniform(0.0, 4.14)
        targets.append((gL / L, rng.uniform(0.0, 3.0) * gL / L, L))
    # gamma -> 0 from both sides and exactly at the boundary
    for eps in (0.0, 1e-9, -1e-9, 1e-5):
        targets.append((20.0, 40.0 * (1 + eps), 0.1))
    for g, db, L in targets:
        bs, bi = rng.uniform(100, 2000, size=2)
        kappa = g / (I_p * math.sqrt(bs * bi))
        p = CoupledModeParams(beta_p=bs + bi, beta_s=bs, beta_i=bi, delta_beta=db,
                              kappa=kappa, sigma=0.0, length=L)
        m = integrate_modes(p, (I_p, seed, 0.0), z_points=41)
        G = abs(m.a_s[-1]) ** 2 / seed ** 2
        runs.append((G, analytic_undepleted_gain(g, db, L),
                     manley_rowe_violation(m, (p.beta_p, p.beta_s, p.beta_i))))
    return runs, time.perf_counter() - t0


def test_criterion_01_solver_matches_oracle(oracle_runs):
    runs, elapsed = oracle_runs
    err = max(abs(G - Gx) / Gx for G, Gx, _ in runs)
    top = max(10 * math.log10(Gx) for _, Gx, _ in runs)
    ok = record(1, len(runs) >= 100 and err < 1e-6 and elapsed < 10,
                f"{len(runs)} triples up to {top:.1f} dB, worst rel err {err:.2e}, {elapsed:.2f} s")
    assert ok


def test_criterion_02_manley_rowe(oracle_runs):
    runs, _ = oracle_runs
    worst = max(v for *_, v in runs)
    assert record(2, worst < 1e-6, f"worst photon-flux violation {worst:.2e}")


def test_criterion_03_quantum_limit_round_trip(preset_config, preset_curve):
    t0 = time.perf_counter()
    nu = preset_config.noise_grid.grid()
    spec = gain_spectrum(preset_config.operating_point, preset_curve, preset_config.device, nu)
    G = np.maximum(spec.gain, 1.0)
    run = simulate_noise_measurement(nu, G, preset_config.chain, seed=preset_config.seed)
    band = 10 * np.log10(G) >= preset_config.noise_run.band_min_gain_db
    dev = np.abs(run.added - run.quantum_limit)[band]
    elapsed = time.perf_counter() - t0
    ok = record(3, dev.mean() < 0.02 and elapsed < 60,
                f"mean |A-QL| {dev.mean():.4f} (max {dev.max():.4f}) quanta over "
                f"{band.sum()} band points, {elapsed:.1f} s")
    assert ok


def test_criterion_04_degenerate_product_law(preset_config, preset_curve):
    sq = preset_config.squeeze
    rows = []
    for I_p in np.linspace(0.0, sq.max_pump_current, 12):
        op = preset_config.operating_point.replace(f_pump=sq.f_pump, I_pump=float(I_p))
        q = degenerate_quadrature_gains(op, preset_curve, preset_config.device, lossless=True)
        rows.append((10 * math.log10(q.G_a), 10 * math.log10(q.G_sq)))
    rows = np.array(rows)
    worst = np.max(np.abs(rows.sum(axis=1)))
    ok = record(4, worst < 0.01 and rows[0, 0] < 0.01 and rows[-1, 0] >= 23,
                f"G_a 0..{rows[-1, 0]:.1f} dB, worst |G_a_dB + G_sq_dB| {worst:.2e} dB")
    assert ok


def test_criterion_05_broadband_gain(preset_config, preset_curve):
    t0 = time.perf_counter()
    f = np.linspace(0.5e9, 10.8e9, 500)
    spec = gain_spectrum(preset_config.operating_point, preset_curve, preset_config.device, f)
    elapsed = time.perf_counter() - t0
    g = spec.gain_db
    bw17 = bandwidth_above(f, g, 17.0)
    bw12 = bandwidth_above(f, g, 12.0)
    ok = record(5, abs(g.max() - 20) <= 3 and bw17 >= 2e9 and bw12 >= 3e9 and elapsed < 300,
                f"peak {g.max():.2f} dB, {bw17 / 1e9:.2f} GHz >= 17 dB, "
                f"{bw12 / 1e9:.2f} GHz >= 12 dB, {elapsed:.1f} s for 500 points")
    assert ok


def test_criterion_06_bandgap(preset_config, preset_curve):
    center = 0.5 * sum(preset_curve.gaps[0])
    g0 = preset_config.device
    lumped = bloch_dispersion(np.arange(5e9, 15e9, 1e6), g0, stub_model="lumped")
    lumped_center = 0.5 * sum(lumped.gaps[0])
    v = 1 / math.sqrt(g0.inductance_per_m * g0.capacitance_per_m)
    bragg = v / (2 * g0.stub_modulation_wavelength)
    rel = abs(lumped_center - bragg) / bragg
    ok = record(6, 8e9 <= center <= 11e9 and rel < 0.01,
                f"lowest gap center {center / 1e9:.3f} GHz; lumped stubs {lumped_center / 1e9:.3f} "
                f"GHz vs Bragg {bragg / 1e9:.3f} GHz ({rel:.2%})")
    assert ok


def test_criterion_07_compression(preset_config, preset_curve):
    comp = compression_curve(preset_config.operating_point, preset_curve, preset_config.device,
                             preset_config.compression_dbm.grid())
    mono = bool(np.all(np.diff(comp.gains_db) <= 1e-9))
    ok = record(7, abs(comp.p1db_dbm + 57) <= 3 and mono,
                f"P_1dB {comp.p1db_dbm:.2f} dBm, gain nonincreasing: {mono}")
    assert ok


def test_criterion_08_noise_model_fit():
    G = np.logspace(0, 2.5, 20)
    clean = fit_noise_model(G, 0.27 + 30.81 / G)
    exact = abs(clean.N_HEMT - 30.81) < 1e-9 and abs(clean.N_a - 0.27) < 1e-9
    sigma = 0.05
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        fit = fit_noise_model(G, 0.27 + 30.81 / G + sigma * rng.standard_normal(G.size), sigma)
        hits += (abs(fit.N_HEMT - 30.81) <= 3 * fit.stderr_N_HEMT
                 and abs(fit.N_a - 0.27) <= 3 * fit.stderr_N_a)
    ok = record(8, exact and hits >= 95,
                f"noiseless recovery exact: {exact}; {hits}/100 noisy trials within 3 sigma")
    assert ok


def _squeeze_pipeline(config, curve, truth, n_points=9):
    sq = config.squeeze
    G_a = []
    for att in np.linspace(0.0, 16.0, n_points)[::-1]:
        op = config.operating_point.replace(f_pump=sq.f_pump,
                                            I_pump=sq.max_pump_current * 10 ** (-att / 20))
        q = degenerate_quadrature_gains(op, curve, config.device, lossless=True)
        G_a.append((q.G_a, q.G_sq))
    amp, sqn, off = [], [], []
    for ga, gs in G_a:
        p = truth.replace(G_a=ga, G_sq=gs)
        a, s = iq_quadrature_noise(p, 0.0)
        amp.append(a)
        sqn.append(s)
        off.append(iq_quadrature_noise(twpa_off(p), 0.0)[0])
    ga = np.array([g for g, _ in G_a])
    return squeezing_analysis(ga, amp, sqn, off, truth.replace(N_pa=0.0), unphysical="nan")


def test_criterion_09_squeezing_round_trip(preset_config, preset_curve):
    ideal = _squeeze_pipeline(preset_config, preset_curve, preset_config.chain.params)
    on_line = np.max(np.abs(ideal.squeezing_dB - ideal.G_a_dB))
    noisy = _squeeze_pipeline(preset_config, preset_curve,
                              preset_config.chain.params.replace(N_pa=0.16))
    deviation = noisy.G_a_dB - noisy.squeezing_dB
    increasing = bool(np.all(np.diff(deviation) > 0))
    below = bool(np.all(deviation[noisy.G_a_dB > 0.5] > 0))
    cap = 10 * math.log10(preset_config.chain.params.N_mK / 0.16)
    near_12 = noisy.squeezing_dB[np.argmin(np.abs(noisy.G_a_dB - 12))]
    ok = record(9, on_line <= 0.05 and increasing and below,
                f"ideal line within {on_line:.2e} dB; N_pa=0.16 deviation strictly increasing: "
                f"{increasing}; squeezing {near_12:.2f} dB at G_a~12 dB, asymptotic cap "
                f"{cap:.2f} dB")
    assert ok


def test_criterion_10_systematics(preset_config, preset_curve):
    nu = preset_config.noise_grid.grid()
    spec = gain_spectrum(preset_config.operating_point, preset_curve, preset_config.device, nu)
    G = np.maximum(spec.gain, 1.0)
    chain = preset_config.chain
    run = simulate_noise_measurement(nu, G, chain, seed=preset_config.seed, t_hot=0.0,
                                     t_cold=0.0, t_off=100.0, t_on=100.0, radiometer=False)
    tr = run.traces
    cal_off = calibrate(tr[TraceConfig.HOT], tr[TraceConfig.TWPA_OFF], chain.T_hot, chain.T_cold)
    A_off = added_noise(tr[TraceConfig.TWPA_ON], tr[TraceConfig.TWPA_OFF], cal_off, G)
    band = 10 * np.log10(G) >= preset_config.noise_run.band_min_gain_db
    offset = (run.added - A_off)[band]
    mean = float(offset.mean())
    flat = np.ptp(offset) < 0.1 * abs(mean)
    heat = pump_heating_excess(-15.7)
    ok = record(10, 0.1 <= abs(mean) <= 0.4 and flat and abs(heat - 0.077) < 1e-15,
                f"drift offset {mean:+.4f} quanta (spread {np.ptp(offset):.4f}); "
                f"pump heating at -15.7 dBm {heat:.6f} quanta")
    assert ok


def test_criterion_11_determinism(tmp_path):
    cfg = tmp_path / "fast.yaml"
    cfg.write_text(
        "grids:\n"
        "  dispersion_hz: {start: 0.1e9, stop: 25.0e9, step: 5e6}\n"
        "  gain_hz: {start: 1.0e9, stop: 10.0e9, points: 10}\n"
        "  compression_dbm: {start: -80.0, stop: -40.0, step: 4.0}\n"
        "  noise_hz: {start: 4.0e9, stop: 7.0e9, points: 31}\n"
        "squeeze:\n  attenuation_db: [0.0, 6.0, 12.0]\n  radiometer: true\n"
        "chain:\n  ripple_amplitude: 0.01\n"
        "noise_run:\n  t_off_min: 100.0\n  t_on_min: 100.0\n"
    )
    base = ["--preset", "paper-device", "--config", str(cfg), "--seed", "7"]
    for tag in ("a", "b"):
        out = tmp_path / tag
        for cmd in ("dispersion", "gain", "compression", "noise", "squeeze"):
            assert cli_main([cmd, *base, "--out", str(out)]) == 0
        assert cli_main(["calibrate", *base, "--out", str(out / "cal"),
                         "--hot", str(out / "trace_hot.csv"), "--cold", str(out / "trace_cold.csv"),
                         "--on", str(out / "trace_twpa_on.csv"),
                         "--off", str(out / "trace_twpa_off.csv"),
                         "--gain", str(out / "gain.csv")]) == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    same = [(tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files]
    csvs = sum(1 for f in files if f.suffix == ".csv")
    ok = record(11, all(same) and csvs >= 10,
                f"{sum(same)}/{len(files)} output files byte-identical across re-runs")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
