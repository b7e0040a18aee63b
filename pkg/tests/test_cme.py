import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twpa_studio.cme import (
    CoupledModeParams,
    OperatingPoint,
    analytic_undepleted_gain,
    bandwidth_above,
    compression_curve,
    coupled_mode_params,
    current_to_power,
    dbm_to_watts,
    degenerate_quadrature_gains,
    gain_spectrum,
    integrate_modes,
    manley_rowe_violation,
    oscillation_check,
    power_to_current,
    propagate_3wm,
    watts_to_dbm,
)
from twpa_studio.dispersion import DispersionCurve
from twpa_studio.errors import DomainError, OscillationError, SuperconductivityBrokenError

F_PUMP = 11.297e9


@pytest.fixture(scope="module")
def linear_curve():
    f = np.linspace(1e6, 30e9, 30000)
    return DispersionCurve(f, 2 * np.pi * f / 2.3e6 + 0j, np.full(f.size, 50.0))


@pytest.fixture(scope="module")
def lossless_geometry(device_geometry):
    return device_geometry.replace(loss_db_per_ghz=0.0)


def oracle_params(g, delta_beta, L, I_p=1e-4):
    """Linear-dispersion, Kerr-free parameters with coupling ``g``."""
    bs, bi = 10.0, 14.0
    kappa = g / (I_p * math.sqrt(bs * bi))
    return CoupledModeParams(beta_p=bs + bi, beta_s=bs, beta_i=bi, delta_beta=delta_beta,
                             kappa=kappa, sigma=0.0, length=L)


def test_analytic_gain_examples():
    assert analytic_undepleted_gain(1.0, 0.0, 3.0) == pytest.approx(101.357818061227947, rel=1e-13)
    assert 10 * math.log10(analytic_undepleted_gain(1.0, 0.0, 3.0)) == pytest.approx(20.06, abs=0.01)
    assert analytic_undepleted_gain(0.0, 0.0, 1.0) == 1.0
    # gamma imaginary: bounded, oscillatory
    assert analytic_undepleted_gain(1.0, 3.0, 2.0) == pytest.approx(1.49517935679223644, rel=1e-12)
    assert analytic_undepleted_gain(1.0, 1.0, 2.0) == pytest.approx(10.9930155397099548, rel=1e-12)


def test_analytic_gain_continuous_across_gamma_zero():
    g, L = 1.0, 2.0
    at = analytic_undepleted_gain(g, 2 * g, L)
    assert at == pytest.approx(1 + (g * L) ** 2, rel=1e-12)
    for eps in (1e-6, 1e-9):
        assert analytic_undepleted_gain(g, 2 * g * (1 + eps), L) == pytest.approx(at, rel=1e-5)
        assert analytic_undepleted_gain(g, 2 * g * (1 - eps), L) == pytest.approx(at, rel=1e-5)


@given(st.floats(0.0, 3.0), st.floats(0.0, 8.0))
def test_analytic_gain_bounded_in_oscillatory_regime(g, db):
    G = analytic_undepleted_gain(g, db, 1.0)
    assert G >= 1 - 1e-12
    detune2 = (db / 2) ** 2 - g ** 2
    if detune2 > 1e-6:
        assert G <= 1 + g ** 2 / detune2 + 1e-9


@pytest.mark.parametrize("g,db,L", [(1.0, 0.0, 2.0), (2.0, 1.5, 1.5), (1.0, 2.0, 3.0),
                                    (0.5, 4.0, 2.0)])
def test_solver_matches_oracle(g, db, L):
    p = oracle_params(g, db, L)
    m = integrate_modes(p, (1e-4, 1e-10, 0.0), undepleted=True, z_points=2)
    G = abs(m.a_s[-1]) ** 2 / 1e-20
    assert G == pytest.approx(analytic_undepleted_gain(g, db, L), rel=1e-6)


def test_manley_rowe_and_idler_relation():
    p = oracle_params(1.5, 0.7, 2.0)
    m = integrate_modes(p, (1e-4, 1e-10, 0.0), z_points=201)
    assert manley_rowe_violation(m, (p.beta_p, p.beta_s, p.beta_i)) < 1e-6
    flux_s = abs(m.a_s[-1]) ** 2 / p.beta_s
    flux_i = abs(m.a_i[-1]) ** 2 / p.beta_i
    flux_in = 1e-20 / p.beta_s
    assert flux_i / flux_in == pytest.approx(flux_s / flux_in - 1, rel=1e-6)


def test_no_pump_means_only_loss(device_geometry, biased_curve):
    op = OperatingPoint(0.579e-3, F_PUMP, 0.0, f_signal=5e9, signal_power_in=1e-15)
    p = coupled_mode_params(op, biased_curve, device_geometry)
    m = integrate_modes(p, (0.0, 1e-9, 0.0), z_points=2)
    assert abs(m.a_s[-1]) ** 2 == pytest.approx(1e-18 * math.exp(-p.alpha_s * p.length), rel=1e-8)


def test_kerr_only_conserves_moduli(lossless_geometry, biased_curve):
    op = OperatingPoint(0.0, F_PUMP, 3e-4, f_signal=5e9, signal_power_in=1e-12)
    m = propagate_3wm(op, biased_curve, lossless_geometry, lossless=True, z_points=51)
    for a in (m.a_p, m.a_s):
        assert np.ptp(np.abs(a)) < 1e-8 * abs(a[0])
    assert np.all(np.abs(m.a_i) < 1e-30)
    assert abs(np.angle(m.a_p[-1] / m.a_p[0])) > 0


def test_gain_symmetric_about_half_pump(linear_curve, lossless_geometry, preset_config):
    op = preset_config.operating_point.replace(I_pump=1.2e-4)
    f = np.array([2e9, 3.5e9, 5e9])
    lo = gain_spectrum(op, linear_curve, lossless_geometry, f, lossless=True).gain
    hi = gain_spectrum(op, linear_curve, lossless_geometry, op.f_pump - f, lossless=True).gain
    assert np.allclose(lo, hi, rtol=1e-6)


def test_gain_dies_at_band_edges(linear_curve, lossless_geometry, preset_config):
    op = preset_config.operating_point
    f = np.array([5e6, 1e9, op.f_pump / 2, op.f_pump - 1e9, op.f_pump - 5e6])
    G = gain_spectrum(op, linear_curve, lossless_geometry, f, lossless=True).gain
    assert G[0] < 1.1 and G[-1] < 1.1
    assert G[0] < G[1] < G[2] and G[-1] < G[-2] < G[2]


def test_pump_off_gain_is_unity(preset_config, biased_curve):
    op = preset_config.operating_point.replace(I_pump=0.0)
    G = gain_spectrum(op, biased_curve, preset_config.device, [3e9, 6e9]).gain
    assert np.allclose(G, 1.0, rtol=1e-9)


def test_degenerate_product_law_lossless(preset_config, biased_curve):
    for I_p in (0.5e-4, 1.0e-4, 1.5e-4):
        op = preset_config.operating_point.replace(f_pump=11.313e9, I_pump=I_p)
        q = degenerate_quadrature_gains(op, biased_curve, preset_config.device, lossless=True)
        assert q.G_a * q.G_sq == pytest.approx(1.0, rel=1e-6)
        assert q.G_a > 1 > q.G_sq


def test_degenerate_pump_off_is_phase_insensitive(preset_config, biased_curve):
    op = preset_config.operating_point.replace(f_pump=11.313e9, I_pump=0.0)
    q = degenerate_quadrature_gains(op, biased_curve, preset_config.device, lossless=True)
    assert np.allclose(q.gains, 1.0, rtol=1e-9)


def test_degenerate_loss_breaks_product_law(preset_config, biased_curve):
    op = preset_config.operating_point.replace(f_pump=11.313e9, I_pump=1.0e-4)
    q = degenerate_quadrature_gains(op, biased_curve, preset_config.device)
    q2 = degenerate_quadrature_gains(op, biased_curve,
                                     preset_config.device.replace(loss_db_per_ghz=0.076))
    assert q.G_a * q.G_sq < 1
    assert q2.G_a * q2.G_sq < q.G_a * q.G_sq


def test_compression_monotone_and_pump_direction(preset_config, biased_curve):
    op = preset_config.operating_point
    p = np.arange(-90.0, -39.0, 2.0)
    comp = compression_curve(op, biased_curve, preset_config.device, p)
    assert np.all(np.diff(comp.gains_db) <= 1e-9)
    stronger = op.replace(I_pump=op.I_pump * 10 ** (1 / 20))
    comp2 = compression_curve(stronger, biased_curve, preset_config.device, p)
    # more pump power saturates later at the output; the input-referred point
    # still drops because the small-signal gain grows faster than 1 dB
    out1 = comp.p1db_dbm + comp.small_signal_gain_db - 1
    out2 = comp2.p1db_dbm + comp2.small_signal_gain_db - 1
    assert out2 > out1
    assert comp2.small_signal_gain_db > comp.small_signal_gain_db + 1


def test_oscillation_criterion():
    state, margin = oscillation_check(20.0, -15.0, -15.0)
    assert state == "stable" and margin == pytest.approx(10.0)
    assert oscillation_check(25.0, -10.0, -10.0)[0] == "oscillating"
    # improving each reflection by 5 dB raises the maximum stable gain by 10 dB
    gain_15 = -oscillation_check(0.0, -15.0, -15.0)[1]
    gain_20 = -oscillation_check(0.0, -20.0, -20.0)[1]
    assert gain_15 - gain_20 == pytest.approx(10.0)
    with pytest.raises(DomainError):
        oscillation_check(10.0, 1.0, -10.0)


def test_runaway_amplitude_raises():
    p = oracle_params(5.0, 0.0, 3.0)
    with pytest.raises(OscillationError):
        integrate_modes(p, (1e-4, 1e-6, 0.0), undepleted=True, overflow_limit=1e-3)


def test_operating_point_validation(preset_config, biased_curve):
    g = preset_config.device
    with pytest.raises(SuperconductivityBrokenError):
        OperatingPoint(1.0e-3, F_PUMP, 0.3e-3).validate(g)
    with pytest.raises(DomainError):
        OperatingPoint(0.5e-3, 10.55e9, 1e-4).validate(g, biased_curve)
    with pytest.raises(DomainError):
        coupled_mode_params(OperatingPoint(0.5e-3, F_PUMP, 1e-4, f_signal=12e9), biased_curve, g)


@given(st.floats(-120, 10), st.floats(1.0, 500.0))
def test_power_current_round_trip(p_dbm, Z):
    w = dbm_to_watts(p_dbm)
    assert watts_to_dbm(w) == pytest.approx(p_dbm, abs=1e-9)
    assert current_to_power(power_to_current(w, Z), Z) == pytest.approx(w, rel=1e-12)


def test_bandwidth_above():
    f = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    g = np.array([0.0, 10.0, 20.0, 10.0, 0.0])
    assert bandwidth_above(f, g, 15.0) == pytest.approx(1.0)
    assert bandwidth_above(f, g, 0.0) == pytest.approx(4.0)
    assert bandwidth_above(f, g, 25.0) == 0.0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 2.5), st.floats(-3.0, 3.0), st.floats(0.5, 2.0))
def test_solver_oracle_property(g, db, L):
    p = oracle_params(g, db, L)
    m = integrate_modes(p, (1e-4, 1e-10, 0.0), undepleted=True, z_points=2)
    G = abs(m.a_s[-1]) ** 2 / 1e-20
    assert G == pytest.approx(analytic_undepleted_gain(g, db, L), rel=1e-6)
