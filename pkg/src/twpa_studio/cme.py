"""Three-wave-mixing coupled-mode propagation along the DC-biased line.

Mode amplitudes are complex current envelopes (amperes) of pump, signal and
idler. With ``kappa = I_DC / (2 I_star**2)`` and ``sigma = 1 / (8 I_star**2)``::

    a_p' = i b_p [kappa a_s a_i e^{-i dB z} + sigma (|a_p|^2 + 2|a_s|^2 + 2|a_i|^2) a_p] - alpha_p/2 a_p
    a_s' = i b_s [kappa a_p a_i* e^{+i dB z} + sigma (|a_s|^2 + 2|a_p|^2 + 2|a_i|^2) a_s] - alpha_s/2 a_s
    a_i' = i b_i [kappa a_p a_s* e^{+i dB z} + sigma (|a_i|^2 + 2|a_p|^2 + 2|a_s|^2) a_i] - alpha_i/2 a_i

where ``dB = b_p - b_s - b_i`` is the linear phase mismatch. Lossless runs
conserve ``|a_p|^2/b_p + |a_s|^2/b_s`` and ``|a_p|^2/b_p + |a_i|^2/b_i``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .device import DeviceGeometry, dc_retuning
from .dispersion import DispersionCurve, loss_nepers_per_m
from .errors import (
    DomainError,
    NotBracketedError,
    OscillationError,
    StiffSystemError,
    SuperconductivityBrokenError,
)

__all__ = [
    "OperatingPoint",
    "CoupledModeParams",
    "ModeAmplitudes",
    "GainSpectrum",
    "QuadratureGains",
    "CompressionCurve",
    "dbm_to_watts",
    "watts_to_dbm",
    "power_to_current",
    "current_to_power",
    "coupled_mode_params",
    "integrate_modes",
    "propagate_3wm",
    "analytic_undepleted_gain",
    "gain_spectrum",
    "degenerate_quadrature_gains",
    "compression_curve",
    "oscillation_check",
    "calibrate_pump_current",
    "manley_rowe_violation",
    "write_gain_csv",
    "write_compression_csv",
    "bandwidth_above",
]

VACUUM_SEED_DB = 120.0


def dbm_to_watts(p_dbm):
    return 10 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(p_w):
    return 10 * np.log10(np.asarray(p_w, dtype=float)) + 30.0


def power_to_current(power_w: float, Z: float) -> float:
    """Peak current amplitude of a travelling wave carrying ``power_w``."""
    return math.sqrt(2.0 * power_w / Z)


def current_to_power(current: float, Z: float) -> float:
    return 0.5 * abs(current) ** 2 * Z


@dataclass(frozen=True)
class OperatingPoint:
    """DC bias, pump tone and (optional) signal tone at the device input.

    ``signal_power_in`` is in watts; ``None`` selects a vacuum-scale seed
    120 dB below the pump.
    """

    I_DC: float
    f_pump: float
    I_pump: float
    f_signal: float | None = None
    signal_power_in: float | None = None
    phase_signal: float = 0.0

    def replace(self, **changes) -> "OperatingPoint":
        return replace(self, **changes)

    def validate(self, geometry: DeviceGeometry, curve: DispersionCurve | None = None):
        if abs(self.I_DC) + abs(self.I_pump) >= geometry.I_c:
            raise SuperconductivityBrokenError(
                f"|I_DC| + |I_pump| = {abs(self.I_DC) + abs(self.I_pump):.4g} A "
                f"reaches I_c = {geometry.I_c:.4g} A"
            )
        if self.f_pump <= 0:
            raise DomainError("f_pump must be positive")
        if curve is not None and curve.in_gap(self.f_pump):
            raise DomainError(f"pump frequency {self.f_pump:.6g} Hz lies inside a bandgap")


@dataclass(frozen=True)
class CoupledModeParams:
    beta_p: float
    beta_s: float
    beta_i: float
    delta_beta: float
    kappa: float
    sigma: float
    length: float
    alpha_p: float = 0.0
    alpha_s: float = 0.0
    alpha_i: float = 0.0

    def lossless(self) -> "CoupledModeParams":
        return replace(self, alpha_p=0.0, alpha_s=0.0, alpha_i=0.0)


@dataclass
class ModeAmplitudes:
    z_grid: np.ndarray
    a_p: np.ndarray
    a_s: np.ndarray
    a_i: np.ndarray


@dataclass
class GainSpectrum:
    freq_grid: np.ndarray
    gain: np.ndarray

    @property
    def gain_db(self) -> np.ndarray:
        return 10 * np.log10(self.gain)


class QuadratureGains(NamedTuple):
    G_a: float
    G_sq: float
    phase_a: float
    phase_sq: float
    phases: np.ndarray
    gains: np.ndarray


class CompressionCurve(NamedTuple):
    powers_dbm: np.ndarray
    gains_db: np.ndarray
    p1db_dbm: float
    small_signal_gain_db: float


def coupled_mode_params(op: OperatingPoint, curve: DispersionCurve, geometry: DeviceGeometry,
                        f_signal: float | None = None, *, kerr: bool = True,
                        lossless: bool = False) -> CoupledModeParams:
    f_s = op.f_signal if f_signal is None else f_signal
    if f_s is None:
        raise DomainError("operating point has no signal frequency")
    if not 0 < f_s < op.f_pump:
        raise DomainError("need 0 < f_signal < f_pump")
    f = np.array([op.f_pump, f_s, op.f_pump - f_s])
    beta = curve.beta_at(f)
    # material loss only; Bragg evanescence is not a propagation loss for the envelopes
    alpha = np.zeros(3) if lossless else loss_nepers_per_m(f, geometry)
    I_star2 = geometry.I_star ** 2
    return CoupledModeParams(
        beta_p=float(beta[0]), beta_s=float(beta[1]), beta_i=float(beta[2]),
        delta_beta=float(beta[0] - beta[1] - beta[2]),
        kappa=op.I_DC / (2 * I_star2),
        sigma=1 / (8 * I_star2) if kerr else 0.0,
        length=geometry.line_length,
        alpha_p=float(alpha[0]), alpha_s=float(alpha[1]), alpha_i=float(alpha[2]),
    )


def _rhs_factory(p: CoupledModeParams, undepleted: bool):
    bp, bs, bi = p.beta_p, p.beta_s, p.beta_i
    db, k, s = p.delta_beta, p.kappa, p.sigma
    hp, hs, hi = p.alpha_p / 2, p.alpha_s / 2, p.alpha_i / 2

    def rhs(z, y):
        ap, as_, ai = y.tolist()
        e = complex(math.cos(db * z), math.sin(db * z))
        np_, ns, ni = abs(ap) ** 2, abs(as_) ** 2, abs(ai) ** 2
        if undepleted:
            dp = (1j * bp * s * np_ - hp) * ap
        else:
            dp = 1j * bp * (k * as_ * ai * e.conjugate() + s * (np_ + 2 * ns + 2 * ni) * ap) - hp * ap
        ds = 1j * bs * (k * ap * ai.conjugate() * e + s * (ns + 2 * np_ + 2 * ni) * as_) - hs * as_
        di = 1j * bi * (k * ap * as_.conjugate() * e + s * (ni + 2 * np_ + 2 * ns) * ai) - hi * ai
        return np.array([dp, ds, di])

    return rhs


def integrate_modes(params: CoupledModeParams, a0, *, rtol: float = 1e-9,
                    z_points: int = 1001, undepleted: bool = False,
                    overflow_limit: float | None = None,
                    method: str = "DOP853") -> ModeAmplitudes:
    """Integrate the coupled-mode equations from ``z = 0`` to ``params.length``.

    ``a0`` is the (pump, signal, idler) input triple. Absolute tolerances are
    set per mode from the input scale so that a signal many orders of
    magnitude below the pump is still resolved to ``rtol``.
    """
    y0 = np.asarray(a0, dtype=complex)
    mags = np.abs(y0)
    ref = mags.max()
    if ref == 0:
        z = np.linspace(0, params.length, max(z_points, 2))
        zero = np.zeros_like(z, dtype=complex)
        return ModeAmplitudes(z, zero, zero.copy(), zero.copy())
    small = mags[mags > 0].min()
    scale = np.where(mags > 0, mags, small)
    atol = rtol * scale * 1e-3
    limit = overflow_limit if overflow_limit is not None else 1e6 * ref

    def blowup(z, y):
        return limit - np.max(np.abs(y))

    blowup.terminal = True
    z_eval = np.linspace(0.0, params.length, max(z_points, 2))
    with np.errstate(over="raise", invalid="raise"):
        try:
            sol = solve_ivp(_rhs_factory(params, undepleted), (0.0, params.length), y0,
                            method=method, t_eval=z_eval, rtol=rtol, atol=atol,
                            events=blowup)
        except FloatingPointError as exc:
            raise OscillationError(f"mode amplitudes overflowed: {exc}") from exc
    if sol.status == 1 or (sol.y.size and not np.all(np.isfinite(sol.y))):
        raise OscillationError("mode amplitudes diverged (parametric oscillation / overflow)")
    if sol.status != 0:
        raise StiffSystemError(f"stiff system: {sol.message}")
    return ModeAmplitudes(sol.t, sol.y[0], sol.y[1], sol.y[2])


def _line_impedance(op: OperatingPoint, geometry: DeviceGeometry) -> float:
    return dc_retuning(geometry, op.I_DC).Z0


def _signal_seed(op: OperatingPoint, geometry: DeviceGeometry) -> float:
    if op.signal_power_in is None:
        return abs(op.I_pump) * 10 ** (-VACUUM_SEED_DB / 20) if op.I_pump else 1e-12
    return power_to_current(op.signal_power_in, _line_impedance(op, geometry))


def propagate_3wm(op: OperatingPoint, curve: DispersionCurve, geometry: DeviceGeometry, *,
                  kerr: bool = True, lossless: bool = False, undepleted: bool = False,
                  rtol: float = 1e-9, z_points: int = 1001) -> ModeAmplitudes:
    """Propagate pump, signal and idler (idler starts empty) through the line."""
    op.validate(geometry, curve)
    params = coupled_mode_params(op, curve, geometry, kerr=kerr, lossless=lossless)
    a_s0 = _signal_seed(op, geometry) * complex(math.cos(op.phase_signal), math.sin(op.phase_signal))
    return integrate_modes(params, (op.I_pump, a_s0, 0.0), rtol=rtol, z_points=z_points,
                           undepleted=undepleted)


def analytic_undepleted_gain(g, delta_beta, L):
    """Signal power gain of an undepleted, lossless parametric amplifier.

    ``G = |cosh(gamma L) + i dB/(2 gamma) sinh(gamma L)|^2`` with
    ``gamma = sqrt(g^2 - (dB/2)^2)``; the oscillatory branch (imaginary
    gamma) and the ``gamma -> 0`` limit are handled continuously.
    """
    g = np.asarray(g, dtype=float)
    db = np.asarray(delta_beta, dtype=float)
    gamma2 = g * g - (db / 2) ** 2
    root = np.sqrt(np.abs(gamma2))
    x = root * L
    with np.errstate(invalid="ignore", divide="ignore"):
        cosh_part = np.where(gamma2 >= 0, np.cosh(x), np.cos(x))
        shc = np.where(x > 1e-4, np.where(gamma2 >= 0, np.sinh(x), np.sin(x)) / np.where(x > 0, x, 1),
                       1 + np.sign(gamma2) * x * x / 6)
    s_over_gamma = L * shc
    G = cosh_part ** 2 + (db / 2) ** 2 * s_over_gamma ** 2
    return G[()] if G.ndim == 0 else G


def _single_gain(op, curve, geometry, f_s, kerr, lossless, rtol):
    o = op.replace(f_signal=f_s, phase_signal=0.0)
    params = coupled_mode_params(o, curve, geometry, kerr=kerr, lossless=lossless)
    seed = _signal_seed(o, geometry)
    m = integrate_modes(params, (o.I_pump, seed, 0.0), rtol=rtol, z_points=2)
    # on/off gain: passive transmission of the signal divided out
    return abs(m.a_s[-1]) ** 2 / seed ** 2 * math.exp(params.alpha_s * params.length)


def gain_spectrum(op: OperatingPoint, curve: DispersionCurve, geometry: DeviceGeometry,
                  freq_grid, *, kerr: bool = True, lossless: bool = False,
                  rtol: float = 1e-9) -> GainSpectrum:
    """Small-signal on/off gain for every signal frequency of ``freq_grid``.

    The gain is referenced to the pump-off, DC-on transmission, so a point with
    no parametric coupling has ``G = 1`` regardless of line loss.
    """
    op.validate(geometry, curve)
    op = op.replace(signal_power_in=None)
    f = np.asarray(freq_grid, dtype=float)
    gains = np.array([_single_gain(op, curve, geometry, fs, kerr, lossless, rtol) for fs in f])
    return GainSpectrum(f, gains)


def degenerate_quadrature_gains(op: OperatingPoint, curve: DispersionCurve,
                                geometry: DeviceGeometry, *, n_phases: int = 16,
                                kerr: bool = True, lossless: bool = False,
                                relative_to_pump_off: bool = False,
                                rtol: float = 1e-9) -> QuadratureGains:
    """Phase-sensitive gain at ``f_signal = f_pump / 2``.

    The signal is seeded at ``n_phases`` phases over ``[0, 2 pi)``. In the
    linear regime the output power is exactly ``c0 + c1 cos 2phi + c2 sin 2phi``,
    so the extremes come from a least-squares fit of that form rather than from
    the discrete samples. Gains are output/input power unless
    ``relative_to_pump_off``.
    """
    op.validate(geometry, curve)
    f_s = op.f_pump / 2
    o = op.replace(f_signal=f_s)
    params = coupled_mode_params(o, curve, geometry, kerr=kerr, lossless=lossless)
    # signal and idler are the same physical mode
    params = replace(params, beta_i=params.beta_s, alpha_i=params.alpha_s,
                     delta_beta=params.beta_p - 2 * params.beta_s)
    seed = _signal_seed(o, geometry)
    phases = np.arange(n_phases) * 2 * np.pi / n_phases
    gains = np.empty(n_phases)
    for j, phi in enumerate(phases):
        a = seed * complex(math.cos(phi), math.sin(phi))
        m = integrate_modes(params, (o.I_pump, a, a), rtol=rtol, z_points=2)
        gains[j] = abs(m.a_s[-1]) ** 2 / seed ** 2
    if relative_to_pump_off:
        gains = gains * math.exp(params.alpha_s * params.length)
    design = np.column_stack([np.ones(n_phases), np.cos(2 * phases), np.sin(2 * phases)])
    c0, c1, c2 = np.linalg.lstsq(design, gains, rcond=None)[0]
    amp = math.hypot(c1, c2)
    phase_a = (0.5 * math.atan2(c2, c1)) % np.pi
    return QuadratureGains(c0 + amp, c0 - amp, phase_a, (phase_a + np.pi / 2) % np.pi,
                           phases, gains)


def compression_curve(op: OperatingPoint, curve: DispersionCurve, geometry: DeviceGeometry,
                      signal_power_dbm, *, kerr: bool = True, lossless: bool = False,
                      rtol: float = 1e-9) -> CompressionCurve:
    """Gain versus signal input power with full pump depletion; locates P_1dB."""
    op.validate(geometry, curve)
    p = np.asarray(signal_power_dbm, dtype=float)
    if p.size < 2 or np.any(np.diff(p) <= 0):
        raise DomainError("signal power grid must be ascending with >= 2 points")
    ss = 10 * math.log10(_single_gain(op.replace(signal_power_in=None), curve, geometry,
                                      op.f_signal, kerr, lossless, rtol))
    gains = np.array([
        10 * math.log10(_single_gain(op.replace(signal_power_in=float(dbm_to_watts(pi))),
                                     curve, geometry, op.f_signal, kerr, lossless, rtol))
        for pi in p
    ])
    target = ss - 1.0
    below = np.nonzero(gains <= target)[0]
    if below.size == 0 or below[0] == 0:
        raise NotBracketedError("P_1dB not bracketed by the signal power grid")
    j = below[0]
    # gain in dB against power in dBm: linear interpolation on log scales
    p1db = p[j - 1] + (target - gains[j - 1]) * (p[j] - p[j - 1]) / (gains[j] - gains[j - 1])
    return CompressionCurve(p, gains, float(p1db), ss)


def bandwidth_above(freq_grid, gain_db, threshold_db: float) -> float:
    """Total width (Hz) of the regions where ``gain_db >= threshold_db``.

    Crossings are located by linear interpolation between grid points.
    """
    f = np.asarray(freq_grid, dtype=float)
    g = np.asarray(gain_db, dtype=float) - threshold_db
    width = 0.0
    for j in range(f.size - 1):
        g0, g1 = g[j], g[j + 1]
        df = f[j + 1] - f[j]
        if g0 >= 0 and g1 >= 0:
            width += df
        elif g0 >= 0 or g1 >= 0:
            width += df * max(g0, g1) / abs(g1 - g0)
    return width


def oscillation_check(G_dB: float, reflect_in_dB: float, reflect_out_dB: float):
    """Round-trip criterion: oscillation iff gain exceeds the reflection losses.

    Returns ``(state, margin_dB)`` with ``margin = round-trip loss - gain``.
    """
    if reflect_in_dB > 0 or reflect_out_dB > 0:
        raise DomainError("reflection magnitudes must be <= 0 dB")
    round_trip = abs(reflect_in_dB) + abs(reflect_out_dB)
    state = "oscillating" if G_dB > round_trip else "stable"
    return state, round_trip - G_dB


def calibrate_pump_current(op: OperatingPoint, curve: DispersionCurve, geometry: DeviceGeometry,
                           freq_grid, target_gain_db: float = 20.0, *,
                           bracket: tuple[float, float] | None = None,
                           xtol: float = 1e-10) -> float:
    """Pump current giving a peak small-signal gain of ``target_gain_db``."""

    def excess(I_p):
        spec = gain_spectrum(op.replace(I_pump=I_p), curve, geometry, freq_grid)
        return float(spec.gain_db.max()) - target_gain_db

    lo, hi = bracket if bracket else (1e-3 * geometry.I_c, geometry.I_c - abs(op.I_DC))
    hi = min(hi, (geometry.I_c - abs(op.I_DC)) * (1 - 1e-9))
    if excess(lo) * excess(hi) > 0:
        raise NotBracketedError("target gain not reachable inside the pump-current bracket")
    return brentq(excess, lo, hi, xtol=xtol)


def manley_rowe_violation(modes: ModeAmplitudes, weights) -> float:
    """Largest relative drift of the pump+signal and pump+idler flux sums.

    ``weights`` are the per-mode divisors (pump, signal, idler); pass the
    wavenumbers used in the equations, which are proportional to the angular
    frequencies on a dispersionless line.
    """
    wp, ws, wi = weights
    fp = np.abs(modes.a_p) ** 2 / wp
    fs = np.abs(modes.a_s) ** 2 / ws
    fi = np.abs(modes.a_i) ** 2 / wi
    ref = fp[0] if fp[0] > 0 else max(fs[0], fi[0])
    v1 = np.max(np.abs((fp + fs) - (fp[0] + fs[0])))
    v2 = np.max(np.abs((fp + fi) - (fp[0] + fi[0])))
    return float(max(v1, v2) / ref)


def write_gain_csv(spec: GainSpectrum, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["f_Hz", "gain_dB"])
        for f, g in zip(spec.freq_grid, spec.gain_db):
            w.writerow([repr(float(f)), repr(float(g))])


def write_compression_csv(comp: CompressionCurve, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["P_dBm", "gain_dB"])
        for p, g in zip(comp.powers_dbm, comp.gains_db):
            w.writerow([repr(float(p)), repr(float(g))])
