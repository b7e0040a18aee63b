"""Synthetic y-factor measurement chain and the analyses applied to its traces.

Signal path for every trace: the switch selects a load (HOT/COLD) or the TWPA
output; the switch-plane occupation ``n`` passes the TWPA-to-HEMT attenuation
``A_att`` (which emits ``N_mK (1 - A_att)``), the HEMT adds ``N_HEMT`` and the
post-amplification converts quanta to W/Hz via ``G_post * h * nu``.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.constants import h, k

from .cme import GainSpectrum
from .errors import (
    ConfigError,
    DomainError,
    GridMismatchError,
    TraceFormatError,
    UnphysicalRatioError,
)
from .noise import (
    AmpChainParams,
    extract_squeezing,
    quanta,
    quantum_limit,
)

__all__ = [
    "TraceConfig",
    "NoiseTrace",
    "ChainSettings",
    "CalibrationConstants",
    "NoiseFit",
    "SqueezeResult",
    "NoiseRun",
    "synthesize_trace",
    "calibrate",
    "referred_quanta",
    "added_noise",
    "fit_noise_model",
    "iq_quadrature_noise",
    "twpa_off",
    "squeezing_analysis",
    "simulate_noise_measurement",
    "ingest_trace",
    "write_trace",
    "read_gain_csv",
]


class TraceConfig(str, Enum):
    HOT = "HOT"
    COLD = "COLD"
    TWPA_ON = "TWPA_ON"
    TWPA_OFF = "TWPA_OFF"


@dataclass
class NoiseTrace:
    freq_grid: np.ndarray
    power: np.ndarray  # W/Hz
    config: TraceConfig
    t_meas: float = 0.0  # minutes
    rbw: float = 1e6
    n_avg: int = 1000

    def __post_init__(self):
        self.freq_grid = np.asarray(self.freq_grid, dtype=float)
        self.power = np.asarray(self.power, dtype=float)
        self.config = TraceConfig(self.config)
        if self.freq_grid.shape != self.power.shape:
            raise DomainError("freq_grid and power must have the same shape")
        if np.any(~np.isfinite(self.power)) or np.any(self.power <= 0):
            raise DomainError("trace power must be finite and positive")


@dataclass(frozen=True)
class ChainSettings:
    """Everything the synthetic chain needs beyond the device gain."""

    params: AmpChainParams = field(default_factory=AmpChainParams)
    post_gain: float = 1e9
    T_hot: float = 3.38
    T_cold: float = 0.02
    T_input: float = 0.02
    ripple_amplitude: float = 0.0
    ripple_period: float = 8e6
    drift_db_per_100min: float = 0.01
    rbw: float = 1e6
    n_avg: int = 1000
    twpa_excess_quanta: float = 0.0

    def replace(self, **changes) -> "ChainSettings":
        return replace(self, **changes)

    @property
    def radiometer_sigma(self) -> float:
        # sigma = 1/sqrt(rbw * tau) with tau = n_avg / rbw
        return 1.0 / math.sqrt(self.rbw * (self.n_avg / self.rbw))


@dataclass
class CalibrationConstants:
    m: np.ndarray
    y0: np.ndarray
    freq_grid: np.ndarray
    scale: str = "quanta"  # or "temperature"


class NoiseFit(NamedTuple):
    N_HEMT: float
    N_a: float
    residual: float
    stderr_N_HEMT: float
    stderr_N_a: float


@dataclass
class SqueezeResult:
    G_a_dB: np.ndarray
    G_sq_dB: np.ndarray
    squeezing_dB: np.ndarray
    N_sys: np.ndarray
    N_HEMT: float
    N_a: float
    residual: float


@dataclass
class NoiseRun:
    traces: dict
    cal: CalibrationConstants
    gain: GainSpectrum
    added: np.ndarray
    quantum_limit: np.ndarray


def _check_grids(*traces):
    ref = traces[0].freq_grid
    for t in traces[1:]:
        if t.freq_grid.shape != ref.shape or not np.array_equal(t.freq_grid, ref):
            raise GridMismatchError(
                f"frequency grids differ between {traces[0].config.value} and {t.config.value}"
            )


def _gain_array(gain, freq_grid):
    if gain is None:
        return np.ones_like(freq_grid)
    if isinstance(gain, GainSpectrum):
        if not np.array_equal(gain.freq_grid, freq_grid):
            return np.interp(freq_grid, gain.freq_grid, gain.gain)
        return np.asarray(gain.gain, dtype=float)
    g = np.broadcast_to(np.asarray(gain, dtype=float), freq_grid.shape)
    return np.array(g)


def synthesize_trace(config, freq_grid, chain: ChainSettings, gain=None, *,
                     t_min: float = 0.0, seed=None, ripple_phase: float | None = None,
                     radiometer: bool = True, drift: bool = True) -> NoiseTrace:
    """Spectrum-analyser trace (W/Hz) for one switch/TWPA configuration.

    ``gain`` is the TWPA power gain (`GainSpectrum`, array or scalar) and only
    matters for ``TWPA_ON``. The ripple phase is drawn from ``seed`` unless
    given, so each switch state sees its own standing-wave pattern.
    """
    if chain is None:
        raise ConfigError("synthesize_trace needs chain settings")
    config = TraceConfig(config)
    nu = np.asarray(freq_grid, dtype=float)
    rng = np.random.default_rng(seed)
    p = chain.params
    if config is TraceConfig.HOT:
        n = quanta(nu, chain.T_hot)
    elif config is TraceConfig.COLD:
        n = quanta(nu, chain.T_cold)
    elif config is TraceConfig.TWPA_OFF:
        n = quanta(nu, chain.T_input)
    else:
        G = _gain_array(gain, nu)
        if np.any(G < 1):
            raise DomainError("TWPA_ON synthesis needs gain >= 1")
        n = G * (quanta(nu, chain.T_input) + quantum_limit(G) + chain.twpa_excess_quanta)
    hemt_plane = n * p.A_att + p.N_mK * (1 - p.A_att) + p.N_HEMT
    power = chain.post_gain * h * nu * hemt_plane
    phase = rng.uniform(0, 2 * np.pi) if ripple_phase is None else ripple_phase
    if chain.ripple_amplitude:
        power = power * (1 + chain.ripple_amplitude * np.sin(2 * np.pi * nu / chain.ripple_period + phase))
    if drift and chain.drift_db_per_100min:
        power = power * 10 ** (chain.drift_db_per_100min * t_min / 100 / 10)
    if radiometer:
        power = power * (1 + chain.radiometer_sigma * rng.standard_normal(nu.shape))
    return NoiseTrace(nu, power, config, t_min, chain.rbw, chain.n_avg)


def calibrate(hot: NoiseTrace, cold: NoiseTrace, T_H: float, T_C: float,
              scale: str = "quanta") -> CalibrationConstants:
    """Per-frequency y-factor slope and intercept.

    ``scale="quanta"`` regresses power on the load occupations
    ``quanta(nu, T)``; ``scale="temperature"`` on the physical temperatures.
    """
    _check_grids(hot, cold)
    if not T_H > T_C:
        raise DomainError("need T_H > T_C")
    nu = hot.freq_grid
    if scale == "quanta":
        x_h, x_c = quanta(nu, T_H), quanta(nu, T_C)
    elif scale == "temperature":
        x_h, x_c = np.full_like(nu, T_H), np.full_like(nu, T_C)
    else:
        raise DomainError(f"unknown calibration scale {scale!r}")
    m = (hot.power - cold.power) / (x_h - x_c)
    y0 = cold.power - m * x_c
    return CalibrationConstants(m, y0, nu, scale)


def referred_quanta(trace: NoiseTrace, cal: CalibrationConstants) -> np.ndarray:
    """Trace referred to the switch plane, in quanta."""
    if not np.array_equal(trace.freq_grid, cal.freq_grid):
        raise GridMismatchError("trace and calibration grids differ")
    x = (trace.power - cal.y0) / cal.m
    if cal.scale == "temperature":
        x = x * k / (h * trace.freq_grid)
    return x


def added_noise(on: NoiseTrace, off: NoiseTrace, cal: CalibrationConstants, G) -> np.ndarray:
    """Input-referred TWPA added noise ``N_on / G - N_off`` per frequency."""
    _check_grids(on, off)
    G = _gain_array(G, on.freq_grid)
    if np.any(G <= 0):
        raise DomainError("gain must be positive everywhere")
    return referred_quanta(on, cal) / G - referred_quanta(off, cal)


def fit_noise_model(G_a, N_sys, sigma: float | None = None) -> NoiseFit:
    """Least-squares fit of ``N_sys = N_a + N_HEMT / G_a``.

    Standard errors use ``sigma`` when the point scatter is known, otherwise the
    residual variance.
    """
    G_a = np.asarray(G_a, dtype=float)
    y = np.asarray(N_sys, dtype=float)
    if G_a.shape != y.shape or G_a.ndim != 1:
        raise DomainError("G_a and N_sys must be 1-D arrays of equal length")
    if np.unique(G_a).size < 2:
        raise DomainError("degenerate design: need at least two distinct G_a values")
    # an infinite gain is a legitimate point: it pins N_a directly
    X = np.column_stack([1.0 / G_a, np.ones_like(G_a)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    rms = float(np.sqrt(np.mean(resid ** 2)))
    dof = y.size - 2
    if sigma is None:
        var = float(resid @ resid / dof) if dof > 0 else 0.0
    else:
        var = sigma ** 2
    cov = var * np.linalg.inv(X.T @ X)
    return NoiseFit(float(coef[0]), float(coef[1]), rms,
                    float(math.sqrt(cov[0, 0])), float(math.sqrt(cov[1, 1])))


def twpa_off(params: AmpChainParams) -> AmpChainParams:
    return params.replace(G_a=1.0, G_sq=1.0, N_a=0.0, N_pa=0.0)


def iq_quadrature_noise(params: AmpChainParams, lo_phase: float, amp_axis: float = 0.0):
    """Noise (quanta, HEMT input plane) in the I and Q channels at f_p/2.

    The TWPA output has ``G_a (N_mK + N_a)`` along ``amp_axis`` and
    ``N_mK G_sq + N_pa`` in the orthogonal quadrature; the attenuator and
    HEMT then add isotropic noise.
    """
    p = params
    n_amp = p.G_a * (p.N_mK + p.N_a)
    n_sq = p.N_mK * p.G_sq + p.N_pa
    iso = p.N_mK * (1 - p.A_att) + p.N_HEMT
    c2 = math.cos(lo_phase - amp_axis) ** 2
    s2 = 1.0 - c2
    N_I = (n_amp * c2 + n_sq * s2) * p.A_att + iso
    N_Q = (n_amp * s2 + n_sq * c2) * p.A_att + iso
    return N_I, N_Q


def squeezing_analysis(G_a, N_amp_on, N_sq_on, N_off, params: AmpChainParams, *,
                       assumed_N_pa: float = 0.0, orientation: str = "physical",
                       unphysical: str = "raise") -> SqueezeResult:
    """System noise, noise-model fit and squeezing level across a pump sweep.

    All noise inputs are quanta at the HEMT input plane; ``G_a`` is the measured
    amplified-quadrature gain for each sweep point. The system noise is referred
    to the TWPA input through ``A_att`` and ``G_a``; its fitted ``N_HEMT`` is
    therefore the input-referred post-amplifier noise. With
    ``unphysical="nan"`` points whose on/off ratio cannot be inverted (scatter
    below the floor) are reported as NaN instead of raising.
    """
    if unphysical not in ("raise", "nan"):
        raise DomainError(f"unknown unphysical policy {unphysical!r}")
    G_a = np.atleast_1d(np.asarray(G_a, dtype=float))
    amp = np.atleast_1d(np.asarray(N_amp_on, dtype=float))
    sq = np.atleast_1d(np.asarray(N_sq_on, dtype=float))
    off = np.atleast_1d(np.asarray(N_off, dtype=float))
    p = params
    N_sys = amp / (p.A_att * G_a) - p.N_mK
    if np.unique(G_a).size >= 2:
        fit = fit_noise_model(G_a, N_sys)
        N_HEMT, N_a, res = fit.N_HEMT, fit.N_a, fit.residual
    else:
        N_HEMT = N_a = res = float("nan")
    ext_params = p.replace(N_pa=assumed_N_pa)
    g_sq = np.empty_like(G_a)
    sqz = np.empty_like(G_a)
    for j in range(G_a.size):
        ratio = min(sq[j] / off[j], 1.0)
        try:
            g_sq[j], sqz[j] = extract_squeezing(ratio, ext_params, orientation)
        except UnphysicalRatioError:
            if unphysical == "raise":
                raise
            g_sq[j] = sqz[j] = np.nan
    G_sq_dB = 10 * np.log10(g_sq) if orientation == "physical" else -10 * np.log10(g_sq)
    return SqueezeResult(10 * np.log10(G_a), G_sq_dB, sqz, N_sys, N_HEMT, N_a, res)


def simulate_noise_measurement(freq_grid, gain, chain: ChainSettings, seed: int, *,
                               t_hot: float = 0.0, t_cold: float = 0.0,
                               t_off: float = 0.0, t_on: float = 0.0,
                               reference: str = "cold", scale: str = "quanta",
                               radiometer: bool = True) -> NoiseRun:
    """Synthesize HOT, COLD, TWPA_OFF and TWPA_ON traces and extract A(nu).

    ``reference="off"`` uses the TWPA_OFF trace instead of COLD as the
    cold-temperature calibration point.
    """
    nu = np.asarray(freq_grid, dtype=float)
    G = gain if isinstance(gain, GainSpectrum) else GainSpectrum(nu, _gain_array(gain, nu))
    seeds = np.random.SeedSequence(seed).spawn(4)
    times = {TraceConfig.HOT: t_hot, TraceConfig.COLD: t_cold,
             TraceConfig.TWPA_OFF: t_off, TraceConfig.TWPA_ON: t_on}
    traces = {
        cfg: synthesize_trace(cfg, nu, chain, G, t_min=times[cfg], seed=s, radiometer=radiometer)
        for cfg, s in zip(TraceConfig, seeds)
    }
    cold = traces[TraceConfig.COLD] if reference == "cold" else traces[TraceConfig.TWPA_OFF]
    cal = calibrate(traces[TraceConfig.HOT], cold, chain.T_hot, chain.T_cold, scale)
    a = added_noise(traces[TraceConfig.TWPA_ON], traces[TraceConfig.TWPA_OFF], cal, G)
    return NoiseRun(traces, cal, G, a, quantum_limit(np.maximum(_gain_array(G, nu), 1.0)))


_HEADER = re.compile(
    r"^# twpa-trace v1, config=(?P<config>[A-Z_]+), unit=(?P<unit>[A-Za-z_]+), "
    r"rbw_hz=(?P<rbw>[^,]+), t_min=(?P<t>[^,]+), n_avg=(?P<n>\S+)\s*$"
)


def write_trace(trace: NoiseTrace, path, unit: str = "W_per_Hz") -> None:
    """Write ``trace`` in the twpa-trace v1 CSV schema."""
    if unit == "W_per_Hz":
        values = trace.power
    elif unit == "dBm":
        values = 10 * np.log10(trace.power * trace.rbw) + 30
    else:
        raise DomainError(f"unknown unit {unit!r}")
    lines = [
        f"# twpa-trace v1, config={trace.config.value}, unit={unit}, "
        f"rbw_hz={float(trace.rbw)!r}, t_min={float(trace.t_meas)!r}, n_avg={int(trace.n_avg)}"
    ]
    lines += [f"{float(f)!r},{float(v)!r}" for f, v in zip(trace.freq_grid, values)]
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def ingest_trace(path) -> NoiseTrace:
    """Read and validate a twpa-trace v1 file; dBm-in-RBW is converted to W/Hz."""
    path = Path(path)
    text = path.read_text()
    lines = text.split("\n")
    if not lines or not lines[0].startswith("#"):
        raise TraceFormatError(f"{path}: missing '# twpa-trace v1' header")
    if "unit=" not in lines[0]:
        raise TraceFormatError(f"{path}: header lacks the unit tag")
    mh = _HEADER.match(lines[0])
    if mh is None:
        raise TraceFormatError(f"{path}: malformed header {lines[0]!r}")
    try:
        config = TraceConfig(mh["config"])
        rbw = float(mh["rbw"])
        t_min = float(mh["t"])
        n_avg = int(mh["n"])
    except ValueError as exc:
        raise TraceFormatError(f"{path}: bad header field: {exc}") from exc
    unit = mh["unit"]
    if unit not in ("W_per_Hz", "dBm"):
        raise TraceFormatError(f"{path}: unknown unit {unit!r}")
    freqs, vals = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise TraceFormatError(f"{path}:{lineno}: expected 'freq_hz,power'")
        try:
            f, v = float(parts[0]), float(parts[1])
        except ValueError:
            raise TraceFormatError(f"{path}:{lineno}: non-numeric value") from None
        if not (math.isfinite(f) and math.isfinite(v)):
            raise TraceFormatError(f"{path}:{lineno}: non-finite value")
        freqs.append(f)
        vals.append(v)
    if not freqs:
        raise TraceFormatError(f"{path}: no data rows")
    f = np.array(freqs)
    if np.any(np.diff(f) <= 0):
        raise TraceFormatError(f"{path}: frequency grid is not strictly increasing")
    v = np.array(vals)
    power = v if unit == "W_per_Hz" else 10 ** ((v - 30) / 10) / rbw
    if np.any(power <= 0):
        raise TraceFormatError(f"{path}: non-positive power")
    return NoiseTrace(f, power, config, t_min, rbw, n_avg)


def read_gain_csv(path) -> GainSpectrum:
    """Read an ``f_Hz,gain_dB`` file as written by `twpa_studio.cme.write_gain_csv`."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["f_Hz", "gain_dB"]:
        raise TraceFormatError(f"{path}: expected header 'f_Hz,gain_dB'")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    except ValueError as exc:
        raise TraceFormatError(f"{path}: malformed row: {exc}") from exc
    if data.size == 0 or not np.all(np.isfinite(data)):
        raise TraceFormatError(f"{path}: empty or non-finite gain data")
    return GainSpectrum(data[:, 0], 10 ** (data[:, 1] / 10))
