"""Experiment configuration: YAML file -> validated dataclasses.

Keys carry their unit as a suffix (``_m``, ``_hz``, ``_a``, ``_db``, ``_c`` for
fractions of the speed of light, ``_k`` for kelvin). Values are coerced with
``float()`` so ``250e-9`` works even though YAML reads it as a string.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml
from scipy.constants import c as SPEED_OF_LIGHT

from .cme import OperatingPoint
from .device import DeviceGeometry, line_constants_from_targets
from .errors import ConfigError, TwpaError
from .measurement import ChainSettings
from .noise import AmpChainParams

log = logging.getLogger(__name__)

__all__ = ["ExperimentConfig", "load_config", "load_preset", "PRESETS", "merge"]

PRESETS = {"paper-device": "paper-device.yaml"}

DEVICE_KEYS = {
    "line_length_m": "line_length",
    "conductor_width_m": "conductor_width",
    "conductor_thickness_m": "conductor_thickness",
    "dielectric_thickness_m": "dielectric_thickness",
    "stub_length_avg_m": "stub_length_avg",
    "stub_width_m": "stub_width",
    "stub_pitch_m": "stub_pitch",
    "stub_modulation_amplitude_m": "stub_modulation_amplitude",
    "stub_modulation_wavelength_m": "stub_modulation_wavelength",
    "bare_phase_velocity_stub_c": "bare_phase_velocity_stub",
    "loss_db_per_ghz": "loss_db_per_ghz",
    "i_star_a": "I_star",
    "i_c_a": "I_c",
}
DEVICE_EXTRA = {"impedance_ohm", "phase_velocity_c", "inductance_h_per_m", "capacitance_f_per_m"}

OP_KEYS = {
    "i_dc_a": "I_DC",
    "f_pump_hz": "f_pump",
    "i_pump_a": "I_pump",
    "f_signal_hz": "f_signal",
    "phase_signal_rad": "phase_signal",
}
OP_EXTRA = {"signal_power_dbm"}

CHAIN_PARAM_KEYS = {
    "n_hemt_quanta": "N_HEMT",
    "n_mk_quanta": "N_mK",
    "n_a_quanta": "N_a",
    "n_pa_quanta": "N_pa",
}
CHAIN_KEYS = {
    "t_hot_k": "T_hot",
    "t_cold_k": "T_cold",
    "t_input_k": "T_input",
    "ripple_amplitude": "ripple_amplitude",
    "ripple_period_hz": "ripple_period",
    "drift_db_per_100min": "drift_db_per_100min",
    "rbw_hz": "rbw",
    "twpa_excess_quanta": "twpa_excess_quanta",
}
CHAIN_EXTRA = {"a_att_db", "post_gain_db", "n_avg", "reflect_in_db", "reflect_out_db"}


@dataclass(frozen=True)
class Sweep:
    start: float
    stop: float
    points: int

    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class NoiseRunSettings:
    t_hot_min: float = 0.0
    t_cold_min: float = 0.0
    t_off_min: float = 0.0
    t_on_min: float = 0.0
    reference: str = "cold"
    scale: str = "quanta"
    band_min_gain_db: float = 15.0
    radiometer: bool = True


@dataclass(frozen=True)
class SqueezeSettings:
    f_pump: float = 11.313e9
    max_pump_current: float = 2.0e-4
    attenuation_db: tuple = tuple(float(x) for x in range(0, 31, 2))
    n_phases: int = 16
    lossless: bool = False
    radiometer: bool = False
    assumed_n_pa: float = 0.0
    orientation: str = "physical"


@dataclass
class ExperimentConfig:
    device: DeviceGeometry = field(default_factory=DeviceGeometry)
    operating_point: OperatingPoint = field(
        default_factory=lambda: OperatingPoint(I_DC=0.579e-3, f_pump=11.297e9, I_pump=1.859e-4,
                                               f_signal=5.0e9))
    chain: ChainSettings = field(default_factory=ChainSettings)
    dispersion_grid: Sweep = Sweep(0.1e9, 25e9, 24901)
    gain_grid: Sweep = Sweep(0.5e9, 10.8e9, 104)
    compression_dbm: Sweep = Sweep(-90.0, -40.0, 51)
    noise_grid: Sweep = Sweep(3.0e9, 8.3e9, 531)
    noise_run: NoiseRunSettings = NoiseRunSettings()
    squeeze: SqueezeSettings = SqueezeSettings()
    reflect_in_db: float = -20.0
    reflect_out_db: float = -20.0
    seed: int | None = None
    output_dir: str = "out"


def merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; ``override`` wins."""
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = value
    return out


def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    text = resources.files("twpa_studio.presets").joinpath(PRESETS[name]).read_text()
    return yaml.safe_load(text) or {}


def _num(value, path: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected a number, got {value!r}") from None


def _int(value, path: str) -> int:
    f = _num(value, path)
    if f != int(f):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return int(f)


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name, {}) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected a mapping")
    return sec


def _check_keys(sec: dict, name: str, allowed) -> None:
    for key in sec:
        if key not in allowed:
            raise ConfigError(f"{name}.{key}: unknown key")


def _sweep(sec: dict, path: str, default: Sweep) -> Sweep:
    if not sec:
        return default
    _check_keys(sec, path, {"start", "stop", "points", "step"})
    start = _num(sec.get("start", default.start), f"{path}.start")
    stop = _num(sec.get("stop", default.stop), f"{path}.stop")
    if "step" in sec:
        step = _num(sec["step"], f"{path}.step")
        if step <= 0:
            raise ConfigError(f"{path}.step: must be positive")
        points = int(round((stop - start) / step)) + 1
    else:
        points = _int(sec.get("points", default.points), f"{path}.points")
    if points < 2 or not stop > start:
        raise ConfigError(f"{path}: need stop > start and at least 2 points")
    return Sweep(start, stop, points)


def _device(sec: dict) -> DeviceGeometry:
    _check_keys(sec, "device", set(DEVICE_KEYS) | DEVICE_EXTRA)
    kwargs = {DEVICE_KEYS[k]: _num(v, f"device.{k}") for k, v in sec.items() if k in DEVICE_KEYS}
    if "bare_phase_velocity_stub" not in kwargs:
        log.warning("device.bare_phase_velocity_stub_c not set; defaulting to 0.052c")
    if "impedance_ohm" in sec or "phase_velocity_c" in sec:
        if "inductance_h_per_m" in sec or "capacitance_f_per_m" in sec:
            raise ConfigError("device: give either impedance/phase velocity or L/C, not both")
        Z0 = _num(sec.get("impedance_ohm", 50.0), "device.impedance_ohm")
        v = _num(sec.get("phase_velocity_c", 0.0078), "device.phase_velocity_c") * SPEED_OF_LIGHT
        try:
            lc = line_constants_from_targets(Z0, v)
        except TwpaError as exc:
            raise ConfigError(f"device.impedance_ohm/phase_velocity_c: {exc}") from exc
        kwargs["inductance_per_m"] = lc.L_per_m
        kwargs["capacitance_per_m"] = lc.C_per_m
    else:
        if "inductance_h_per_m" in sec:
            kwargs["inductance_per_m"] = _num(sec["inductance_h_per_m"], "device.inductance_h_per_m")
        if "capacitance_f_per_m" in sec:
            kwargs["capacitance_per_m"] = _num(sec["capacitance_f_per_m"], "device.capacitance_f_per_m")
    try:
        return DeviceGeometry(**kwargs)
    except TwpaError as exc:
        raise ConfigError(f"device: {exc}") from exc


def _operating_point(sec: dict, device: DeviceGeometry, default: OperatingPoint) -> OperatingPoint:
    _check_keys(sec, "operating_point", set(OP_KEYS) | OP_EXTRA)
    kwargs = {OP_KEYS[k]: _num(v, f"operating_point.{k}") for k, v in sec.items() if k in OP_KEYS}
    if "signal_power_dbm" in sec:
        p = _num(sec["signal_power_dbm"], "operating_point.signal_power_dbm")
        kwargs["signal_power_in"] = 10 ** ((p - 30) / 10)
    op = default.replace(**kwargs)
    if op.f_pump <= 0:
        raise ConfigError("operating_point.f_pump_hz: must be positive")
    if op.f_signal is not None and not 0 < op.f_signal < op.f_pump:
        raise ConfigError("operating_point.f_signal_hz: must lie in (0, f_pump)")
    try:
        op.validate(device)
    except TwpaError as exc:
        raise ConfigError(f"operating_point: {exc}") from exc
    return op


def _chain(sec: dict) -> tuple[ChainSettings, float, float]:
    _check_keys(sec, "chain", set(CHAIN_PARAM_KEYS) | set(CHAIN_KEYS) | CHAIN_EXTRA)
    pk = {CHAIN_PARAM_KEYS[k]: _num(v, f"chain.{k}") for k, v in sec.items() if k in CHAIN_PARAM_KEYS}
    if "a_att_db" in sec:
        pk["A_att"] = 10 ** (-abs(_num(sec["a_att_db"], "chain.a_att_db")) / 10)
    try:
        params = AmpChainParams(**pk)
    except TwpaError as exc:
        raise ConfigError(f"chain: {exc}") from exc
    ck = {CHAIN_KEYS[k]: _num(v, f"chain.{k}") for k, v in sec.items() if k in CHAIN_KEYS}
    if "post_gain_db" in sec:
        ck["post_gain"] = 10 ** (_num(sec["post_gain_db"], "chain.post_gain_db") / 10)
    if "n_avg" in sec:
        ck["n_avg"] = _int(sec["n_avg"], "chain.n_avg")
        if ck["n_avg"] < 1:
            raise ConfigError("chain.n_avg: must be >= 1")
    for key in ("T_hot", "T_cold", "T_input", "rbw", "ripple_period"):
        if key in ck and not ck[key] > 0:
            raise ConfigError(f"chain.{key}: must be positive")
    if ck.get("T_hot", 3.38) <= ck.get("T_cold", 0.02):
        raise ConfigError("chain.t_hot_k: must exceed chain.t_cold_k")
    r_in = _num(sec.get("reflect_in_db", -20.0), "chain.reflect_in_db")
    r_out = _num(sec.get("reflect_out_db", -20.0), "chain.reflect_out_db")
    if r_in > 0 or r_out > 0:
        raise ConfigError("chain.reflect_in_db/reflect_out_db: must be <= 0 dB")
    return ChainSettings(params=params, **ck), r_in, r_out


def _noise_run(sec: dict) -> NoiseRunSettings:
    keys = {"t_hot_min", "t_cold_min", "t_off_min", "t_on_min", "reference", "scale",
            "band_min_gain_db", "radiometer"}
    _check_keys(sec, "noise_run", keys)
    kw: dict[str, Any] = {k: _num(v, f"noise_run.{k}") for k, v in sec.items()
                          if k not in ("reference", "scale", "radiometer")}
    if "radiometer" in sec:
        if not isinstance(sec["radiometer"], bool):
            raise ConfigError("noise_run.radiometer: expected true/false")
        kw["radiometer"] = sec["radiometer"]
    if "reference" in sec:
        if sec["reference"] not in ("cold", "off"):
            raise ConfigError("noise_run.reference: must be 'cold' or 'off'")
        kw["reference"] = sec["reference"]
    if "scale" in sec:
        if sec["scale"] not in ("quanta", "temperature"):
            raise ConfigError("noise_run.scale: must be 'quanta' or 'temperature'")
        kw["scale"] = sec["scale"]
    return NoiseRunSettings(**kw)


def _squeeze(sec: dict) -> SqueezeSettings:
    keys = {"f_pump_hz", "max_pump_current_a", "attenuation_db", "n_phases", "lossless",
            "radiometer", "assumed_n_pa_quanta", "orientation"}
    _check_keys(sec, "squeeze", keys)
    kw: dict[str, Any] = {}
    if "f_pump_hz" in sec:
        kw["f_pump"] = _num(sec["f_pump_hz"], "squeeze.f_pump_hz")
    if "max_pump_current_a" in sec:
        kw["max_pump_current"] = _num(sec["max_pump_current_a"], "squeeze.max_pump_current_a")
    if "attenuation_db" in sec:
        att = sec["attenuation_db"]
        if isinstance(att, dict):
            kw["attenuation_db"] = tuple(float(x) for x in _sweep(att, "squeeze.attenuation_db",
                                                                   Sweep(0, 30, 16)).grid())
        elif isinstance(att, list) and att:
            kw["attenuation_db"] = tuple(_num(x, "squeeze.attenuation_db[]") for x in att)
        else:
            raise ConfigError("squeeze.attenuation_db: expected a list or a start/stop sweep")
    if "n_phases" in sec:
        kw["n_phases"] = _int(sec["n_phases"], "squeeze.n_phases")
        if kw["n_phases"] < 3:
            raise ConfigError("squeeze.n_phases: need at least 3 phases")
    for key in ("lossless", "radiometer"):
        if key in sec:
            if not isinstance(sec[key], bool):
                raise ConfigError(f"squeeze.{key}: expected true/false")
            kw[key] = sec[key]
    if "assumed_n_pa_quanta" in sec:
        kw["assumed_n_pa"] = _num(sec["assumed_n_pa_quanta"], "squeeze.assumed_n_pa_quanta")
    if "orientation" in sec:
        if sec["orientation"] not in ("physical", "literal"):
            raise ConfigError("squeeze.orientation: must be 'physical' or 'literal'")
        kw["orientation"] = sec["orientation"]
    return SqueezeSettings(**kw)


def build_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a mapping")
    known = {"device", "operating_point", "chain", "grids", "noise_run", "squeeze", "seed",
             "output_dir"}
    _check_keys(raw, "<root>", known)
    cfg = ExperimentConfig()
    device = _device(_section(raw, "device"))
    op = _operating_point(_section(raw, "operating_point"), device, cfg.operating_point)
    chain, r_in, r_out = _chain(_section(raw, "chain"))
    grids = _section(raw, "grids")
    _check_keys(grids, "grids", {"dispersion_hz", "gain_hz", "compression_dbm", "noise_hz"})
    seed = raw.get("seed")
    if seed is not None:
        seed = _int(seed, "seed")
    return ExperimentConfig(
        device=device,
        operating_point=op,
        chain=chain,
        dispersion_grid=_sweep(grids.get("dispersion_hz") or {}, "grids.dispersion_hz",
                               cfg.dispersion_grid),
        gain_grid=_sweep(grids.get("gain_hz") or {}, "grids.gain_hz", cfg.gain_grid),
        compression_dbm=_sweep(grids.get("compression_dbm") or {}, "grids.compression_dbm",
                               cfg.compression_dbm),
        noise_grid=_sweep(grids.get("noise_hz") or {}, "grids.noise_hz", cfg.noise_grid),
        noise_run=_noise_run(_section(raw, "noise_run")),
        squeeze=_squeeze(_section(raw, "squeeze")),
        reflect_in_db=r_in,
        reflect_out_db=r_out,
        seed=seed,
        output_dir=str(raw.get("output_dir", "out")),
    )


def load_config(path=None, preset: str | None = None) -> ExperimentConfig:
    """Preset (if any) overlaid by the YAML file at ``path`` (if any)."""
    raw: dict = load_preset(preset) if preset else {}
    if path is not None:
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
        raw = merge(raw, data or {})
    return build_config(raw)
