"""Device description and electrical line constants.

All quantities are SI. The loaded line (centre conductor plus stub capacitance)
is described by its zero-current per-unit-length inductance and capacitance;
`DeviceGeometry.from_targets` builds these from a characteristic impedance and
phase velocity.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from scipy.constants import c as SPEED_OF_LIGHT

from .errors import ConfigError, DomainError, SuperconductivityBrokenError

__all__ = [
    "DeviceGeometry",
    "LineConstants",
    "line_constants_from_targets",
    "kinetic_inductance",
    "dc_retuning",
    "stub_count",
    "loaded_line_constants",
    "stub_line_constants",
    "series_line_constants",
    "ripple_period",
]


@dataclass(frozen=True)
class LineConstants:
    """Per-unit-length inductance and capacitance of a TEM line."""

    L_per_m: float
    C_per_m: float

    def __post_init__(self):
        if not (self.L_per_m > 0 and self.C_per_m > 0):
            raise DomainError(
                f"line constants must be positive, got L={self.L_per_m}, C={self.C_per_m}"
            )

    @property
    def Z0(self) -> float:
        return math.sqrt(self.L_per_m / self.C_per_m)

    @property
    def v_ph(self) -> float:
        return 1.0 / math.sqrt(self.L_per_m * self.C_per_m)


def line_constants_from_targets(Z0: float, v_ph: float) -> LineConstants:
    """Invert ``Z0 = sqrt(L/C)`` and ``v_ph = 1/sqrt(LC)``."""
    if not (Z0 > 0 and v_ph > 0):
        raise DomainError(f"Z0 and v_ph must be positive, got {Z0}, {v_ph}")
    if v_ph > SPEED_OF_LIGHT:
        raise DomainError(f"phase velocity {v_ph} exceeds c")
    return LineConstants(L_per_m=Z0 / v_ph, C_per_m=1.0 / (Z0 * v_ph))


@dataclass(frozen=True)
class DeviceGeometry:
    """Physical description of the stub-loaded, length-modulated microstrip.

    ``inductance_per_m`` and ``capacitance_per_m`` describe the loaded line at
    zero current and low frequency, i.e. they already include the stub
    capacitance. The stub line is assumed to share the centre line's inductance
    per unit length (same film, width and dielectric), so its capacitance
    follows from ``bare_phase_velocity_stub``.
    """

    line_length: float = 86e-3
    conductor_width: float = 250e-9
    conductor_thickness: float = 35e-9
    dielectric_thickness: float = 190e-9
    stub_length_avg: float = 26e-6
    stub_width: float = 250e-9
    stub_pitch: float = 2e-6
    stub_modulation_amplitude: float = 2e-6
    stub_modulation_wavelength: float = 110e-6
    bare_phase_velocity_stub: float = 0.052  # fraction of c
    loss_db_per_ghz: float = 0.038  # whole-line insertion loss slope
    inductance_per_m: float = 50.0 / (0.0078 * SPEED_OF_LIGHT)
    capacitance_per_m: float = 1.0 / (50.0 * 0.0078 * SPEED_OF_LIGHT)
    I_star: float = 4.8e-3
    I_c: float = 1.2e-3

    def __post_init__(self):
        lengths = {
            "line_length": self.line_length,
            "conductor_width": self.conductor_width,
            "conductor_thickness": self.conductor_thickness,
            "dielectric_thickness": self.dielectric_thickness,
            "stub_length_avg": self.stub_length_avg,
            "stub_width": self.stub_width,
            "stub_pitch": self.stub_pitch,
            "stub_modulation_wavelength": self.stub_modulation_wavelength,
        }
        for name, value in lengths.items():
            if not value > 0:
                raise ConfigError(f"{name} must be strictly positive, got {value}")
        if not 0 <= self.stub_modulation_amplitude < self.stub_length_avg:
            raise ConfigError("stub_modulation_amplitude must lie in [0, stub_length_avg)")
        if not self.stub_pitch < self.stub_modulation_wavelength:
            raise ConfigError("stub_pitch must be smaller than stub_modulation_wavelength")
        if not (self.I_c > 0 and self.I_star > 0):
            raise ConfigError("I_c and I_star must be strictly positive")
        if not 0 < self.bare_phase_velocity_stub <= 1:
            raise ConfigError("bare_phase_velocity_stub is a fraction of c in (0, 1]")
        if self.loss_db_per_ghz < 0:
            raise ConfigError("loss_db_per_ghz must be non-negative")
        if not (self.inductance_per_m > 0 and self.capacitance_per_m > 0):
            raise ConfigError("inductance_per_m and capacitance_per_m must be positive")
        if stub_capacitance_per_m(self) >= self.capacitance_per_m:
            raise ConfigError(
                "stub capacitance exceeds the loaded-line capacitance; "
                "lower bare_phase_velocity_stub or raise the target capacitance"
            )

    @classmethod
    def from_targets(cls, Z0: float, v_ph: float, **kwargs) -> "DeviceGeometry":
        lc = line_constants_from_targets(Z0, v_ph)
        return cls(inductance_per_m=lc.L_per_m, capacitance_per_m=lc.C_per_m, **kwargs)

    def replace(self, **changes) -> "DeviceGeometry":
        return dataclasses.replace(self, **changes)

    @property
    def cells_per_period(self) -> float:
        return self.stub_modulation_wavelength / self.stub_pitch


def kinetic_inductance(I, L0: float, I_star: float, I_c: float | None = None):
    """Quadratic kinetic inductance ``L0 * (1 + (I/I_star)**2)``.

    Raises `SuperconductivityBrokenError` when ``|I| >= I_c`` (if given).
    """
    if not I_star > 0:
        raise DomainError(f"I_star must be positive, got {I_star}")
    if I_c is not None and abs(I) >= I_c:
        raise SuperconductivityBrokenError(
            f"superconductivity broken: |I| = {abs(I):.4g} A >= I_c = {I_c:.4g} A"
        )
    return L0 * (1.0 + (I / I_star) ** 2)


def loaded_line_constants(geometry: DeviceGeometry) -> LineConstants:
    return LineConstants(geometry.inductance_per_m, geometry.capacitance_per_m)


def stub_line_constants(geometry: DeviceGeometry) -> LineConstants:
    """Line constants of an individual open stub (unbiased: no DC flows in it)."""
    v = geometry.bare_phase_velocity_stub * SPEED_OF_LIGHT
    L = geometry.inductance_per_m
    return LineConstants(L_per_m=L, C_per_m=1.0 / (L * v * v))


def stub_capacitance_per_m(geometry: DeviceGeometry) -> float:
    # two stubs per pitch, static capacitance C_stub * length each
    v = geometry.bare_phase_velocity_stub * SPEED_OF_LIGHT
    c_stub = 1.0 / (geometry.inductance_per_m * v * v)
    return 2.0 * c_stub * geometry.stub_length_avg / geometry.stub_pitch


def series_line_constants(geometry: DeviceGeometry, I_DC: float = 0.0) -> LineConstants:
    """Centre-conductor constants with the stub capacitance removed, DC biased."""
    L = kinetic_inductance(I_DC, geometry.inductance_per_m, geometry.I_star, geometry.I_c)
    return LineConstants(L, geometry.capacitance_per_m - stub_capacitance_per_m(geometry))


def dc_retuning(geometry: DeviceGeometry, I_DC: float) -> LineConstants:
    """Loaded-line constants under a DC bias; capacitance is current independent."""
    L = kinetic_inductance(I_DC, geometry.inductance_per_m, geometry.I_star, geometry.I_c)
    return LineConstants(L, geometry.capacitance_per_m)


def stub_count(geometry: DeviceGeometry) -> int:
    """Number of stubs on both sides of the line."""
    # tolerate ratios like 1e-3/1e-6 = 1000.0000000000001
    return int(math.floor(geometry.line_length / geometry.stub_pitch * (1 + 1e-12))) * 2


def ripple_period(geometry: DeviceGeometry, I_DC: float, period_at_zero_bias: float = 8e6) -> float:
    """Standing-wave ripple period rescaled by the DC-induced phase-velocity change."""
    v0 = loaded_line_constants(geometry).v_ph
    return period_at_zero_bias * dc_retuning(geometry, I_DC).v_ph / v0
