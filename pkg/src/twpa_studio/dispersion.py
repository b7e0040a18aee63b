"""Bloch dispersion of the stub-loaded, periodically modulated line.

A unit cell is half a series segment, a shunt pair of open stubs and another
half segment. One modulation period (the supercell) is the cascade of
``stub_modulation_wavelength / stub_pitch`` cells whose stub lengths follow the
sinusoidal modulation. The Bloch wavenumber follows from
``cos(beta * period) = (A + D) / 2`` of the supercell ABCD matrix.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .device import (
    DeviceGeometry,
    LineConstants,
    series_line_constants,
    stub_line_constants,
)
from .errors import ConfigError, DomainError

__all__ = [
    "UnitCell",
    "DispersionCurve",
    "StubAntiresonanceWarning",
    "stub_input_impedance",
    "line_segment_abcd",
    "unit_cell_abcd",
    "supercell_cells",
    "supercell_abcd",
    "bloch_dispersion",
    "find_bandgaps",
    "phase_mismatch",
    "loss_nepers_per_m",
    "write_dispersion_csv",
]

GAP_THRESHOLD = 1e-9


class StubAntiresonanceWarning(RuntimeWarning):
    """The open stub is an integer number of half wavelengths long."""


@dataclass(frozen=True)
class UnitCell:
    series_segment_length: float
    line_constants: LineConstants
    stub_length: float
    stub_line_constants: LineConstants
    n_stubs: int = 2
    # "distributed" keeps the open-stub tan() dispersion; "lumped" replaces each
    # stub by its static capacitance.
    stub_model: str = "distributed"


@dataclass
class DispersionCurve:
    freq_grid: np.ndarray
    beta: np.ndarray
    bloch_impedance: np.ndarray
    gaps: list = field(default_factory=list)
    half_trace: np.ndarray | None = None  # (A + D) / 2 of the supercell, real part
    period: float = float("nan")

    def beta_at(self, f) -> np.ndarray:
        """Real Bloch wavenumber at ``f`` by linear interpolation."""
        return self._interp(f, self.beta.real)

    def alpha_at(self, f) -> np.ndarray:
        """Power attenuation constant ``2 Im(beta)`` at ``f``."""
        return 2.0 * self._interp(f, self.beta.imag)

    def in_gap(self, f) -> bool:
        return any(lo <= f <= hi for lo, hi in self.gaps)

    def _interp(self, f, values):
        f = np.asarray(f, dtype=float)
        lo, hi = self.freq_grid[0], self.freq_grid[-1]
        if np.any(f < lo) or np.any(f > hi):
            raise DomainError(
                f"frequency outside dispersion grid [{lo:.6g}, {hi:.6g}] Hz: {f}"
            )
        return np.interp(f, self.freq_grid, values)


def stub_input_impedance(f, stub_length: float, stub_line: LineConstants):
    """Input impedance ``-i Z0 cot(beta l)`` of a lossless open-circuited stub.

    At antiresonance (``l`` a multiple of half a wavelength) the cotangent
    diverges; a large finite value is returned and
    `StubAntiresonanceWarning` is emitted.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise DomainError("stub_input_impedance needs f > 0")
    theta = 2 * np.pi * f / stub_line.v_ph * stub_length
    s, co = np.sin(theta), np.cos(theta)
    singular = np.abs(s) < 1e-12
    if np.any(singular):
        warnings.warn("stub antiresonance: open stub is n half-wavelengths long",
                      StubAntiresonanceWarning, stacklevel=2)
        s = np.where(singular, np.copysign(1e-300, s + 0.0), s)
    z = np.asarray(-1j * stub_line.Z0 * co / s)
    return z[()] if z.ndim == 0 else z


def _stub_admittance(f: np.ndarray, cell: UnitCell) -> np.ndarray:
    if cell.n_stubs == 0 or cell.stub_length == 0:
        return np.zeros_like(f, dtype=complex)
    sl = cell.stub_line_constants
    if cell.stub_model == "lumped":
        y = 1j * 2 * np.pi * f * sl.C_per_m * cell.stub_length
    elif cell.stub_model == "distributed":
        # admittance form stays finite at antiresonance
        y = 1j * np.tan(2 * np.pi * f / sl.v_ph * cell.stub_length) / sl.Z0
    else:
        raise ConfigError(f"unknown stub_model {cell.stub_model!r}")
    return cell.n_stubs * y


def line_segment_abcd(f, length: float, line: LineConstants) -> np.ndarray:
    """ABCD matrices (shape ``f.shape + (2, 2)``) of a lossless line segment."""
    f = np.asarray(f, dtype=float)
    bl = 2 * np.pi * f / line.v_ph * length
    m = np.empty(f.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = np.cos(bl)
    m[..., 0, 1] = 1j * line.Z0 * np.sin(bl)
    m[..., 1, 0] = 1j * np.sin(bl) / line.Z0
    m[..., 1, 1] = np.cos(bl)
    return m


def unit_cell_abcd(f, cell: UnitCell, segments: int = 1) -> np.ndarray:
    """Half segment, shunt stubs, half segment.

    ``segments`` splits each half segment into equal pieces (used only for
    convergence checks; a uniform line cascades exactly).
    """
    f = np.asarray(f, dtype=float)
    half = line_segment_abcd(f, cell.series_segment_length / (2 * segments), cell.line_constants)
    h = half
    for _ in range(segments - 1):
        h = h @ half
    shunt = np.zeros(f.shape + (2, 2), dtype=complex)
    shunt[..., 0, 0] = 1
    shunt[..., 1, 1] = 1
    shunt[..., 1, 0] = _stub_admittance(f, cell)
    return h @ shunt @ h


def supercell_cells(geometry: DeviceGeometry, I_DC: float = 0.0,
                    stub_model: str = "distributed", extra_modulations=()) -> list[UnitCell]:
    """Unit cells of one modulation period.

    ``extra_modulations`` is a sequence of ``(amplitude_m, wavelength_m)``
    superposed on the primary sinusoid; every wavelength must divide the
    supercell length into whole periods.
    """
    ratio = geometry.cells_per_period
    n_cells = int(round(ratio))
    if n_cells < 1 or abs(ratio - n_cells) > 1e-9 * ratio:
        raise ConfigError(
            f"modulation wavelength {geometry.stub_modulation_wavelength} m is not an "
            f"integer multiple of stub pitch {geometry.stub_pitch} m"
        )
    period = geometry.stub_modulation_wavelength
    for _, wl in extra_modulations:
        k = period / wl
        if abs(k - round(k)) > 1e-9 * k:
            raise ConfigError(f"extra modulation wavelength {wl} does not divide the supercell")
    line = series_line_constants(geometry, I_DC)
    stub = stub_line_constants(geometry)
    d = geometry.stub_pitch
    cells = []
    for n in range(n_cells):
        z = (n + 0.5) * d
        length = geometry.stub_length_avg + geometry.stub_modulation_amplitude * math.sin(
            2 * math.pi * z / period)
        for amp, wl in extra_modulations:
            length += amp * math.sin(2 * math.pi * z / wl)
        if length <= 0:
            raise ConfigError("modulated stub length became non-positive")
        cells.append(UnitCell(d, line, length, stub, stub_model=stub_model))
    return cells


def supercell_abcd(f, cells, segments: int = 1) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    total = np.broadcast_to(np.eye(2, dtype=complex), f.shape + (2, 2)).copy()
    for cell in cells:
        total = total @ unit_cell_abcd(f, cell, segments)
    return total


def loss_nepers_per_m(f, geometry: DeviceGeometry) -> np.ndarray:
    """Power attenuation constant (1/m) from the whole-line dB/GHz loss slope."""
    loss_db = geometry.loss_db_per_ghz * np.asarray(f, dtype=float) / 1e9
    return loss_db * math.log(10) / 10 / geometry.line_length


def _bloch_impedance(m: np.ndarray) -> np.ndarray:
    A, B, D = m[..., 0, 0], m[..., 0, 1], m[..., 1, 1]
    root = np.sqrt((A + D) ** 2 - 4 + 0j)
    with np.errstate(divide="ignore", invalid="ignore"):
        z1 = -2 * B / (A - D - root)
        z2 = -2 * B / (A - D + root)
    return np.where(z1.real >= z2.real, z1, z2)


def bloch_dispersion(freq_grid, geometry: DeviceGeometry, I_DC: float = 0.0, *,
                     stub_model: str = "distributed", segments: int = 1,
                     extra_modulations=()) -> DispersionCurve:
    """Bloch wavenumber, Bloch impedance and stopbands over ``freq_grid``."""
    f = np.asarray(freq_grid, dtype=float)
    if f.ndim != 1 or f.size == 0:
        raise DomainError("freq_grid must be a non-empty 1-D array")
    if np.any(np.diff(f) <= 0):
        raise DomainError("freq_grid must be strictly increasing")
    if np.any(f <= 0):
        raise DomainError("freq_grid must be positive")

    cells = supercell_cells(geometry, I_DC, stub_model, extra_modulations)
    period = geometry.stub_modulation_wavelength
    m = supercell_abcd(f, cells, segments)
    x = 0.5 * (m[..., 0, 0] + m[..., 1, 1]).real

    # Branch guide: the unmodulated cell, whose own Bloch phase stays in [0, pi]
    # well below the stub resonance.
    avg = UnitCell(geometry.stub_pitch, cells[0].line_constants, geometry.stub_length_avg,
                   cells[0].stub_line_constants, stub_model=stub_model)
    m1 = unit_cell_abcd(f, avg, segments)
    x1 = np.clip(0.5 * (m1[..., 0, 0] + m1[..., 1, 1]).real, -1.0, 1.0)
    guide = np.arccos(x1) * len(cells)

    theta = np.arccos(x.astype(complex))  # Re in [0, pi]
    re_t, im_t = theta.real, np.abs(theta.imag)
    inside = np.abs(x) <= 1 + GAP_THRESHOLD
    im_t = np.where(inside, 0.0, im_t)
    re_t = np.where(inside & (np.abs(x) > 1), np.where(x > 0, 0.0, np.pi), re_t)
    # choose 2*pi*n +/- theta nearest the guide
    n_plus = np.round((guide - re_t) / (2 * np.pi))
    n_minus = np.round((guide + re_t) / (2 * np.pi))
    c_plus = 2 * np.pi * n_plus + re_t
    c_minus = 2 * np.pi * n_minus - re_t
    phase = np.where(np.abs(c_plus - guide) <= np.abs(c_minus - guide), c_plus, c_minus)

    alpha = loss_nepers_per_m(f, geometry)
    beta = phase / period + 1j * (im_t / period + alpha / 2)
    curve = DispersionCurve(freq_grid=f, beta=beta, bloch_impedance=_bloch_impedance(m),
                            half_trace=x, period=period)
    curve.gaps = find_bandgaps(curve)
    return curve


def find_bandgaps(curve: DispersionCurve) -> list[tuple[float, float]]:
    """Contiguous runs with ``|(A + D)/2| > 1``; edges linearly interpolated."""
    f = np.asarray(curve.freq_grid, dtype=float)
    if f.size == 0:
        raise DomainError("empty dispersion curve")
    x = np.abs(np.asarray(curve.half_trace))
    out = x > 1 + GAP_THRESHOLD
    gaps = []
    i = 0
    n = f.size
    while i < n:
        if not out[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and out[j + 1]:
            j += 1
        lo = f[i] if i == 0 else _crossing(f[i - 1], f[i], x[i - 1], x[i])
        hi = f[j] if j == n - 1 else _crossing(f[j], f[j + 1], x[j], x[j + 1])
        gaps.append((float(lo), float(hi)))
        i = j + 1
    return gaps


def _crossing(f0, f1, x0, x1):
    return f0 + (1.0 - x0) * (f1 - f0) / (x1 - x0)


def phase_mismatch(f_signal: float, f_pump: float, curve: DispersionCurve) -> float:
    """``beta(f_p) - beta(f_s) - beta(f_p - f_s)`` from the real Bloch wavenumber."""
    if not 0 < f_signal < f_pump:
        raise DomainError("need 0 < f_signal < f_pump")
    f_idler = f_pump - f_signal
    b = curve.beta_at(np.array([f_pump, f_signal, f_idler]))
    return float(b[0] - b[1] - b[2])


def write_dispersion_csv(curve: DispersionCurve, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["f_Hz", "Re_beta", "Im_beta", "Re_Zbloch", "in_gap"])
        x = np.abs(curve.half_trace)
        for fi, bi, zi, xi in zip(curve.freq_grid, curve.beta, curve.bloch_impedance, x):
            w.writerow([repr(float(fi)), repr(float(bi.real)), repr(float(bi.imag)),
                        repr(float(np.real(zi))), int(xi > 1 + GAP_THRESHOLD)])


def bare_stub_resonance(geometry: DeviceGeometry) -> float:
    """Quarter-wave resonance of the average-length stub."""
    return geometry.bare_phase_velocity_stub * SPEED_OF_LIGHT / (4 * geometry.stub_length_avg)
