"""Quantum-noise bookkeeping in units of quanta.

Thermal occupation includes the zero-point half quantum, so an ideal cold
load contributes 0.5. ``AmpChainParams.A_att`` is the TWPA-to-HEMT power
transmission and ``N_HEMT`` the HEMT noise at the plane where the squeezed
output relation adds it (after the attenuation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.constants import h, k

from .errors import DomainError, UnphysicalRatioError

__all__ = [
    "AmpChainParams",
    "SqueezeExtraction",
    "quanta",
    "quanta_to_temperature",
    "quantum_limit",
    "system_noise",
    "squeezed_output_noise",
    "extract_squeezing",
    "pump_heating_excess",
    "input_referred_hemt_noise",
    "db_to_ratio",
    "ratio_to_db",
]

PUMP_HEATING_QUANTA = 0.077
PUMP_HEATING_REF_DBM = -15.7


def db_to_ratio(db):
    return 10 ** (np.asarray(db, dtype=float) / 10)


def ratio_to_db(ratio):
    return 10 * np.log10(ratio)


@dataclass(frozen=True)
class AmpChainParams:
    G_a: float = 1.0
    G_sq: float = 1.0
    N_a: float = 0.0
    N_pa: float = 0.0
    N_HEMT: float = 30.81
    A_att: float = 10 ** (-0.4)
    N_mK: float = 0.5

    def __post_init__(self):
        for name in ("G_a", "G_sq", "N_a", "N_pa", "N_HEMT", "N_mK"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")
        if not 0 < self.A_att <= 1:
            raise DomainError("A_att must lie in (0, 1]")

    def replace(self, **changes) -> "AmpChainParams":
        return replace(self, **changes)


class SqueezeExtraction(NamedTuple):
    G_sq: float
    squeezing_dB: float


def quanta(f, T):
    """Occupation ``0.5 coth(h f / 2 k T)``; exactly 0.5 at ``T = 0``."""
    f = np.asarray(f, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(f <= 0):
        raise DomainError("quanta needs f > 0")
    if np.any(T < 0):
        raise DomainError("quanta needs T >= 0")
    with np.errstate(divide="ignore", over="ignore"):
        x = np.where(T > 0, h * f / (k * np.where(T > 0, T, 1.0)), np.inf)
        # coth(x/2) = 1 + 2/expm1(x), stable at both ends
        n = 0.5 + 1.0 / np.expm1(x)
    return n[()] if n.ndim == 0 else n


def quanta_to_temperature(f, n):
    """Inverse of `quanta`: the temperature whose occupation at ``f`` is ``n``."""
    f = np.asarray(f, dtype=float)
    n = np.asarray(n, dtype=float)
    if np.any(n < 0.5):
        raise DomainError("occupation below the half-quantum floor has no temperature")
    with np.errstate(divide="ignore"):
        T = h * f / (k * np.log1p(1.0 / (n - 0.5)))
    return T[()] if T.ndim == 0 else T


def quantum_limit(G):
    """Minimum added noise ``0.5 (1 - 1/G)`` of a phase-insensitive amplifier."""
    G = np.asarray(G, dtype=float)
    if np.any(G < 1):
        raise DomainError("quantum_limit needs G >= 1")
    out = 0.5 * (1.0 - 1.0 / G)
    return out[()] if out.ndim == 0 else out


def system_noise(params: AmpChainParams) -> float:
    """Cascaded added noise ``N_a + N_HEMT / G_a`` referred to the TWPA input."""
    if not params.G_a > 0:
        raise DomainError("G_a must be positive")
    return params.N_a + params.N_HEMT / params.G_a


def squeezed_output_noise(params: AmpChainParams, orientation: str = "physical") -> float:
    """Output noise in the squeezed quadrature.

    ``physical`` (default) squeezes the input bath as ``N_mK * G_sq`` with
    ``G_sq <= 1``; ``literal`` divides instead (``N_mK / G_sq``), so the
    squeezing factor is quoted as a number above one.
    """
    p = params
    if not p.G_sq > 0:
        raise DomainError("G_sq must be positive")
    if orientation == "physical":
        bath = p.N_mK * p.G_sq
    elif orientation == "literal":
        bath = p.N_mK / p.G_sq
    else:
        raise DomainError(f"unknown orientation {orientation!r}")
    return (bath + p.N_pa) * p.A_att + p.N_mK * (1 - p.A_att) + p.N_HEMT


def extract_squeezing(ratio_on_off: float, params: AmpChainParams,
                      orientation: str = "physical") -> SqueezeExtraction:
    """Invert `squeezed_output_noise` for the squeezing factor.

    ``ratio_on_off`` is the squeezed-quadrature output noise with the TWPA on
    divided by the same with the TWPA off (``G_sq = 1``, ``N_pa = 0``). The
    ``G_sq`` field of ``params`` is ignored.
    """
    if not 0 < ratio_on_off <= 1 + 1e-12:
        raise DomainError("ratio_on_off must lie in (0, 1]")
    p = params
    off = squeezed_output_noise(p.replace(G_sq=1.0, N_pa=0.0), orientation)
    bath = (ratio_on_off * off - p.N_mK * (1 - p.A_att) - p.N_HEMT) / p.A_att - p.N_pa
    if not bath > 0:
        raise UnphysicalRatioError(
            f"ratio {ratio_on_off:.6g} implies non-positive squeezed vacuum noise"
        )
    if orientation == "physical":
        G_sq = bath / p.N_mK
        return SqueezeExtraction(G_sq, -10 * math.log10(G_sq))
    if orientation == "literal":
        G_sq = p.N_mK / bath
        return SqueezeExtraction(G_sq, 10 * math.log10(G_sq))
    raise DomainError(f"unknown orientation {orientation!r}")


def pump_heating_excess(P_pump_dbm):
    """Frequency-independent excess noise from pump heating.

    Scales linearly with pump power from 0.077 quanta at -15.7 dBm
    (generator-referred); ``-inf`` (pump off) gives 0.
    """
    P = np.asarray(P_pump_dbm, dtype=float)
    out = np.clip(PUMP_HEATING_QUANTA * 10 ** ((P - PUMP_HEATING_REF_DBM) / 10), 0.0, None)
    return out[()] if out.ndim == 0 else out


def input_referred_hemt_noise(params: AmpChainParams) -> float:
    """HEMT noise plus attenuator emission, referred back through ``A_att``."""
    return (params.N_HEMT + params.N_mK * (1 - params.A_att)) / params.A_att
