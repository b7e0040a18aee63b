"""Simulation and measurement-analysis workbench for kinetic-inductance TWPAs."""

from .cme import (
    OperatingPoint,
    analytic_undepleted_gain,
    compression_curve,
    degenerate_quadrature_gains,
    gain_spectrum,
    propagate_3wm,
)
from .config import ExperimentConfig, load_config
from .device import DeviceGeometry, dc_retuning, kinetic_inductance
from .dispersion import bloch_dispersion, find_bandgaps, phase_mismatch
from .errors import (
    ConfigError,
    DomainError,
    NumericalError,
    TwpaError,
)
from .measurement import (
    ChainSettings,
    calibrate,
    added_noise,
    fit_noise_model,
    simulate_noise_measurement,
    squeezing_analysis,
)
from .noise import AmpChainParams, extract_squeezing, quanta, quantum_limit

__version__ = "0.1.0"
