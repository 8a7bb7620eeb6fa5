"""Frequency-domain toolkit for micro-cavities with absorption-driven feedback.

Modules:
    core      feedback-modified cavity response and steady state
    optomech  sideband-cooling observables and detected spectra
    squeezing Kerr quadrature spectra with coexisting dissipation
    oracle    brute-force linear-system verifier
    thermal   reduced-dimension heat solver and pole fitting
    fitting   spectroscopy fitting pipeline and noise thermometry
    spectrum  Spectrum payload and CSV format
    config    run configuration parsing/validation
    cli       command-line entry points
"""

from .errors import (
    CavloopError,
    ConfigError,
    FitConvergenceError,
    LoopInstabilityError,
    SpectrumIOError,
    UnsupportedConfigurationError,
)
from .params import (
    BathModel,
    CavityParams,
    DetectionSetup,
    KerrParams,
    MaterialProps,
    MeanField,
    MechanicalMode,
    ThermalResponseModel,
    thermal_occupancy,
)
from .spectrum import Spectrum, frequency_grid, read_csv, write_csv

__version__ = "0.1.0"

__all__ = [
    "BathModel",
    "CavityParams",
    "CavloopError",
    "ConfigError",
    "DetectionSetup",
    "FitConvergenceError",
    "KerrParams",
    "LoopInstabilityError",
    "MaterialProps",
    "MeanField",
    "MechanicalMode",
    "Spectrum",
    "SpectrumIOError",
    "ThermalResponseModel",
    "UnsupportedConfigurationError",
    "frequency_grid",
    "read_csv",
    "thermal_occupancy",
    "write_csv",
    "__version__",
]
