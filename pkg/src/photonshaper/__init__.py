"""Toolkit for deterministic shaping, absorption and reshaping of
single-photon temporal wave functions in a single-atom cavity-QED system."""

__version__ = "0.1.0"

from .cqed import (
    AdiabaticCoeffs,
    ConfigurationError,
    CouplingTable,
    CqedParams,
    DegenerateDenominatorError,
    LevelScheme,
    Variant,
    adiabatic_coeffs,
    build_coupling_table,
    build_scheme,
    efficiency_sweep,
    emission_efficiency,
    load_reference_data,
)
from .pulses import (
    ControlPulse,
    PulseOptions,
    ShapeSpec,
    SpinWaveTrajectory,
    TemporalMode,
    emission_control,
    make_shape,
    mode_fidelity,
    resample,
    selection_efficiency,
    spin_wave,
    storage_control,
    time_reverse,
)
from .wigner import clebsch_gordan, wigner_3j, wigner_6j

__all__ = [
    "__version__",
    "AdiabaticCoeffs",
    "ConfigurationError",
    "CouplingTable",
    "CqedParams",
    "DegenerateDenominatorError",
    "LevelScheme",
    "Variant",
    "adiabatic_coeffs",
    "build_coupling_table",
    "build_scheme",
    "efficiency_sweep",
    "emission_efficiency",
    "load_reference_data",
    "ControlPulse",
    "PulseOptions",
    "ShapeSpec",
    "SpinWaveTrajectory",
    "TemporalMode",
    "emission_control",
    "make_shape",
    "mode_fidelity",
    "resample",
    "selection_efficiency",
    "spin_wave",
    "storage_control",
    "time_reverse",
    "clebsch_gordan",
    "wigner_3j",
    "wigner_6j",
]
