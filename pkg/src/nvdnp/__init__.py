"""Simulation and analysis tools for optically pumped NV-diamond nuclear hyperpolarization."""

from .spin import NvSystem
from .powder import BroadeningModel, SpectrumRequest, simulate_spectrum, bandwidth_fraction
from .pulsepol import PulseShape, SequenceSpec, SpinModel, propagate, scan_tau, scan_detuning
from .optimize import OptimizerConfig, optimize as optimize_pulse
from .analysis import TimeSeries, fit_stretched_exp, fit_rotation_response

__version__ = "0.1.0"

__all__ = [
    "NvSystem", "BroadeningModel", "SpectrumRequest", "simulate_spectrum", "bandwidth_fraction",
    "PulseShape", "SequenceSpec", "SpinModel", "propagate", "scan_tau", "scan_detuning",
    "OptimizerConfig", "optimize_pulse", "TimeSeries", "fit_stretched_exp", "fit_rotation_response",
]
