"""Simulation and diagnostics for x_{n+1} = x_n (1 + h f(x_n) + sqrt(h) g(x_n) xi_{n+1})."""
from .engine import EnsembleSummary, PathRecord, PathState, run_ensemble, simulate_path, step
from .errors import (ConfigurationError, EstimatorError, QuadratureAccuracyError,
                     SimulationError, StochDecayError)
from .model import ModelSpec, RegimeReport, classify_regime, predict_general_rate
from .noise import NoiseSource, NoiseSpec, make_noise, moment_estimate, sample
from .oracle import PhiSpec, expect_phi, ito_error_scan, ito_report

__version__ = "0.1.0"
