"""Configuration, ensembles, fits and the command line."""

from tcclock.harness.config import MODES, ConfigError, RunConfig
from tcclock.harness.ensemble import Clock, run_ensemble
from tcclock.harness.fitting import FitError, FitResult, fit_power_law, fit_resolution, fit_threshold_scaling
from tcclock.harness.manifest import verify_manifest, write_manifest

__all__ = [
    "MODES", "ConfigError", "RunConfig", "Clock", "run_ensemble", "FitError", "FitResult", "fit_power_law",
    "fit_resolution", "fit_threshold_scaling", "verify_manifest", "write_manifest",
]
