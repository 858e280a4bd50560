"""Dissipative time-crystal clock: quantum-jump simulation, tick statistics and
trajectory thermodynamics for a collective spin driven by a nonequilibrium bath."""

from tcclock.spin import ClockParams, CollectiveOps, build_operators, thermal_rates
from tcclock.liouville import SpectralNESS, lindblad_rhs, ness, sample_initial
from tcclock.trajectory import JumpEvent, TrajectoryRecord, run_trajectory, waiting_time_step
from tcclock.ticks import (
    ACTIVITY,
    EMISSIONS,
    HEAT,
    CountingObservable,
    MeritSummary,
    TickSeries,
    accumulate,
    extract_ticks,
    merit,
    optimal_threshold,
    sweep_thresholds,
)
from tcclock.thermo import ThermoLedger, delta_S_psi, ft_estimator, tick_entropy, tick_ledger, tur_kur_report
from tcclock.noise import NoiseModel, rabi_benchmark, run_noisy_trajectory

__version__ = "0.1.0"

__all__ = [
    "ACTIVITY",
    "EMISSIONS",
    "HEAT",
    "ClockParams",
    "CollectiveOps",
    "CountingObservable",
    "JumpEvent",
    "MeritSummary",
    "NoiseModel",
    "SpectralNESS",
    "ThermoLedger",
    "TickSeries",
    "TrajectoryRecord",
    "accumulate",
    "build_operators",
    "delta_S_psi",
    "extract_ticks",
    "ft_estimator",
    "lindblad_rhs",
    "merit",
    "ness",
    "optimal_threshold",
    "rabi_benchmark",
    "run_noisy_trajectory",
    "run_trajectory",
    "sample_initial",
    "sweep_thresholds",
    "thermal_rates",
    "tick_entropy",
    "tick_ledger",
    "tur_kur_report",
    "waiting_time_step",
]
