"""Simulator and analysis toolkit for a path-polarization hybrid-entanglement Bell test."""
from .analysis import (
    AnalysisReport,
    ChshResult,
    CorrelationResult,
    SinusoidFit,
    analyze_records,
    calibrate_zero_phase,
    chsh_s,
    correlation_coefficient,
    drift_estimate,
    fit_fixed_wavelength,
    phase_jump,
)
from .apparatus import (
    NoiseModel,
    OutcomeProbabilities,
    ScenarioStep,
    Settings,
    ideal_probabilities,
    noisy_probabilities,
    prepare_hybrid_state,
    settings_for_bell_point,
)
from .trials import CountsRecord, ScanPlan, default_plan, read_csv, run_scan, sample_counts, write_csv

__version__ = "0.1.0"
