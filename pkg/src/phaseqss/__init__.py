"""Simulation and finite-key analysis of three-party quantum secret sharing
with phase-encoded weak coherent states."""

__version__ = "0.1.0"

from phaseqss.channel import ChannelParams
from phaseqss.experiment import ExperimentConfig, ExperimentReport, analyze, load_fixture
from phaseqss.montecarlo import SimConfig, SimMode, simulate, tally_to_stats
from phaseqss.optimizer import SearchSpace, expected_stats, optimize
from phaseqss.security import (
    KeyResult,
    ObservedStats,
    PhaseErrorChain,
    SecurityEpsilons,
    finite_key_length,
    phase_error_upper_bound,
)
from phaseqss.tally import Counts, TallyTable, parse_counts_csv

__all__ = [
    "ChannelParams",
    "Counts",
    "ExperimentConfig",
    "ExperimentReport",
    "KeyResult",
    "ObservedStats",
    "PhaseErrorChain",
    "SearchSpace",
    "SecurityEpsilons",
    "SimConfig",
    "SimMode",
    "TallyTable",
    "analyze",
    "expected_stats",
    "finite_key_length",
    "load_fixture",
    "optimize",
    "parse_counts_csv",
    "phase_error_upper_bound",
    "simulate",
    "tally_to_stats",
]
