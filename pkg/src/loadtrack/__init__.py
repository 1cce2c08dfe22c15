"""Unsupervised appliance-level disaggregation of an aggregate power signal."""

from .events import Event, detect_events
from .filters import FilterConfig, run_pipeline
from .labelling import PartitionMap, assign_labels, builtin_map, merge_same_label
from .mckp import MckpClass, MckpInstance, brute_force, solve
from .metrics import accuracy, build_report, energy_kwh
from .models import ApplianceDb, ApplianceModel, GaussianStat
from .signal_io import PowerTrace, load_trace, write_series
from .synth import Scenario, generate, table2_scenario
from .tracker import TrackerConfig, replay_events, track

__version__ = "0.1.0"

__all__ = [
    "ApplianceDb", "ApplianceModel", "Event", "FilterConfig", "GaussianStat", "MckpClass",
    "MckpInstance", "PartitionMap", "PowerTrace", "Scenario", "TrackerConfig", "accuracy",
    "assign_labels", "brute_force", "build_report", "builtin_map", "detect_events", "energy_kwh",
    "generate", "load_trace", "merge_same_label", "replay_events", "run_pipeline", "solve",
    "table2_scenario", "track", "write_series",
]
