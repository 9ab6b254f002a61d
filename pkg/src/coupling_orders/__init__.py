"""Static, dynamic-unweighted and dynamic-weighted coupling metrics for JVM code,
and Kendall-Tau comparison of the coupling orders they produce."""

__version__ = "0.1.0"

from .model import (
    ALL_SELECTORS, AnalysisFilter, Approach, CouplingSelector, Direction, Granularity,
    InnerClassMode, WeightedDependencyGraph, lift_to_packages, merge, package_of, unweight,
)
from .metrics import CouplingRanking, CouplingVector, coupling_vector, ranking
from .compare import (
    ComparisonResult, ComparisonSpec, comparison_suite, common_modules,
    kendall_tau_distance, p_value, z_score,
)
from .bytecode import ClassFacts, extract_static_graph, iter_class_files, parse_class_file
from .traces import TraceRecord, TraceStats, accumulate_trace, ingest_files, parse_trace_record
from .simulator import FrequencyModel, replay_check, simulate_trace

__all__ = [
    "ALL_SELECTORS", "AnalysisFilter", "Approach", "CouplingSelector", "Direction",
    "Granularity", "InnerClassMode", "WeightedDependencyGraph", "lift_to_packages", "merge",
    "package_of", "unweight", "CouplingRanking", "CouplingVector", "coupling_vector",
    "ranking", "ComparisonResult", "ComparisonSpec", "comparison_suite", "common_modules",
    "kendall_tau_distance", "p_value", "z_score", "ClassFacts", "extract_static_graph",
    "iter_class_files", "parse_class_file", "TraceRecord", "TraceStats", "accumulate_trace",
    "ingest_files", "parse_trace_record", "FrequencyModel", "replay_check", "simulate_trace",
]
