"""Trace-driven discrete-event simulator for datacenter autoscaling policies.

The package simulates workflows of dependent tasks running on clusters of
VMs, scales the fleet with pluggable autoscaling policies, places tasks with
pluggable allocation policies, and reports elasticity, workflow and charging
metrics for each run.
"""

from .allocation import ALLOCATORS, Placement, PlacementRequest, get_allocator
from .autoscaling import AUTOSCALERS, DEFAULT_PARAMS, STATIC_POLICY, make_autoscaler
from .engine import ConfigurationError, SimulationError, SimulationResult, run
from .harness import (
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    PRESETS,
    SweepSpec,
    emit_report,
    run_experiment,
    run_sweep,
    size_infrastructure,
)
from .metrics import ElasticityReport, elasticity_report, workflow_metrics
from .workload import (
    Task,
    TraceError,
    Workflow,
    WorkloadTrace,
    critical_path,
    duplicate_trace,
    generate_burst,
    generate_chronos,
    load_trace,
    parse_trace,
    save_trace,
    scale_to_peak,
)

__all__ = [
    "ALLOCATORS",
    "AUTOSCALERS",
    "ConfigError",
    "ConfigurationError",
    "DEFAULT_PARAMS",
    "ElasticityReport",
    "ExperimentConfig",
    "ExperimentReport",
    "PRESETS",
    "Placement",
    "PlacementRequest",
    "STATIC_POLICY",
    "SimulationError",
    "SimulationResult",
    "SweepSpec",
    "Task",
    "TraceError",
    "Workflow",
    "WorkloadTrace",
    "critical_path",
    "duplicate_trace",
    "elasticity_report",
    "emit_report",
    "generate_burst",
    "generate_chronos",
    "get_allocator",
    "load_trace",
    "make_autoscaler",
    "parse_trace",
    "run",
    "run_experiment",
    "run_sweep",
    "save_trace",
    "scale_to_peak",
    "size_infrastructure",
    "workflow_metrics",
]

__version__ = "0.1.0"
