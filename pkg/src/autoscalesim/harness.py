"""Experiment harness: configs, infrastructure sizing, sweeps and reports.

An experiment binds a workload trace to an infrastructure size and a pair of
policies, runs the simulation (optionally twice, adding a static baseline for
slowdown), and condenses the outcome into one report row.  Sweeps expand a
base configuration across policy, allocator, utilization and workload axes
and write one row per cell.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

from . import engine, metrics, workload
from .workload import TraceError, WorkloadTrace


class ConfigError(ValueError):
    """Raised when an experiment configuration is invalid."""


GENERATORS = {
    "chronos": workload.generate_chronos,
    "burst": workload.generate_burst,
}


def resolve_trace(source: Mapping | str, seed: int = 0) -> WorkloadTrace:
    """Materialize a trace source: a file path or a generator spec.

    Generator specs look like {"generator": "chronos", "params": {...}} and
    accept optional "duplicate": n and "scale_to_peak": tasks-per-minute keys
    applied after generation.  A bare string or {"file": path} loads a trace
    document from disk.
    """
    if isinstance(source, str):
        return workload.load_trace(source)
    if not isinstance(source, Mapping):
        raise ConfigError("trace source must be a path or an object")
    if "file" in source:
        return workload.load_trace(source["file"])
    if "generator" not in source:
        raise ConfigError("trace source needs a 'file' or 'generator' key")
    name = source["generator"]
    if name not in GENERATORS:
        raise ConfigError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}")
    params = dict(source.get("params", {}))
    if name == "burst":
        params.setdefault("seed", seed)
    trace = GENERATORS[name](**params)
    if source.get("scale_to_peak") is not None:
        trace = workload.scale_to_peak(trace, int(source["scale_to_peak"]))
    if source.get("duplicate") is not None:
        trace = workload.duplicate_trace(trace, int(source["duplicate"]))
    return trace


def size_infrastructure(
    trace: WorkloadTrace,
    target_utilization: float,
    vms_per_cluster: int = 70,
) -> int:
    """Clusters needed to run the trace at the target average utilization.

    The estimate divides the total work volume by the trace span times the
    utilization times the cluster size, ceiled to whole clusters.
    """
    if not 0 < target_utilization <= 1:
        raise ConfigError("target utilization must be in (0, 1]")
    if vms_per_cluster < 1:
        raise ConfigError("vms_per_cluster must be positive")
    span = trace.horizon_s
    if span <= 0:
        raise ConfigError("trace span must be positive to size infrastructure")
    load = trace.total_cpu_seconds
    return max(1, math.ceil(load / (span * target_utilization * vms_per_cluster)))


@dataclass(frozen=True)
class ExperimentConfig:
    trace: Mapping | str
    autoscaler: str = "react"
    allocator: str = "fillworstfit"
    clusters: int | None = None
    vms_per_cluster: int = 70
    max_clusters: int | None = None
    interval_s: float = 30.0
    policy: Mapping = field(default_factory=dict)
    seed: int = 0
    epsilon: int = 1
    normalize_accuracy: bool = False
    target_utilization: float | None = None
    baseline: bool = False
    name: str | None = None

    @staticmethod
    def from_dict(doc: Mapping) -> "ExperimentConfig":
        known = {f for f in ExperimentConfig.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "trace" not in doc:
            raise ConfigError("config needs a 'trace' source")
        return ExperimentConfig(**doc)

    def validate(self) -> None:
        if self.clusters is None and self.target_utilization is None:
            raise ConfigError("config needs 'clusters' or 'target_utilization'")
        if self.clusters is not None and self.clusters < 1:
            raise ConfigError("clusters must be positive")
        if self.vms_per_cluster < 1:
            raise ConfigError("vms_per_cluster must be positive")
        if self.interval_s <= 0:
            raise ConfigError("interval_s must be positive")


@dataclass(frozen=True)
class ExperimentReport:
    """One report row: identity, elasticity suite, workflow and scale figures."""

    workload: str
    autoscaler: str
    allocator: str
    clusters: int
    vms_per_cluster: int
    interval_s: float
    utilization: float | None
    elasticity: metrics.ElasticityReport
    workflows: int
    tasks: int
    makespan_s: float
    mean_makespan_s: float
    mean_wait_s: float
    mean_response_s: float
    mean_slowdown_normalized: float
    max_slowdown_normalized: float
    mean_slowdown: float | None
    cumulative_delay_s: float
    long_waits: int
    instructions: int
    data_peak: int
    wall_time_s: float
    result: engine.SimulationResult = field(repr=False, compare=False)

    def to_dict(self) -> dict:
        """JSON form; the volatile wall time is kept out of emitted files."""
        return {
            "workload": self.workload,
            "autoscaler": self.autoscaler,
            "allocator": self.allocator,
            "clusters": self.clusters,
            "vms_per_cluster": self.vms_per_cluster,
            "interval_s": self.interval_s,
            "utilization": self.utilization,
            "elasticity": self.elasticity.to_dict(),
            "workflows": self.workflows,
            "tasks": self.tasks,
            "makespan_s": self.makespan_s,
            "mean_makespan_s": self.mean_makespan_s,
            "mean_wait_s": self.mean_wait_s,
            "mean_response_s": self.mean_response_s,
            "mean_slowdown_normalized": self.mean_slowdown_normalized,
            "max_slowdown_normalized": self.max_slowdown_normalized,
            "mean_slowdown": self.mean_slowdown,
            "cumulative_delay_s": self.cumulative_delay_s,
            "long_waits": self.long_waits,
            "instructions": self.instructions,
            "data_peak": self.data_peak,
        }


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run one configured experiment and compute its full report row."""
    config.validate()
    started = time.perf_counter()
    trace = resolve_trace(config.trace, seed=config.seed)
    clusters = config.clusters
    if clusters is None:
        clusters = size_infrastructure(trace, config.target_utilization, config.vms_per_cluster)
    result = engine.run(
        trace,
        autoscaler=config.autoscaler,
        allocator=config.allocator,
        clusters=clusters,
        vms_per_cluster=config.vms_per_cluster,
        max_clusters=config.max_clusters,
        interval_s=config.interval_s,
        policy_params=dict(config.policy),
    )
    records = result.records
    if config.baseline and config.autoscaler != "static":
        base = engine.run(
            trace,
            autoscaler="static",
            allocator=config.allocator,
            clusters=clusters,
            vms_per_cluster=config.vms_per_cluster,
            max_clusters=config.max_clusters,
            interval_s=config.interval_s,
        )
        base_response = {
            r.workflow_id: r.last_completion_ms - r.arrival_ms for r in base.records
        }
        records = tuple(
            replace(r, baseline_response_ms=base_response[r.workflow_id]) for r in records
        )
        result = replace(result, records=records)

    capacity = clusters * config.vms_per_cluster if config.normalize_accuracy else None
    elasticity = metrics.elasticity_report(
        result.series,
        result.cluster_accounting,
        config.interval_s,
        epsilon=config.epsilon,
        capacity=capacity,
    )
    per_wf = [metrics.workflow_metrics(r) for r in records]
    n = len(per_wf)
    span = trace.horizon_s
    slowdowns = [m.slowdown for m in per_wf if m.slowdown is not None]
    return ExperimentReport(
        workload=config.name or trace.name,
        autoscaler=result.autoscaler,
        allocator=result.allocator,
        clusters=clusters,
        vms_per_cluster=config.vms_per_cluster,
        interval_s=config.interval_s,
        utilization=config.target_utilization,
        elasticity=elasticity,
        workflows=trace.workflow_count,
        tasks=trace.task_count,
        makespan_s=result.makespan_s,
        mean_makespan_s=sum(m.makespan_s for m in per_wf) / n,
        mean_wait_s=sum(m.wait_s for m in per_wf) / n,
        mean_response_s=sum(m.response_s for m in per_wf) / n,
        mean_slowdown_normalized=sum(m.slowdown_normalized for m in per_wf) / n,
        max_slowdown_normalized=max(m.slowdown_normalized for m in per_wf),
        mean_slowdown=sum(slowdowns) / len(slowdowns) if slowdowns else None,
        cumulative_delay_s=metrics.cumulative_delay(records),
        long_waits=sum(1 for m in per_wf if m.wait_s > span),
        instructions=result.counters.instructions if result.counters else 0,
        data_peak=result.counters.peak_data_items if result.counters else 0,
        wall_time_s=time.perf_counter() - started,
        result=result,
    )


@dataclass(frozen=True)
class SweepSpec:
    """A base config expanded across autoscaler/allocator/utilization/workload axes."""

    base: ExperimentConfig
    autoscalers: tuple[str, ...] = ()
    allocators: tuple[str, ...] = ()
    utilizations: tuple[float, ...] = ()
    workloads: tuple[Mapping, ...] = ()
    out_dir: str | None = None

    @staticmethod
    def from_dict(doc: Mapping) -> "SweepSpec":
        if "base" not in doc:
            raise ConfigError("sweep spec needs a 'base' config")
        axes = doc.get("axes", {})
        unknown = set(axes) - {"autoscalers", "allocators", "utilizations", "workloads"}
        if unknown:
            raise ConfigError(f"unknown sweep axes: {sorted(unknown)}")
        return SweepSpec(
            base=ExperimentConfig.from_dict(doc["base"]),
            autoscalers=tuple(axes.get("autoscalers", ())),
            allocators=tuple(axes.get("allocators", ())),
            utilizations=tuple(axes.get("utilizations", ())),
            workloads=tuple(axes.get("workloads", ())),
            out_dir=doc.get("out_dir"),
        )

    def cells(self) -> list[ExperimentConfig]:
        """Expand to one config per cell, in deterministic axis order."""
        configs = [self.base]

        def expand(confs, values, apply):
            if not values:
                return confs
            return [apply(c, v) for c in confs for v in values]

        configs = expand(
            configs,
            self.workloads,
            lambda c, w: replace(
                c,
                trace=w,
                name=w.get("name") if isinstance(w, Mapping) else None,
                clusters=w.get("clusters", c.clusters) if isinstance(w, Mapping) else c.clusters,
            ),
        )
        configs = expand(configs, self.autoscalers, lambda c, a: replace(c, autoscaler=a))
        configs = expand(configs, self.allocators, lambda c, a: replace(c, allocator=a))
        configs = expand(
            configs,
            self.utilizations,
            lambda c, u: replace(c, target_utilization=u, clusters=None),
        )
        return configs


def run_sweep(spec: SweepSpec) -> tuple[list[ExperimentReport], list[tuple[str, str]]]:
    """Run every cell; failures are recorded per cell and do not stop the sweep."""
    reports: list[ExperimentReport] = []
    errors: list[tuple[str, str]] = []
    for config in spec.cells():
        label = f"{config.name or 'trace'}/{config.autoscaler}/{config.allocator}" + (
            f"/u{config.target_utilization}" if config.target_utilization else ""
        )
        try:
            reports.append(run_experiment(config))
        except (ValueError, engine.SimulationError) as exc:
            errors.append((label, str(exc)))
    return reports, errors


# --- report emission ------------------------------------------------------------

CSV_COLUMNS = [
    "workload",
    "autoscaler",
    "allocator",
    "clusters",
    "vms_per_cluster",
    "interval_s",
    "utilization",
    "A_U",
    "A_O",
    "nA_U",
    "nA_O",
    "T_U",
    "T_O",
    "k",
    "kp",
    "M_U",
    "V_bar",
    "h_bar",
    "C_bar",
    "workflows",
    "tasks",
    "makespan_s",
    "mean_M",
    "mean_W",
    "mean_R",
    "mean_NSL",
    "max_NSL",
    "mean_S",
    "cumulative_delay_s",
    "long_waits",
    "instructions",
    "data_peak",
]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_row(report: ExperimentReport) -> dict[str, str]:
    e = report.elasticity
    values = {
        "workload": report.workload,
        "autoscaler": report.autoscaler,
        "allocator": report.allocator,
        "clusters": report.clusters,
        "vms_per_cluster": report.vms_per_cluster,
        "interval_s": report.interval_s,
        "utilization": report.utilization,
        "A_U": e.under_vms,
        "A_O": e.over_vms,
        "nA_U": e.under_frac,
        "nA_O": e.over_frac,
        "T_U": e.time_under_pct,
        "T_O": e.time_over_pct,
        "k": e.over_episode_intervals,
        "kp": e.under_episode_intervals,
        "M_U": e.idle_vms,
        "V_bar": e.avg_vms,
        "h_bar": e.accounted_vm_hours,
        "C_bar": e.charged_vm_hours,
        "workflows": report.workflows,
        "tasks": report.tasks,
        "makespan_s": report.makespan_s,
        "mean_M": report.mean_makespan_s,
        "mean_W": report.mean_wait_s,
        "mean_R": report.mean_response_s,
        "mean_NSL": report.mean_slowdown_normalized,
        "max_NSL": report.max_slowdown_normalized,
        "mean_S": report.mean_slowdown,
        "cumulative_delay_s": report.cumulative_delay_s,
        "long_waits": report.long_waits,
        "instructions": report.instructions,
        "data_peak": report.data_peak,
    }
    return {k: _cell(values[k]) for k in CSV_COLUMNS}


def _sort_key(report: ExperimentReport):
    return (
        report.workload,
        report.autoscaler,
        report.allocator,
        report.utilization if report.utilization is not None else -1.0,
        report.clusters,
    )


def emit_report(
    reports: Sequence[ExperimentReport],
    out_dir: str | Path,
    dump_tick_supply: bool = False,
) -> dict[str, Path]:
    """Write report.csv and report.json (and optionally per-tick supply samples).

    Rows are sorted by identity so the files are byte-identical across reruns
    of the same experiments regardless of execution order.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ordered = sorted(reports, key=_sort_key)
    paths: dict[str, Path] = {}

    csv_path = out / "report.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for report in ordered:
            writer.writerow(report_row(report))
    paths["csv"] = csv_path

    json_path = out / "report.json"
    json_path.write_text(
        json.dumps([r.to_dict() for r in ordered], indent=2, sort_keys=True) + "\n"
    )
    paths["json"] = json_path

    if dump_tick_supply:
        supply_path = out / "supply_samples.csv"
        with supply_path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["workload", "autoscaler", "allocator", "utilization", "t_s", "supply_vms"])
            for report in ordered:
                for t_s, supply in report.result.tick_supply:
                    writer.writerow(
                        [
                            report.workload,
                            report.autoscaler,
                            report.allocator,
                            _cell(report.utilization),
                            _cell(t_s),
                            supply,
                        ]
                    )
        paths["supply"] = supply_path
    return paths


# --- presets -------------------------------------------------------------------

ALL_AUTOSCALERS = ("react", "reg", "adapt", "hist", "conpaas", "token", "plan")
ALL_ALLOCATORS = ("fillworstfit", "worstfit", "bestfit")
UTILIZATION_LEVELS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


def _scaled(n: int, scale: float) -> int:
    return max(1, round(n * scale))


def preset_domain(scale: float = 1.0) -> SweepSpec:
    """Three workload shapes across every autoscaler on a fixed fleet."""
    workloads = (
        {"generator": "chronos", "name": "chronos"},
        {
            "generator": "burst",
            "name": "burst-heavy",
            "params": {
                "tasks": _scaled(16000, scale),
                "runtime_min_s": 10.0,
                "runtime_max_s": 120.0,
                "window_s": 60.0,
            },
        },
        {
            "generator": "burst",
            "name": "steady",
            "params": {
                "tasks": _scaled(2000, scale),
                "runtime_min_s": 30.0,
                "runtime_max_s": 300.0,
                "window_s": 1800.0,
            },
        },
    )
    return SweepSpec(
        base=ExperimentConfig(trace=workloads[0], clusters=50),
        autoscalers=ALL_AUTOSCALERS,
        workloads=workloads,
    )


def preset_bursty(scale: float = 1.0) -> SweepSpec:
    """The two bursty workloads on their dedicated fleet sizes."""
    workloads = (
        {
            "generator": "burst",
            "name": "burst-24k",
            "clusters": 13,
            "params": {"tasks": _scaled(24000, scale), "window_s": 60.0},
        },
        {
            "generator": "chronos",
            "name": "chronos-x22",
            "clusters": 62,
            "duplicate": 22,
        },
    )
    return SweepSpec(
        base=ExperimentConfig(trace=workloads[0], clusters=13),
        autoscalers=ALL_AUTOSCALERS,
        workloads=workloads,
    )


ALLOCATION_TRACE = {
    "generator": "chronos",
    "name": "chronos-wave",
    "params": {
        "plateau_minutes": 6,
        "ramp_down": True,
        "spread_arrivals": True,
        "runtime_jitter": 0.5,
        "seed": 1,
    },
}

PULSE_TRACE = {
    "generator": "chronos",
    "name": "chronos-pulse",
    "params": {
        "tasks_per_workflow": 1,
        "levels": 1,
        "runtime_s": 40.0,
        "runtime_jitter": 0.5,
        "seed": 2,
    },
}


def preset_allocation() -> SweepSpec:
    """Every autoscaler crossed with every allocation policy on one fleet.

    The trace rises, holds and falls so that scale-down pressure exposes how
    each placement policy constrains cluster release; the histogram policy
    gets buckets matched to the sub-hour horizon.
    """
    return SweepSpec(
        base=ExperimentConfig(
            trace=ALLOCATION_TRACE,
            clusters=50,
            policy={"histogram_bucket_s": 600.0},
        ),
        autoscalers=ALL_AUTOSCALERS,
        allocators=ALL_ALLOCATORS,
    )


def preset_utilization(scale: float = 1.0) -> SweepSpec:
    """Every autoscaler at nine infrastructure sizes derived from utilization."""
    return SweepSpec(
        base=ExperimentConfig(trace=PULSE_TRACE),
        autoscalers=ALL_AUTOSCALERS,
        utilizations=UTILIZATION_LEVELS,
    )


def preset_at_scale(scale: float = 0.001, task_scale: float | None = None) -> SweepSpec:
    """Fleet-scale stress configuration, shrunk by the scale factor.

    At full scale this is a hundred thousand sites and a heavily duplicated
    burst-plus-tail trace; the default runs a thousandth of the fleet with a
    single copy.  Only the three cheapest policies are included.
    """
    sites = _scaled(100000, scale)
    copies = _scaled(975, scale)
    tscale = task_scale if task_scale is not None else 1.0
    trace = {
        "generator": "burst",
        "name": "at-scale",
        "duplicate": copies,
        "params": {
            "tasks": _scaled(24000, tscale),
            "runtime_min_s": 10.0,
            "runtime_max_s": 120.0,
            "window_s": 60.0,
            "tail_tasks": _scaled(98000, tscale),
            "tail_window_s": 2940.0,
        },
    }
    return SweepSpec(
        base=ExperimentConfig(trace=trace, clusters=sites),
        autoscalers=("react", "adapt", "reg"),
    )


PRESETS = {
    "domain": preset_domain,
    "bursty": preset_bursty,
    "allocation": preset_allocation,
    "utilization": preset_utilization,
    "at-scale": preset_at_scale,
}
