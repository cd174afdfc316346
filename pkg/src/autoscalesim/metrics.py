"""Elasticity and workflow metrics.

All supply/demand metrics are time-weighted integrals over a piecewise
constant sample series: each sample holds from its timestamp until the next
one.  Times are integer milliseconds, so the integrals are exact integer
sums divided once by the span at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

EPSILON_VMS = 1  # guard divisor for the normalized accuracy fractions
MS_PER_HOUR = 3_600_000


@dataclass(frozen=True)
class SeriesSample:
    t_ms: int
    supply: int
    demand: int
    busy: int


@dataclass
class SupplyDemandSeries:
    """Strictly time-ordered supply/demand samples over one simulation run."""

    samples: list[SeriesSample] = field(default_factory=list)
    end_ms: int = 0

    def record(self, t_ms: int, supply: int, demand: int, busy: int) -> None:
        """Append a sample; a sample at an already-recorded instant replaces it."""
        if self.samples and t_ms < self.samples[-1].t_ms:
            raise ValueError("samples must be time-ordered")
        sample = SeriesSample(t_ms, supply, demand, busy)
        if self.samples and self.samples[-1].t_ms == t_ms:
            self.samples[-1] = sample
        else:
            self.samples.append(sample)
        self.end_ms = max(self.end_ms, t_ms)

    @property
    def start_ms(self) -> int:
        return self.samples[0].t_ms if self.samples else 0

    @property
    def span_ms(self) -> int:
        return self.end_ms - self.start_ms

    def segments(self) -> Iterator[tuple[int, SeriesSample]]:
        """(duration_ms, sample) pairs; each sample holds until the next one."""
        for i, s in enumerate(self.samples):
            until = self.samples[i + 1].t_ms if i + 1 < len(self.samples) else self.end_ms
            dt = until - s.t_ms
            if dt > 0:
                yield dt, s


@dataclass(frozen=True)
class WorkflowRecord:
    """Execution milestones of one workflow, in integer milliseconds.

    The arrival is the instant the workflow became unblocked: its submit time,
    or the completion of its chained predecessor workflow if that was later.
    """

    workflow_id: int
    arrival_ms: int
    first_start_ms: int
    last_completion_ms: int
    critical_path_ms: int
    baseline_response_ms: int | None = None

    def __post_init__(self) -> None:
        if not (self.arrival_ms <= self.first_start_ms <= self.last_completion_ms):
            raise ValueError("workflow milestones out of order")
        if self.critical_path_ms <= 0:
            raise ValueError("critical path must be positive")


@dataclass(frozen=True)
class WorkflowMetrics:
    makespan_s: float
    wait_s: float
    response_s: float
    slowdown_normalized: float
    slowdown: float | None = None


def workflow_metrics(record: WorkflowRecord) -> WorkflowMetrics:
    """Makespan, wait, response, and slowdowns of one workflow.

    Response is makespan plus wait by construction; the normalized slowdown
    divides response by the critical path, and the plain slowdown relates the
    response to the same workflow's response on the static baseline run.
    """
    makespan_ms = record.last_completion_ms - record.first_start_ms
    wait_ms = record.first_start_ms - record.arrival_ms
    response_ms = makespan_ms + wait_ms
    slowdown = None
    if record.baseline_response_ms is not None and record.baseline_response_ms > 0:
        slowdown = response_ms / record.baseline_response_ms
    return WorkflowMetrics(
        makespan_s=makespan_ms / 1000.0,
        wait_s=wait_ms / 1000.0,
        response_s=response_ms / 1000.0,
        slowdown_normalized=response_ms / record.critical_path_ms,
        slowdown=slowdown,
    )


def cumulative_delay(records: Sequence[WorkflowRecord]) -> float:
    """Total seconds of response time in excess of each critical path."""
    total_ms = 0
    for r in records:
        response_ms = r.last_completion_ms - r.arrival_ms
        total_ms += max(0, response_ms - r.critical_path_ms)
    return total_ms / 1000.0


@dataclass(frozen=True)
class AccuracyMetrics:
    under_vms: float       # time-averaged demand excess, in VM slots
    over_vms: float        # time-averaged supply excess, in VM slots
    under_frac: float      # demand excess normalized by demand, in [0, 1]
    over_frac: float       # supply excess normalized by supply, in [0, 1]


def accuracy_metrics(
    series: SupplyDemandSeries,
    epsilon: int = EPSILON_VMS,
    capacity: int | None = None,
) -> AccuracyMetrics:
    """Provisioning accuracy integrals.

    Raw values are in VM slots.  Pass the total slot capacity to divide the
    raw values by it instead (a dimensionless alternative normalization); the
    fractional metrics always normalize per instant by max(demand, epsilon)
    respectively max(supply, epsilon).
    """
    span = series.span_ms
    if span <= 0:
        raise ValueError("series span must be positive")
    under_area = 0
    over_area = 0
    under_frac_area = 0.0
    over_frac_area = 0.0
    for dt, s in series.segments():
        under = max(0, s.demand - s.supply)
        over = max(0, s.supply - s.demand)
        under_area += under * dt
        over_area += over * dt
        under_frac_area += under / max(s.demand, epsilon) * dt
        over_frac_area += over / max(s.supply, epsilon) * dt
    divisor = span * (capacity if capacity else 1)
    return AccuracyMetrics(
        under_vms=under_area / divisor,
        over_vms=over_area / divisor,
        under_frac=under_frac_area / span,
        over_frac=over_frac_area / span,
    )


@dataclass(frozen=True)
class TimeshareMetrics:
    time_under_pct: float        # share of time with demand above supply
    time_over_pct: float         # share of time with supply above demand
    over_episode_intervals: float   # mean length of overprovisioning episodes
    under_episode_intervals: float  # mean length of underprovisioning episodes


def _mean_episode_intervals(durations_ms: list[int], interval_s: float) -> float:
    if not durations_ms:
        return 0.0
    return (sum(durations_ms) / len(durations_ms)) / (interval_s * 1000.0)


def timeshare_metrics(series: SupplyDemandSeries, interval_s: float) -> TimeshareMetrics:
    """Time shares of wrong provisioning and mean episode lengths.

    An episode is a maximal contiguous span whose provisioning sign (supply
    above, below, or equal to demand) stays constant; lengths are expressed
    in autoscaling intervals.
    """
    span = series.span_ms
    if span <= 0:
        raise ValueError("series span must be positive")
    under_ms = 0
    over_ms = 0
    episodes: dict[int, list[int]] = {1: [], -1: []}
    current_sign = None
    current_len = 0
    for dt, s in series.segments():
        sign = (s.supply > s.demand) - (s.supply < s.demand)
        if s.demand > s.supply:
            under_ms += dt
        elif s.supply > s.demand:
            over_ms += dt
        if sign == current_sign:
            current_len += dt
        else:
            if current_sign in episodes and current_len:
                episodes[current_sign].append(current_len)
            current_sign, current_len = sign, dt
    if current_sign in episodes and current_len:
        episodes[current_sign].append(current_len)
    return TimeshareMetrics(
        time_under_pct=100.0 * under_ms / span,
        time_over_pct=100.0 * over_ms / span,
        over_episode_intervals=_mean_episode_intervals(episodes[1], interval_s),
        under_episode_intervals=_mean_episode_intervals(episodes[-1], interval_s),
    )


@dataclass(frozen=True)
class ClusterAccounting:
    """Per-cluster usage totals produced by a finished simulation."""

    cluster_id: int
    vms_total: int
    busy_vm_ms: int
    allocated_ms: int
    charged_vm_hours: int
    ever_allocated: bool


@dataclass(frozen=True)
class ResourceMetrics:
    idle_vms: float            # time-averaged allocated but not busy slots
    avg_vms: float             # time-averaged allocated slots
    accounted_vm_hours: float  # mean busy hours per distinct VM slot
    charged_vm_hours: float    # mean hourly-ceiling charged hours per distinct VM slot


def resource_metrics(
    clusters: Sequence[ClusterAccounting],
    series: SupplyDemandSeries,
) -> ResourceMetrics:
    """Idle and allocated averages plus per-slot accounted and charged hours.

    Charging bills each VM of a cluster for every allocation episode at the
    hourly ceiling of the episode length.  A VM slot therefore never has more
    accounted (busy) seconds than charged seconds.
    """
    span = series.span_ms
    if span <= 0:
        raise ValueError("series span must be positive")
    idle_area = 0
    supply_area = 0
    for dt, s in series.segments():
        idle_area += (s.supply - s.busy) * dt
        supply_area += s.supply * dt
    slots = sum(c.vms_total for c in clusters if c.ever_allocated)
    busy_ms = sum(c.busy_vm_ms for c in clusters)
    charged = sum(c.charged_vm_hours for c in clusters)
    return ResourceMetrics(
        idle_vms=idle_area / span,
        avg_vms=supply_area / span,
        accounted_vm_hours=(busy_ms / MS_PER_HOUR) / slots if slots else 0.0,
        charged_vm_hours=charged / slots if slots else 0.0,
    )


@dataclass(frozen=True)
class ElasticityReport:
    """The full supply-side metric suite of one run."""

    under_vms: float
    over_vms: float
    under_frac: float
    over_frac: float
    time_under_pct: float
    time_over_pct: float
    over_episode_intervals: float
    under_episode_intervals: float
    idle_vms: float
    avg_vms: float
    accounted_vm_hours: float
    charged_vm_hours: float

    def to_dict(self) -> dict[str, float]:
        return {
            "under_vms": self.under_vms,
            "over_vms": self.over_vms,
            "under_frac": self.under_frac,
            "over_frac": self.over_frac,
            "time_under_pct": self.time_under_pct,
            "time_over_pct": self.time_over_pct,
            "over_episode_intervals": self.over_episode_intervals,
            "under_episode_intervals": self.under_episode_intervals,
            "idle_vms": self.idle_vms,
            "avg_vms": self.avg_vms,
            "accounted_vm_hours": self.accounted_vm_hours,
            "charged_vm_hours": self.charged_vm_hours,
        }


def elasticity_report(
    series: SupplyDemandSeries,
    clusters: Sequence[ClusterAccounting],
    interval_s: float,
    epsilon: int = EPSILON_VMS,
    capacity: int | None = None,
) -> ElasticityReport:
    acc = accuracy_metrics(series, epsilon=epsilon, capacity=capacity)
    ts = timeshare_metrics(series, interval_s)
    res = resource_metrics(clusters, series)
    return ElasticityReport(
        under_vms=acc.under_vms,
        over_vms=acc.over_vms,
        under_frac=acc.under_frac,
        over_frac=acc.over_frac,
        time_under_pct=ts.time_under_pct,
        time_over_pct=ts.time_over_pct,
        over_episode_intervals=ts.over_episode_intervals,
        under_episode_intervals=ts.under_episode_intervals,
        idle_vms=res.idle_vms,
        avg_vms=res.avg_vms,
        accounted_vm_hours=res.accounted_vm_hours,
        charged_vm_hours=res.charged_vm_hours,
    )
