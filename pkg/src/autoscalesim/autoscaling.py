"""Autoscaling policies.

All policies run periodically.  Each tick they receive a monitoring sample
(supply, demand, queue depth, arrivals) plus a snapshot of the cluster and
workflow state, and return a target VM count.  The provisioner turns that
target into whole-cluster allocation and deallocation commands.

Demand is measured in VM slots: the cpus of running tasks plus the cpus of
eligible queued tasks.  Every policy keeps a bounded ring of past samples;
two bookkeeping counters track the work done (one unit per innermost loop
iteration or predictor evaluation) and the data items held in memory.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

DEFAULT_PARAMS: dict[str, float | int] = {
    "history_window": 60,
    "up_threshold": 0.9,
    "down_threshold": 0.5,
    "hysteresis_ticks": 3,
    "histogram_bucket_s": 3600.0,
    "percentile": 95.0,
    "backtest_depth": 5,
    "token_lookahead": 1.0,
    "smoothing_alpha": 0.5,
}


def compute_demand(running_cpus: int, queued_cpus: int) -> int:
    """Instantaneous demand in VM slots: running plus eligible queued cpus."""
    return running_cpus + queued_cpus


@dataclass(frozen=True)
class MonitoringSample:
    t_s: float
    supply_vms: int
    demand_vms: int
    queued_cpus: int
    running_cpus: int
    arrivals: int

    def __post_init__(self) -> None:
        if self.demand_vms != self.queued_cpus + self.running_cpus:
            raise ValueError("demand must equal queued plus running cpus")


@dataclass(frozen=True)
class ProvisioningDecision:
    t_s: float
    target_vms: int
    policy: str


@dataclass
class ScaleCounters:
    """Per-policy cost counters: abstract instructions and stored data items."""

    instructions: int = 0
    data_series: list[tuple[float, int]] = field(default_factory=list)

    def add_instructions(self, n: int) -> None:
        self.instructions += n

    def record_data_items(self, t_s: float, n: int) -> None:
        self.data_series.append((t_s, n))

    @property
    def peak_data_items(self) -> int:
        return max((n for _, n in self.data_series), default=0)


@dataclass(frozen=True)
class RunningTaskView:
    id: int
    cpus: int
    end_s: float


@dataclass(frozen=True)
class QueuedTaskView:
    id: int
    cpus: int
    runtime_s: float


@dataclass(frozen=True)
class BlockedTaskView:
    id: int
    cpus: int
    runtime_s: float
    pending_parents: tuple[int, ...]


@dataclass(frozen=True)
class DagSnapshot:
    """Incomplete tasks of arrived workflows, with their forward edges."""

    blocked: tuple[BlockedTaskView, ...]
    children: Mapping[int, tuple[int, ...]]


@dataclass
class TickContext:
    """Everything a policy may inspect when deciding a target."""

    now_s: float
    interval_s: float
    sample: MonitoringSample
    idle_clusters: int
    clusters: tuple[tuple[int, int, int], ...]  # (id, free, total)
    avg_task_cpu_s: float
    queue: tuple[QueuedTaskView, ...]
    running: tuple[RunningTaskView, ...]
    dag: Callable[[], DagSnapshot] = lambda: DagSnapshot((), {})


class Autoscaler:
    """Base class: sample history ring, counters, and the tick entry point."""

    name = "base"

    def __init__(self, params: Mapping | None = None) -> None:
        merged = dict(DEFAULT_PARAMS)
        merged.update(params or {})
        self.params = merged
        self.history: deque[MonitoringSample] = deque(maxlen=int(merged["history_window"]))
        self.counters = ScaleCounters()

    def tick(self, ctx: TickContext) -> int:
        self.history.append(ctx.sample)
        target = max(0, int(self.decide(ctx)))
        self.counters.record_data_items(ctx.now_s, len(self.history) + self.store_size())
        return target

    def decide(self, ctx: TickContext) -> int:
        raise NotImplementedError

    def store_size(self) -> int:
        """Data items the policy keeps beyond the shared history ring."""
        return 0


class ReactPolicy(Autoscaler):
    """Threshold reactions on the utilization ratio demand / supply.

    Scale to demand when utilization reaches the upper threshold; scale down
    to demand when utilization drops to the lower threshold while at least one
    cluster sits fully idle; otherwise hold the current supply.
    """

    name = "react"

    def decide(self, ctx: TickContext) -> int:
        self.counters.add_instructions(3)
        d, s = ctx.sample.demand_vms, ctx.sample.supply_vms
        if s > 0 and d / s >= self.params["up_threshold"]:
            return d
        if s > 0 and d / s <= self.params["down_threshold"] and ctx.idle_clusters >= 1:
            return d
        return s


class RegPolicy(Autoscaler):
    """Second-order regression forecast with a reactive scale-up branch.

    When demand already exceeds supply the target is demand itself.  Otherwise
    a degree-2 least-squares fit over the sample history predicts demand one
    interval ahead.
    """

    name = "reg"

    def decide(self, ctx: TickContext) -> int:
        d, s = ctx.sample.demand_vms, ctx.sample.supply_vms
        self.counters.add_instructions(2)
        if d > s:
            return d
        if len(self.history) < 3:
            return d
        self.counters.add_instructions(len(self.history))
        ts = np.array([m.t_s for m in self.history])
        ys = np.array([float(m.demand_vms) for m in self.history])
        ts = ts - ts[-1]
        coeffs = np.polyfit(ts, ys, 2)
        predicted = float(np.polyval(coeffs, ctx.interval_s))
        return max(0, round(predicted))


class AdaptPolicy(Autoscaler):
    """Linear trend extrapolation with scale-down hysteresis.

    The raw target is demand plus the fitted slope over one interval.  Scale
    ups apply immediately; a target below current supply is honored only after
    it has persisted for a configured number of consecutive ticks.
    """

    name = "adapt"

    def __init__(self, params: Mapping | None = None) -> None:
        super().__init__(params)
        self._below_ticks = 0

    def decide(self, ctx: TickContext) -> int:
        d, s = ctx.sample.demand_vms, ctx.sample.supply_vms
        self.counters.add_instructions(2)
        if len(self.history) < 2:
            return d
        self.counters.add_instructions(len(self.history))
        ts = np.array([m.t_s for m in self.history])
        ys = np.array([float(m.demand_vms) for m in self.history])
        slope = float(np.polyfit(ts - ts[-1], ys, 1)[0])
        raw = max(0, d + round(slope * ctx.interval_s))
        if raw < s:
            self._below_ticks += 1
            if self._below_ticks >= int(self.params["hysteresis_ticks"]):
                return raw
            return s
        self._below_ticks = 0
        return raw

    def store_size(self) -> int:
        return 1


def percentile_nearest_rank(values: Sequence[float], p: float) -> float:
    """Nearest-rank percentile: the ceil(p/100 * n)-th smallest value."""
    if not values:
        raise ValueError("percentile of empty sequence")
    ordered = sorted(values)
    rank = max(1, math.ceil(p / 100.0 * len(ordered)))
    return ordered[rank - 1]


class HistPolicy(Autoscaler):
    """Arrival-rate histograms per time-of-trace bucket.

    Each tick records the arrivals observed since the previous tick into the
    histogram of the current bucket (hour of trace by default).  The target
    converts a high percentile of that histogram into VMs via the average
    cpu-seconds per task.  Whenever demand exceeds supply the target is
    corrected reactively to at least the demand.
    """

    name = "hist"

    def __init__(self, params: Mapping | None = None) -> None:
        super().__init__(params)
        self._buckets: dict[int, list[int]] = {}

    def decide(self, ctx: TickContext) -> int:
        d, s = ctx.sample.demand_vms, ctx.sample.supply_vms
        bucket = int(ctx.now_s // float(self.params["histogram_bucket_s"]))
        rates = self._buckets.setdefault(bucket, [])
        rates.append(ctx.sample.arrivals)
        self.counters.add_instructions(len(rates) + 2)
        predicted_arrivals = percentile_nearest_rank(rates, float(self.params["percentile"]))
        target = round(predicted_arrivals * ctx.avg_task_cpu_s / ctx.interval_s)
        if d > s:
            target = max(target, d)
        return target

    def store_size(self) -> int:
        return len(self._buckets) + sum(len(v) for v in self._buckets.values())


def _predict_last(ts, ys, at):
    return float(ys[-1])


def _predict_linear(ts, ys, at):
    if len(ys) < 2:
        return None
    return float(np.polyval(np.polyfit(ts, ys, 1), at))


def _predict_quadratic(ts, ys, at):
    if len(ys) < 3:
        return None
    return float(np.polyval(np.polyfit(ts, ys, 2), at))


def _make_predict_smoothed(alpha: float):
    def predict(ts, ys, at):
        level = float(ys[0])
        for y in ys[1:]:
            level = alpha * float(y) + (1.0 - alpha) * level
        return level

    return predict


class ConPaaSPolicy(Autoscaler):
    """Predictor ensemble scored by short-horizon backtesting.

    Candidate predictors (last value, linear fit, quadratic fit, exponential
    smoothing) are ranked each tick by mean absolute error over one-step
    predictions of the most recent samples; the winner forecasts demand one
    interval ahead.  Ties keep the earliest candidate in the fixed order.
    """

    name = "conpaas"

    def decide(self, ctx: TickContext) -> int:
        d = ctx.sample.demand_vms
        self.counters.add_instructions(2)
        if len(self.history) < 2:
            return d
        ts = np.array([m.t_s for m in self.history])
        ys = np.array([float(m.demand_vms) for m in self.history])
        ts = ts - ts[-1]
        predictors = [
            _predict_last,
            _predict_linear,
            _predict_quadratic,
            _make_predict_smoothed(float(self.params["smoothing_alpha"])),
        ]
        n = len(ys)
        depth = min(int(self.params["backtest_depth"]), n - 1)
        best_idx, best_err = 0, None
        for idx, predict in enumerate(predictors):
            total, usable = 0.0, True
            for j in range(n - depth, n):
                self.counters.add_instructions(j)
                guess = predict(ts[:j], ys[:j], ts[j])
                if guess is None:
                    usable = False
                    break
                total += abs(guess - float(ys[j]))
            if not usable:
                continue
            err = total / depth
            if best_err is None or err < best_err:
                best_idx, best_err = idx, err
        forecast = predictors[best_idx](ts, ys, ctx.interval_s)
        if forecast is None:
            forecast = float(ys[-1])
        return max(0, round(forecast))


class TokenPolicy(Autoscaler):
    """Level-of-parallelism estimate via token propagation over the DAGs.

    Every running and eligible task starts with a token.  A token moves
    forward onto successors that would activate within the lookahead horizon,
    judged by the known runtimes of their remaining predecessors; tokens that
    cannot move stay put.  The target is the total cpus of tokened tasks.
    """

    name = "token"

    def decide(self, ctx: TickContext) -> int:
        horizon = ctx.now_s + float(self.params["token_lookahead"]) * ctx.interval_s
        snapshot = ctx.dag()
        est_end: dict[int, float] = {}
        cpus: dict[int, int] = {}
        for r in ctx.running:
            est_end[r.id] = r.end_s
            cpus[r.id] = r.cpus
        for q in ctx.queue:
            est_end[q.id] = ctx.now_s + q.runtime_s
            cpus[q.id] = q.cpus
        blocked = {b.id: b for b in snapshot.blocked}
        waiting: dict[int, set[int]] = {b.id: set(b.pending_parents) for b in snapshot.blocked}
        start_bound: dict[int, float] = {b.id: ctx.now_s for b in snapshot.blocked}
        activated: set[int] = set()
        frontier = [tid for tid, end in est_end.items() if end <= horizon]
        while frontier:
            tid = frontier.pop()
            for child in snapshot.children.get(tid, ()):
                self.counters.add_instructions(1)
                pend = waiting.get(child)
                if pend is None or tid not in pend:
                    continue
                pend.discard(tid)
                start_bound[child] = max(start_bound[child], est_end[tid])
                if not pend:
                    activated.add(child)
                    b = blocked[child]
                    cpus[child] = b.cpus
                    est_end[child] = start_bound[child] + b.runtime_s
                    if est_end[child] <= horizon:
                        frontier.append(child)
        lop = 0
        for tid, end in est_end.items():
            self.counters.add_instructions(1)
            hands_off = end <= horizon and any(
                c in activated for c in snapshot.children.get(tid, ())
            )
            if not hands_off:
                lop += cpus[tid]
        return lop


class PlanPolicy(Autoscaler):
    """Partial execution plan over the next interval.

    Running tasks keep their slots until completion.  Eligible tasks are
    planned in FCFS order, reusing slots that free up in time to finish the
    task within the interval; a task that cannot reuse anything gets fresh
    slots starting now.  The target is the peak number of occupied slots at
    any instant of the planning window, floored at demand when demand already
    exceeds supply.
    """

    name = "plan"

    def decide(self, ctx: TickContext) -> int:
        import heapq

        now = ctx.now_s
        window_end = now + ctx.interval_s
        slots: list[float] = []  # free instants of plan slots
        intervals: list[tuple[float, float, int]] = []
        for r in ctx.running:
            intervals.append((now, r.end_s, r.cpus))
            for _ in range(r.cpus):
                slots.append(r.end_s)
        heapq.heapify(slots)
        for q in ctx.queue:
            self.counters.add_instructions(1 + q.cpus)
            popped: list[float] = []
            if len(slots) >= q.cpus:
                for _ in range(q.cpus):
                    popped.append(heapq.heappop(slots))
                start = max(popped[-1], now)
                if start + q.runtime_s <= window_end:
                    intervals.append((start, start + q.runtime_s, q.cpus))
                    for _ in range(q.cpus):
                        heapq.heappush(slots, start + q.runtime_s)
                    continue
                for f in popped:
                    heapq.heappush(slots, f)
            intervals.append((now, now + q.runtime_s, q.cpus))
            for _ in range(q.cpus):
                heapq.heappush(slots, now + q.runtime_s)

        events: list[tuple[float, int, int]] = []
        for start, end, c in intervals:
            events.append((start, 1, c))
            events.append((end, 0, c))
        events.sort()
        occupied = peak = 0
        for t, kind, c in events:
            if t > window_end:
                break
            if kind == 0:
                occupied -= c
            else:
                occupied += c
                peak = max(peak, occupied)
        d, s = ctx.sample.demand_vms, ctx.sample.supply_vms
        if d > s:
            peak = max(peak, d)
        return peak


AUTOSCALERS: dict[str, type[Autoscaler]] = {
    "react": ReactPolicy,
    "reg": RegPolicy,
    "adapt": AdaptPolicy,
    "hist": HistPolicy,
    "conpaas": ConPaaSPolicy,
    "token": TokenPolicy,
    "plan": PlanPolicy,
}

STATIC_POLICY = "static"  # no autoscaler: infrastructure stays as provisioned


def make_autoscaler(name: str, params: Mapping | None = None) -> Autoscaler | None:
    """Instantiate a policy by name; the static name yields None (no scaling)."""
    if name == STATIC_POLICY:
        return None
    try:
        cls = AUTOSCALERS[name]
    except KeyError:
        raise ValueError(
            f"unknown autoscaler {name!r}; choose from {sorted(AUTOSCALERS) + [STATIC_POLICY]}"
        ) from None
    return cls(params)
