"""Discrete-event simulation of a datacenter executing workflow workloads.

Time advances in integer milliseconds over an event calendar.  Events at the
same instant are processed in a fixed kind order (completions, then arrivals,
then the autoscaling tick, then the deallocation check) with a monotonically
increasing sequence number breaking residual ties, so runs are deterministic.

Infrastructure is a fleet of equally sized clusters that are allocated and
deallocated atomically.  The simulation starts with every cluster allocated;
the autoscaler acts for the first time one interval in.  Allocation is
instantaneous, deallocation touches only fully idle clusters, and at least
one cluster stays allocated at all times.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import IntEnum

from .allocation import Placement, PlacementRequest, get_allocator
from .autoscaling import (
    Autoscaler,
    BlockedTaskView,
    DagSnapshot,
    MonitoringSample,
    ProvisioningDecision,
    QueuedTaskView,
    RunningTaskView,
    ScaleCounters,
    TickContext,
    compute_demand,
    make_autoscaler,
)
from .metrics import ClusterAccounting, SupplyDemandSeries, WorkflowRecord
from .workload import WorkloadTrace, _longest_path

MS_PER_HOUR = 3_600_000


class ConfigurationError(ValueError):
    """Raised when a run is structurally unable to execute its trace."""


class SimulationError(RuntimeError):
    """Raised when a simulation cannot make progress."""


def to_ms(seconds: float) -> int:
    return int(round(seconds * 1000.0))


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def desired_clusters(target_vms: int, vms_per_cluster: int, max_clusters: int) -> int:
    """Whole clusters needed for a VM target, at least one, capped at the fleet."""
    return min(max_clusters, max(1, ceil_div(max(0, target_vms), vms_per_cluster)))


class EventKind(IntEnum):
    TASK_COMPLETION = 0
    WORKFLOW_ARRIVAL = 1
    AUTOSCALE_TICK = 2
    DEALLOCATION_CHECK = 3


@dataclass
class _Cluster:
    id: int
    vms_total: int
    allocated: bool = True
    vms_busy: int = 0
    busy_vm_ms: int = 0
    allocated_ms: int = 0
    charged_vm_hours: int = 0
    ever_allocated: bool = True
    episode_start_ms: int = 0
    last_settle_ms: int = 0

    def settle(self, now_ms: int) -> None:
        dt = now_ms - self.last_settle_ms
        if dt:
            self.busy_vm_ms += self.vms_busy * dt
            if self.allocated:
                self.allocated_ms += dt
            self.last_settle_ms = now_ms

    def close_episode(self, now_ms: int) -> None:
        self.charged_vm_hours += ceil_div(now_ms - self.episode_start_ms, MS_PER_HOUR) * self.vms_total


@dataclass
class _WorkflowState:
    remaining: int
    arrived: bool = False
    chain_done: bool = True
    active: bool = False
    arrival_ms: int = 0
    first_start_ms: int | None = None
    last_completion_ms: int = 0


@dataclass(frozen=True)
class SimulationResult:
    trace_name: str
    autoscaler: str
    allocator: str
    clusters: int
    vms_per_cluster: int
    interval_s: float
    records: tuple[WorkflowRecord, ...]
    series: SupplyDemandSeries
    cluster_accounting: tuple[ClusterAccounting, ...]
    decisions: tuple[ProvisioningDecision, ...]
    tick_supply: tuple[tuple[float, int], ...]
    counters: ScaleCounters | None
    span_s: float
    makespan_s: float
    total_busy_vm_s: float
    task_starts: tuple[tuple[int, int], ...] = ()  # (task id, start ms)


class _Simulation:
    def __init__(
        self,
        trace: WorkloadTrace,
        autoscaler: Autoscaler | None,
        allocator_name: str,
        clusters: int,
        vms_per_cluster: int,
        max_clusters: int | None,
        interval_s: float,
    ) -> None:
        if clusters < 1 or vms_per_cluster < 1:
            raise ConfigurationError("need at least one cluster and one VM per cluster")
        if interval_s <= 0:
            raise ConfigurationError("autoscaling interval must be positive")
        if trace.task_count == 0:
            raise ConfigurationError("trace has no tasks")
        self.trace = trace
        self.autoscaler = autoscaler
        self.allocator_name = allocator_name
        self.allocate_fn = get_allocator(allocator_name)
        self.vms_per_cluster = vms_per_cluster
        self.n_clusters = clusters
        self.max_clusters = min(max_clusters, clusters) if max_clusters else clusters
        self.interval_ms = to_ms(interval_s)
        self.interval_s = interval_s

        self.clusters = [_Cluster(id=i, vms_total=vms_per_cluster) for i in range(clusters)]
        self._allocated_count = clusters
        self._desired = clusters
        self._supply = clusters * vms_per_cluster

        self.task_runtime_ms: dict[int, int] = {}
        self.task_cpus: dict[int, int] = {}
        self.task_wf: dict[int, int] = {}
        self.children: dict[int, tuple[int, ...]] = {}
        self.pending_parents: dict[int, int] = {}
        self.wf_state: dict[int, _WorkflowState] = {}
        self.wf_cp_ms: dict[int, int] = {}
        self.chain_dependents: dict[int, list[int]] = {}
        children_builder: dict[int, list[int]] = {}
        for wf in trace.workflows:
            self.wf_state[wf.id] = _WorkflowState(remaining=len(wf.tasks))
            for t in wf.tasks:
                if t.cpus > vms_per_cluster:
                    raise ConfigurationError(
                        f"task {t.id} needs {t.cpus} cpus but no cluster has more than "
                        f"{vms_per_cluster} VM slots; it can never be placed"
                    )
                self.task_runtime_ms[t.id] = max(1, to_ms(t.runtime_s))
                self.task_cpus[t.id] = t.cpus
                self.task_wf[t.id] = wf.id
                self.pending_parents[t.id] = len(t.parents)
                children_builder.setdefault(t.id, [])
                for p in t.parents:
                    children_builder.setdefault(p, []).append(t.id)
            self.wf_cp_ms[wf.id] = int(
                _longest_path(wf.tasks, {t.id: self.task_runtime_ms[t.id] for t in wf.tasks})
            )
            if wf.chained_after is not None:
                self.wf_state[wf.id].chain_done = False
                self.chain_dependents.setdefault(wf.chained_after, []).append(wf.id)
        self.children = {tid: tuple(sorted(kids)) for tid, kids in children_builder.items()}

        self.completed: set[int] = set()
        self.running_end_ms: dict[int, int] = {}
        self.queue: list[int] = []  # task ids, FCFS by (eligibility time, id)
        self._queued_set: set[int] = set()
        self._running_cpus = 0
        self._queued_cpus = 0
        self._completed_tasks = 0
        self._total_tasks = trace.task_count
        self._arrivals_since_tick = 0
        self._arrived_tasks = 0
        self._arrived_cpu_ms = 0

        self._heap: list[tuple[int, int, int, int]] = []  # (t, kind, seq, payload)
        self._seq = 0
        self._task_cluster: dict[int, int] = {}
        self._task_start_ms: dict[int, int] = {}
        self.series = SupplyDemandSeries()
        self.decisions: list[ProvisioningDecision] = []
        self.tick_supply: list[tuple[float, int]] = []

        wf_by_id = {w.id: w for w in trace.workflows}
        self._wf_by_id = wf_by_id
        for wf in trace.workflows:
            self._push(to_ms(wf.submit_time_s), EventKind.WORKFLOW_ARRIVAL, wf.id)
        if self.autoscaler is not None:
            self._push(self.interval_ms, EventKind.AUTOSCALE_TICK, 0)

    # -- event plumbing ---------------------------------------------------

    def _push(self, t_ms: int, kind: EventKind, payload: int) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (t_ms, int(kind), self._seq, payload))

    # -- handlers ----------------------------------------------------------

    def _activate_workflow(self, wf_id: int, now_ms: int, buffer: list[int]) -> None:
        st = self.wf_state[wf_id]
        st.active = True
        st.arrival_ms = now_ms
        for t in self._wf_by_id[wf_id].entry_tasks():
            buffer.append(t.id)

    def _on_arrival(self, wf_id: int, now_ms: int, buffer: list[int]) -> None:
        wf = self._wf_by_id[wf_id]
        st = self.wf_state[wf_id]
        st.arrived = True
        self._arrivals_since_tick += len(wf.tasks)
        self._arrived_tasks += len(wf.tasks)
        for t in wf.tasks:
            self._arrived_cpu_ms += self.task_runtime_ms[t.id] * t.cpus
        if st.chain_done:
            self._activate_workflow(wf_id, now_ms, buffer)

    def _on_completion(self, task_id: int, now_ms: int, buffer: list[int]) -> None:
        cluster = self.clusters[self._task_cluster.pop(task_id)]
        cluster.settle(now_ms)
        cluster.vms_busy -= self.task_cpus[task_id]
        self._running_cpus -= self.task_cpus[task_id]
        del self.running_end_ms[task_id]
        self.completed.add(task_id)
        self._completed_tasks += 1
        for child in self.children.get(task_id, ()):
            self.pending_parents[child] -= 1
            if self.pending_parents[child] == 0:
                buffer.append(child)
        wf_id = self.task_wf[task_id]
        st = self.wf_state[wf_id]
        st.remaining -= 1
        if st.remaining == 0:
            st.last_completion_ms = now_ms
            for dep in self.chain_dependents.get(wf_id, ()):
                dep_st = self.wf_state[dep]
                dep_st.chain_done = True
                if dep_st.arrived:
                    self._activate_workflow(dep, now_ms, buffer)

    def _on_tick(self, now_ms: int) -> None:
        assert self.autoscaler is not None
        demand = compute_demand(self._running_cpus, self._queued_cpus)
        sample = MonitoringSample(
            t_s=now_ms / 1000.0,
            supply_vms=self._supply,
            demand_vms=demand,
            queued_cpus=self._queued_cpus,
            running_cpus=self._running_cpus,
            arrivals=self._arrivals_since_tick,
        )
        self._arrivals_since_tick = 0
        ctx = TickContext(
            now_s=now_ms / 1000.0,
            interval_s=self.interval_s,
            sample=sample,
            idle_clusters=sum(1 for c in self.clusters if c.allocated and c.vms_busy == 0),
            clusters=tuple(
                (c.id, c.vms_total - c.vms_busy, c.vms_total)
                for c in self.clusters
                if c.allocated
            ),
            avg_task_cpu_s=(self._arrived_cpu_ms / self._arrived_tasks / 1000.0)
            if self._arrived_tasks
            else 0.0,
            queue=tuple(
                QueuedTaskView(tid, self.task_cpus[tid], self.task_runtime_ms[tid] / 1000.0)
                for tid in self.queue
            ),
            running=tuple(
                RunningTaskView(tid, self.task_cpus[tid], end / 1000.0)
                for tid, end in sorted(self.running_end_ms.items())
            ),
            dag=self._dag_snapshot,
        )
        target = self.autoscaler.tick(ctx)
        self.decisions.append(
            ProvisioningDecision(t_s=now_ms / 1000.0, target_vms=target, policy=self.autoscaler.name)
        )
        self.apply_provisioning(target, now_ms)
        self._push(now_ms + self.interval_ms, EventKind.AUTOSCALE_TICK, 0)

    def _dag_snapshot(self) -> DagSnapshot:
        blocked: list[BlockedTaskView] = []
        for wf in self.trace.workflows:
            st = self.wf_state[wf.id]
            if not st.active or st.remaining == 0:
                continue
            for t in wf.tasks:
                tid = t.id
                if tid in self.completed or tid in self.running_end_ms or tid in self._queued_set:
                    continue
                pending = tuple(p for p in t.parents if p not in self.completed)
                blocked.append(
                    BlockedTaskView(
                        id=tid,
                        cpus=t.cpus,
                        runtime_s=self.task_runtime_ms[tid] / 1000.0,
                        pending_parents=pending,
                    )
                )
        return DagSnapshot(blocked=tuple(blocked), children=self.children)

    def apply_provisioning(self, target_vms: int, now_ms: int) -> list[int]:
        """Resize toward the target; returns newly allocated cluster ids.

        Allocation is immediate.  When fewer clusters are desired than are
        allocated, a deallocation check is scheduled at the same instant; it
        runs after the tick and releases only fully idle clusters.
        """
        self._desired = desired_clusters(target_vms, self.vms_per_cluster, self.max_clusters)
        allocated_ids: list[int] = []
        if self._desired > self._allocated_count:
            for c in self.clusters:
                if self._allocated_count >= self._desired:
                    break
                if not c.allocated:
                    c.settle(now_ms)
                    c.allocated = True
                    c.ever_allocated = True
                    c.episode_start_ms = now_ms
                    self._allocated_count += 1
                    self._supply += c.vms_total
                    allocated_ids.append(c.id)
        elif self._desired < self._allocated_count:
            self._push(now_ms, EventKind.DEALLOCATION_CHECK, 0)
        return allocated_ids

    def _on_deallocation_check(self, now_ms: int) -> list[int]:
        released: list[int] = []
        floor = max(1, self._desired)
        for c in self.clusters:
            if self._allocated_count <= floor:
                break
            if c.allocated and c.vms_busy == 0:
                c.settle(now_ms)
                c.close_episode(now_ms)
                c.allocated = False
                self._allocated_count -= 1
                self._supply -= c.vms_total
                released.append(c.id)
        return released

    # -- dispatch and sampling ---------------------------------------------

    def _dispatch(self, now_ms: int) -> None:
        request = PlacementRequest(
            queue=tuple((tid, self.task_cpus[tid]) for tid in self.queue),
            clusters=tuple(
                (c.id, c.vms_total - c.vms_busy) for c in self.clusters if c.allocated
            ),
        )
        placement: Placement = self.allocate_fn(request)
        if not placement.assignments:
            return
        placed: set[int] = set()
        for tid, cid in placement.assignments:
            cluster = self.clusters[cid]
            cpus = self.task_cpus[tid]
            if not cluster.allocated or cluster.vms_total - cluster.vms_busy < cpus:
                raise SimulationError(
                    f"allocator {self.allocator_name} over-assigned cluster {cid}"
                )
            cluster.settle(now_ms)
            cluster.vms_busy += cpus
            self._running_cpus += cpus
            self._queued_cpus -= cpus
            placed.add(tid)
            self._task_cluster[tid] = cid
            self._task_start_ms[tid] = now_ms
            end = now_ms + self.task_runtime_ms[tid]
            self.running_end_ms[tid] = end
            self._push(end, EventKind.TASK_COMPLETION, tid)
            st = self.wf_state[self.task_wf[tid]]
            if st.first_start_ms is None:
                st.first_start_ms = now_ms
        self._queued_set -= placed
        self.queue = [tid for tid in self.queue if tid not in placed]

    def _flush_eligible(self, buffer: list[int]) -> None:
        if not buffer:
            return
        buffer.sort()
        for tid in buffer:
            self.queue.append(tid)
            self._queued_set.add(tid)
            self._queued_cpus += self.task_cpus[tid]
        buffer.clear()

    def _record_sample(self, now_ms: int) -> None:
        self.series.record(
            now_ms,
            self._supply,
            compute_demand(self._running_cpus, self._queued_cpus),
            self._running_cpus,
        )

    # -- main loop -----------------------------------------------------------

    def run(self) -> SimulationResult:
        self._record_sample(0)
        end_ms = 0
        while self._heap:
            now_ms = self._heap[0][0]
            buffer: list[int] = []
            ticked = False
            while self._heap and self._heap[0][0] == now_ms:
                _, kind, _, payload = heapq.heappop(self._heap)
                if kind == EventKind.TASK_COMPLETION:
                    self._on_completion(payload, now_ms, buffer)
                elif kind == EventKind.WORKFLOW_ARRIVAL:
                    self._on_arrival(payload, now_ms, buffer)
                elif kind == EventKind.AUTOSCALE_TICK:
                    self._flush_eligible(buffer)
                    self._on_tick(now_ms)
                    ticked = True
                else:
                    self._flush_eligible(buffer)
                    self._on_deallocation_check(now_ms)
            self._flush_eligible(buffer)
            if self.queue:
                self._dispatch(now_ms)
            self._record_sample(now_ms)
            if ticked:
                self.tick_supply.append((now_ms / 1000.0, self._supply))
            if self._completed_tasks == self._total_tasks:
                end_ms = now_ms
                break
        else:
            raise SimulationError(
                f"starvation: {self._total_tasks - self._completed_tasks} tasks never completed"
            )
        return self._finalize(end_ms)

    def _finalize(self, end_ms: int) -> SimulationResult:
        for c in self.clusters:
            c.settle(end_ms)
            if c.allocated:
                c.close_episode(end_ms)
        accounting = tuple(
            ClusterAccounting(
                cluster_id=c.id,
                vms_total=c.vms_total,
                busy_vm_ms=c.busy_vm_ms,
                allocated_ms=c.allocated_ms,
                charged_vm_hours=c.charged_vm_hours,
                ever_allocated=c.ever_allocated,
            )
            for c in self.clusters
        )
        records = []
        for wf in self.trace.workflows:
            st = self.wf_state[wf.id]
            records.append(
                WorkflowRecord(
                    workflow_id=wf.id,
                    arrival_ms=st.arrival_ms,
                    first_start_ms=st.first_start_ms if st.first_start_ms is not None else st.arrival_ms,
                    last_completion_ms=st.last_completion_ms,
                    critical_path_ms=self.wf_cp_ms[wf.id],
                )
            )
        makespan_ms = max(r.last_completion_ms for r in records) - min(r.arrival_ms for r in records)
        return SimulationResult(
            trace_name=self.trace.name,
            autoscaler=self.autoscaler.name if self.autoscaler else "static",
            allocator=self.allocator_name,
            clusters=self.n_clusters,
            vms_per_cluster=self.vms_per_cluster,
            interval_s=self.interval_s,
            records=tuple(records),
            series=self.series,
            cluster_accounting=accounting,
            decisions=tuple(self.decisions),
            tick_supply=tuple(self.tick_supply),
            counters=self.autoscaler.counters if self.autoscaler else None,
            span_s=(end_ms - self.series.start_ms) / 1000.0,
            makespan_s=makespan_ms / 1000.0,
            total_busy_vm_s=sum(c.busy_vm_ms for c in self.clusters) / 1000.0,
            task_starts=tuple(sorted(self._task_start_ms.items())),
        )


def run(
    trace: WorkloadTrace,
    autoscaler: str = "react",
    allocator: str = "fillworstfit",
    clusters: int = 50,
    vms_per_cluster: int = 70,
    max_clusters: int | None = None,
    interval_s: float = 30.0,
    policy_params: dict | None = None,
) -> SimulationResult:
    """Simulate one trace under the named autoscaling and allocation policies."""
    policy = make_autoscaler(autoscaler, policy_params)
    sim = _Simulation(
        trace,
        policy,
        allocator,
        clusters=clusters,
        vms_per_cluster=vms_per_cluster,
        max_clusters=max_clusters,
        interval_s=interval_s,
    )
    return sim.run()
