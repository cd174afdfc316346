"""Workflow DAG data model, trace ingestion and synthetic workload generators.

A workload trace is a set of workflows, each a DAG of tasks with runtimes and
cpu requirements.  Workflows arrive at their submit time; a workflow can be
chained after another one, in which case none of its tasks become eligible
before the predecessor workflow has completed.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping


class TraceError(ValueError):
    """Raised when a trace document violates the schema or its invariants."""


@dataclass(frozen=True)
class Task:
    id: int
    runtime_s: float
    cpus: int
    parents: tuple[int, ...] = ()


@dataclass(frozen=True)
class Workflow:
    id: int
    submit_time_s: float
    tasks: tuple[Task, ...]
    chained_after: int | None = None

    def task_ids(self) -> frozenset[int]:
        return frozenset(t.id for t in self.tasks)

    def entry_tasks(self) -> tuple[Task, ...]:
        return tuple(t for t in self.tasks if not t.parents)


@dataclass(frozen=True)
class WorkloadTrace:
    name: str
    workflows: tuple[Workflow, ...]

    @property
    def workflow_count(self) -> int:
        return len(self.workflows)

    @property
    def task_count(self) -> int:
        return sum(len(w.tasks) for w in self.workflows)

    @property
    def total_cpu_seconds(self) -> float:
        """Total work volume: sum of runtime * cpus over all tasks."""
        return sum(t.runtime_s * t.cpus for w in self.workflows for t in w.tasks)

    @property
    def horizon_s(self) -> float:
        """Span from the earliest submit to the latest submit + critical path."""
        if not self.workflows:
            return 0.0
        start = min(w.submit_time_s for w in self.workflows)
        end = max(w.submit_time_s + critical_path(w) for w in self.workflows)
        return end - start

    def per_minute_task_peak(self) -> int:
        """Largest number of tasks submitted within any one minute bucket."""
        buckets: dict[int, int] = {}
        for w in self.workflows:
            minute = int(w.submit_time_s // 60)
            buckets[minute] = buckets.get(minute, 0) + len(w.tasks)
        return max(buckets.values(), default=0)


def _longest_path(tasks: Iterable[Task], weight: Mapping[int, float]) -> float:
    """Longest root-to-leaf path where each node costs weight[task id]."""
    tasks = list(tasks)
    dist: dict[int, float] = {}
    pending = {t.id: len(t.parents) for t in tasks}
    by_id = {t.id: t for t in tasks}
    children: dict[int, list[int]] = {t.id: [] for t in tasks}
    for t in tasks:
        for p in t.parents:
            children[p].append(t.id)
    ready = [tid for tid, n in pending.items() if n == 0]
    done = 0
    while ready:
        tid = ready.pop()
        t = by_id[tid]
        dist[tid] = weight[tid] + max((dist[p] for p in t.parents), default=0.0)
        done += 1
        for c in children[tid]:
            pending[c] -= 1
            if pending[c] == 0:
                ready.append(c)
    if done != len(tasks):
        raise TraceError("cyclic workflow")
    return max(dist.values(), default=0.0)


def critical_path(workflow: Workflow) -> float:
    """Length in seconds of the longest runtime chain through the workflow."""
    return _longest_path(workflow.tasks, {t.id: t.runtime_s for t in workflow.tasks})


def eligible_tasks(
    workflow: Workflow,
    completed: frozenset[int] | set[int],
    now_s: float,
    chain_complete: bool = True,
    exclude: frozenset[int] | set[int] = frozenset(),
) -> list[Task]:
    """Tasks of one workflow that are ready to run.

    A task is eligible when the workflow has arrived, its chained predecessor
    workflow (if any) has completed, all parents are completed, and the task
    itself has neither completed nor been excluded (e.g. already running).
    Returned in ascending task-id order; all share one eligibility instant.
    """
    if workflow.submit_time_s > now_s or not chain_complete:
        return []
    out = [
        t
        for t in workflow.tasks
        if t.id not in completed
        and t.id not in exclude
        and all(p in completed for p in t.parents)
    ]
    out.sort(key=lambda t: t.id)
    return out


# --- parsing and serialization -------------------------------------------------

def _require(cond: bool, message: str) -> None:
    if not cond:
        raise TraceError(message)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_number(x) -> bool:
    return (_is_int(x) or isinstance(x, float)) and math.isfinite(x)


def parse_trace(doc: str | bytes | Mapping) -> WorkloadTrace:
    """Parse and validate a trace document (JSON text or already-decoded dict)."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise TraceError(f"invalid trace JSON: {exc}") from exc
    _require(isinstance(doc, Mapping), "trace must be a JSON object")
    _require(isinstance(doc.get("name"), str), "trace name must be a string")
    raw_workflows = doc.get("workflows")
    _require(isinstance(raw_workflows, list), "workflows must be a list")

    workflows: list[Workflow] = []
    wf_ids: set[int] = set()
    task_ids: set[int] = set()
    for rw in raw_workflows:
        _require(isinstance(rw, Mapping), "workflow must be an object")
        wid = rw.get("id")
        _require(_is_int(wid), "workflow id must be an integer")
        _require(wid not in wf_ids, f"duplicate workflow id {wid}")
        wf_ids.add(wid)
        submit = rw.get("submit_time_s")
        _require(_is_number(submit) and submit >= 0, f"invalid submit time in workflow {wid}")
        chained = rw.get("chained_after")
        _require(chained is None or _is_int(chained), f"invalid chained_after in workflow {wid}")
        raw_tasks = rw.get("tasks")
        _require(isinstance(raw_tasks, list) and raw_tasks, f"workflow {wid} has no tasks")

        tasks: list[Task] = []
        local_ids: set[int] = set()
        for rt in raw_tasks:
            _require(isinstance(rt, Mapping), f"invalid task in workflow {wid}")
            tid = rt.get("id")
            _require(_is_int(tid), f"invalid task in workflow {wid}: id must be an integer")
            _require(tid not in task_ids, f"duplicate task id {tid}")
            runtime = rt.get("runtime_s")
            _require(
                _is_number(runtime) and runtime > 0,
                f"invalid task {tid} in workflow {wid}: runtime must be positive",
            )
            cpus = rt.get("cpus")
            _require(
                _is_int(cpus) and cpus >= 1,
                f"invalid task {tid} in workflow {wid}: cpus must be a positive integer",
            )
            parents = rt.get("parents", [])
            _require(
                isinstance(parents, list) and all(_is_int(p) for p in parents),
                f"invalid task {tid} in workflow {wid}: parents must be integer ids",
            )
            task_ids.add(tid)
            local_ids.add(tid)
            tasks.append(Task(id=tid, runtime_s=float(runtime), cpus=cpus, parents=tuple(parents)))

        for t in tasks:
            for p in t.parents:
                _require(
                    p in local_ids,
                    f"dangling edge: task {t.id} in workflow {wid} references unknown parent {p}",
                )
            _require(t.id not in t.parents, f"cyclic workflow {wid}")
        wf = Workflow(
            id=wid,
            submit_time_s=float(submit),
            tasks=tuple(tasks),
            chained_after=chained,
        )
        try:
            _longest_path(wf.tasks, {t.id: 0.0 for t in wf.tasks})
        except TraceError:
            raise TraceError(f"cyclic workflow {wid}") from None
        workflows.append(wf)

    for w in workflows:
        if w.chained_after is not None:
            _require(
                w.chained_after in wf_ids and w.chained_after != w.id,
                f"dangling edge: workflow {w.id} chained after unknown workflow {w.chained_after}",
            )
    _check_chain_acyclic(workflows)
    return WorkloadTrace(name=doc["name"], workflows=tuple(workflows))


def _check_chain_acyclic(workflows: Iterable[Workflow]) -> None:
    pred = {w.id: w.chained_after for w in workflows}
    state: dict[int, int] = {}  # 1 visiting, 2 done
    for start in pred:
        node = start
        path = []
        while node is not None and state.get(node) != 2:
            if state.get(node) == 1:
                raise TraceError(f"cyclic workflow chain at {node}")
            state[node] = 1
            path.append(node)
            node = pred[node]
        for n in path:
            state[n] = 2


def trace_to_dict(trace: WorkloadTrace) -> dict:
    return {
        "name": trace.name,
        "workflows": [
            {
                "id": w.id,
                "submit_time_s": w.submit_time_s,
                "chained_after": w.chained_after,
                "tasks": [
                    {
                        "id": t.id,
                        "runtime_s": t.runtime_s,
                        "cpus": t.cpus,
                        "parents": list(t.parents),
                    }
                    for t in w.tasks
                ],
            }
            for w in trace.workflows
        ],
    }


def serialize_trace(trace: WorkloadTrace) -> str:
    """Render a trace to its JSON document form (stable across runs)."""
    return json.dumps(trace_to_dict(trace), indent=2) + "\n"


def load_trace(path: str | Path) -> WorkloadTrace:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise exc
    return parse_trace(text)


def save_trace(trace: WorkloadTrace, path: str | Path) -> None:
    Path(path).write_text(serialize_trace(trace))


# --- generators ------------------------------------------------------------------

def generate_chronos(
    tasks_per_workflow: int = 3,
    runtime_s: float = 60.0,
    cpus: int = 1,
    levels: int = 3,
    chain_group: int = 0,
    plateau_minutes: int = 0,
    ramp_down: bool = False,
    spread_arrivals: bool = False,
    runtime_jitter: float = 0.0,
    seed: int = 0,
) -> WorkloadTrace:
    """Doubling arrival workload: 2**i workflows arrive at minute i for i in 0..9.

    One extra seed workflow is submitted at t=0, bringing the default totals to
    1,024 workflows and 3,072 tasks.  Each workflow is a layered DAG with the
    given number of levels; every task at level k depends on all tasks at level
    k-1.  With chain_group >= 2, consecutive workflows in submission order are
    additionally linked into chains of that length via chained_after.

    plateau_minutes appends that many extra minutes at the final arrival rate
    after the doubling phase; ramp_down then mirrors the doubling back to one
    workflow per minute.  spread_arrivals spaces each minute's workflows evenly
    inside the minute instead of submitting them all at its start; the
    per-minute counts are unchanged.  runtime_jitter stretches each task runtime
    by a seeded uniform factor in [1, 1 + jitter].
    """
    if tasks_per_workflow < 1 or levels < 1 or levels > tasks_per_workflow:
        raise TraceError("tasks_per_workflow and levels must satisfy 1 <= levels <= tasks")
    if plateau_minutes < 0 or runtime_jitter < 0:
        raise TraceError("plateau_minutes and runtime_jitter must be non-negative")
    minute_counts = [2**i for i in range(10)]
    minute_counts += [minute_counts[-1]] * plateau_minutes
    if ramp_down:
        minute_counts += [2**i for i in range(8, -1, -1)]
    submit_times = [0.0]  # seed workflow
    for i, count in enumerate(minute_counts):
        for j in range(count):
            offset = 60.0 * j / count if spread_arrivals else 0.0
            submit_times.append(round(60.0 * i + offset, 3))

    rng = random.Random(seed)
    workflows: list[Workflow] = []
    task_counter = 0
    base, extra = divmod(tasks_per_workflow, levels)
    layer_sizes = [base + (1 if k < extra else 0) for k in range(levels)]
    for wid, submit in enumerate(submit_times):
        tasks: list[Task] = []
        prev_layer: list[int] = []
        for size in layer_sizes:
            layer = []
            for _ in range(size):
                runtime = runtime_s
                if runtime_jitter > 0:
                    runtime = round(runtime_s * (1.0 + runtime_jitter * rng.random()), 3)
                tasks.append(
                    Task(id=task_counter, runtime_s=runtime, cpus=cpus, parents=tuple(prev_layer))
                )
                layer.append(task_counter)
                task_counter += 1
            prev_layer = layer
        chained = None
        if chain_group >= 2 and wid % chain_group != 0:
            chained = wid - 1
        workflows.append(
            Workflow(id=wid, submit_time_s=submit, tasks=tuple(tasks), chained_after=chained)
        )
    return WorkloadTrace(name="chronos", workflows=tuple(workflows))


def generate_burst(
    tasks: int = 24000,
    runtime_min_s: float = 2.0,
    runtime_max_s: float = 2.0,
    cpus: int = 1,
    window_s: float = 60.0,
    tail_tasks: int = 0,
    tail_window_s: float = 0.0,
    seed: int = 0,
) -> WorkloadTrace:
    """Single-task workflows submitted in a burst within the opening window.

    Submission instants are spread evenly across window_s (all at t=0 when the
    window is zero).  Runtimes are drawn uniformly from the given range with a
    fixed seed, so a given parameter set always produces identical trace bytes.
    An optional tail spreads additional tasks evenly after the burst window.
    """
    if tasks < 1:
        raise TraceError("burst needs at least one task")
    if runtime_min_s <= 0 or runtime_max_s < runtime_min_s:
        raise TraceError("invalid runtime range")
    rng = random.Random(seed)

    def draw_runtime() -> float:
        if runtime_max_s == runtime_min_s:
            return runtime_min_s
        return round(rng.uniform(runtime_min_s, runtime_max_s), 3)

    workflows: list[Workflow] = []
    for i in range(tasks):
        submit = 0.0 if window_s <= 0 else round(i * window_s / tasks, 3)
        workflows.append(
            Workflow(
                id=i,
                submit_time_s=submit,
                tasks=(Task(id=i, runtime_s=draw_runtime(), cpus=cpus),),
            )
        )
    for j in range(tail_tasks):
        submit = window_s if tail_window_s <= 0 else round(window_s + j * tail_window_s / tail_tasks, 3)
        wid = tasks + j
        workflows.append(
            Workflow(
                id=wid,
                submit_time_s=submit,
                tasks=(Task(id=wid, runtime_s=draw_runtime(), cpus=cpus),),
            )
        )
    return WorkloadTrace(name=f"burst-{tasks + tail_tasks}", workflows=tuple(workflows))


def duplicate_trace(trace: WorkloadTrace, n: int) -> WorkloadTrace:
    """n independent copies of the trace, fresh ids, identical submit times."""
    if n < 1:
        raise TraceError("duplication factor must be >= 1")
    if n == 1:
        return trace
    wf_stride = max((w.id for w in trace.workflows), default=0) + 1
    task_stride = max((t.id for w in trace.workflows for t in w.tasks), default=0) + 1
    workflows: list[Workflow] = []
    for copy in range(n):
        for w in trace.workflows:
            workflows.append(
                Workflow(
                    id=w.id + copy * wf_stride,
                    submit_time_s=w.submit_time_s,
                    chained_after=None if w.chained_after is None else w.chained_after + copy * wf_stride,
                    tasks=tuple(
                        replace(
                            t,
                            id=t.id + copy * task_stride,
                            parents=tuple(p + copy * task_stride for p in t.parents),
                        )
                        for t in w.tasks
                    ),
                )
            )
    return WorkloadTrace(name=f"{trace.name}-x{n}", workflows=tuple(workflows))


def scale_to_peak(
    trace: WorkloadTrace,
    reference_peak_tasks_per_minute: int,
    duplicate_count: int | None = None,
) -> WorkloadTrace:
    """Duplicate the trace until its per-minute task peak reaches a reference.

    The factor is ceil(reference peak / own peak); pass duplicate_count to
    override the derived factor with an explicit one.
    """
    if duplicate_count is not None:
        return duplicate_trace(trace, duplicate_count)
    own = trace.per_minute_task_peak()
    if own <= 0:
        raise TraceError("trace has no tasks to scale")
    k = -(-reference_peak_tasks_per_minute // own)
    return duplicate_trace(trace, max(1, k))
