"""Acceptance suite: one test per release criterion.

Each test states its tolerance inline and checks real end-to-end behaviour;
the slower criteria also enforce a wall-clock budget.  The terminal summary
hook prints one PASS/FAIL line per criterion.
"""

from __future__ import annotations

import math
import random
import time
from fractions import Fraction

import numpy as np

from autoscalesim import engine
from autoscalesim.allocation import get_allocator, PlacementRequest
from autoscalesim.autoscaling import (
    DagSnapshot,
    MonitoringSample,
    QueuedTaskView,
    RunningTaskView,
    TickContext,
    make_autoscaler,
)
from autoscalesim.engine import to_ms
from autoscalesim.harness import (
    ALL_ALLOCATORS,
    ALL_AUTOSCALERS,
    ExperimentConfig,
    SweepSpec,
    emit_report,
    preset_allocation,
    preset_utilization,
    run_experiment,
    run_sweep,
    size_infrastructure,
)
from autoscalesim.metrics import (
    SupplyDemandSeries,
    accuracy_metrics,
    cumulative_delay,
    resource_metrics,
    timeshare_metrics,
    workflow_metrics,
)
from autoscalesim.workload import Task, Workflow, WorkloadTrace, generate_burst, generate_chronos

REL_TOL = 1e-9


def close(a: float, b: float) -> bool:
    return abs(a - b) <= REL_TOL * max(1.0, abs(a), abs(b))


def test_criterion_01_accuracy_integrals_match_per_ms_brute_force():
    started = time.perf_counter()
    rng = random.Random(0)
    for trial in range(1000):
        if trial % 50 == 0:
            steps = rng.randint(1000, 10000)
            max_dur = 20
        else:
            steps = rng.randint(1, 40)
            max_dur = 300
        supplies = [rng.randint(0, 30) for _ in range(steps)]
        demands = [rng.randint(0, 30) for _ in range(steps)]
        busies = [rng.randint(0, s) for s in supplies]
        durations = [rng.randint(1, max_dur) for _ in range(steps)]

        series = SupplyDemandSeries()
        t = 0
        for s, d, b, dur in zip(supplies, demands, busies, durations):
            series.record(t, s, d, b)
            t += dur
        series.end_ms = t

        sup = np.repeat(supplies, durations).astype(np.float64)
        dem = np.repeat(demands, durations).astype(np.float64)
        busy = np.repeat(busies, durations).astype(np.float64)
        under = np.maximum(dem - sup, 0.0)
        over = np.maximum(sup - dem, 0.0)

        acc = accuracy_metrics(series)
        ts = timeshare_metrics(series, interval_s=30.0)
        res = resource_metrics([], series)

        assert close(acc.under_vms, under.mean())
        assert close(acc.over_vms, over.mean())
        assert close(acc.under_frac, (under / np.maximum(dem, 1.0)).mean())
        assert close(acc.over_frac, (over / np.maximum(sup, 1.0)).mean())
        assert close(ts.time_under_pct, 100.0 * (dem > sup).mean())
        assert close(ts.time_over_pct, 100.0 * (sup > dem).mean())
        assert close(res.idle_vms, (sup - busy).mean())
        assert close(res.avg_vms, sup.mean())
        assert 0.0 <= acc.under_frac <= 1.0
        assert 0.0 <= acc.over_frac <= 1.0
    assert time.perf_counter() - started < 60.0


def test_criterion_02_constant_double_supply_frozen_values():
    series = SupplyDemandSeries()
    series.record(0, 2, 1, 1)
    series.end_ms = 60_000
    acc = accuracy_metrics(series)
    assert acc.over_vms == 1.0
    assert acc.over_frac == 0.5
    assert acc.under_vms == 0.0
    assert acc.under_frac == 0.0


def test_criterion_03_doubling_arrival_trace_shape():
    started = time.perf_counter()
    trace = generate_chronos()
    elapsed = time.perf_counter() - started
    assert trace.workflow_count == 1024
    assert trace.task_count == 3072
    per_minute: dict[int, int] = {}
    for w in trace.workflows:
        minute = int(w.submit_time_s // 60)
        per_minute[minute] = per_minute.get(minute, 0) + 1
    for i in range(1, 10):
        assert per_minute[i] == 2**i
    assert elapsed < 1.0


def test_criterion_04_sizing_matches_exact_arithmetic():
    reference = WorkloadTrace(
        name="sizing",
        workflows=(
            Workflow(
                id=1,
                submit_time_s=0.0,
                tasks=(Task(1, 2998.0, 1), Task(2, 2000.0, 1410), Task(3, 760.0, 1)),
            ),
        ),
    )
    assert reference.total_cpu_seconds == 2_823_758.0
    assert reference.horizon_s == 2998.0
    assert size_infrastructure(reference, 0.7, vms_per_cluster=70) == 20

    rng = random.Random(4)
    levels = (0.0625, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0)
    for _ in range(100):
        n = rng.randint(1, 20)
        tasks = tuple(
            Task(id=i, runtime_s=float(rng.randint(10, 10000)), cpus=rng.randint(1, 5))
            for i in range(n)
        )
        trace = WorkloadTrace(
            name="sz", workflows=(Workflow(id=0, submit_time_s=0.0, tasks=tasks),)
        )
        vpc = rng.choice((1, 2, 7, 70, 128))
        load = Fraction(trace.total_cpu_seconds)
        span = Fraction(trace.horizon_s)
        sizes = []
        for u in levels:
            exact = max(1, math.ceil(load / (span * Fraction(u) * vpc)))
            got = size_infrastructure(trace, u, vms_per_cluster=vpc)
            assert got == exact
            sizes.append(got)
        assert sizes == sorted(sizes, reverse=True)  # inverse in utilization


def test_criterion_05_uniform_burst_insensitive_to_policy():
    started = time.perf_counter()
    trace = generate_burst()  # 24000 identical 2 s tasks over one minute
    makespans = []
    for name in ALL_AUTOSCALERS:
        res = engine.run(trace, autoscaler=name, clusters=13, vms_per_cluster=70)
        makespans.append(res.makespan_s)
        nsl = [workflow_metrics(r).slowdown_normalized for r in res.records]
        mean_nsl = sum(nsl) / len(nsl)
        assert abs(mean_nsl - 1.0) <= 0.01, f"{name}: mean normalized slowdown {mean_nsl}"
    assert len(set(makespans)) == 1, f"makespans diverge: {makespans}"
    assert time.perf_counter() - started < 300.0


def test_criterion_06_consolidation_lowers_average_supply():
    started = time.perf_counter()
    reports, errors = run_sweep(preset_allocation())
    assert errors == []
    assert len(reports) == 21
    by_policy: dict[str, dict[str, float]] = {}
    for rep in reports:
        by_policy.setdefault(rep.autoscaler, {})[rep.allocator] = rep.elasticity.avg_vms
    for name in ALL_AUTOSCALERS:
        cells = by_policy[name]
        best, worst, fill = cells["bestfit"], cells["worstfit"], cells["fillworstfit"]
        assert best <= 0.95 * worst, f"{name}: bestfit {best} vs worstfit {worst}"
        assert best <= 0.95 * fill, f"{name}: bestfit {best} vs fillworstfit {fill}"
    assert time.perf_counter() - started < 600.0


def test_criterion_07_utilization_drives_under_and_spread():
    started = time.perf_counter()
    reports, errors = run_sweep(preset_utilization())
    assert errors == []
    assert len(reports) == 63
    by_policy: dict[str, list] = {}
    for rep in reports:
        by_policy.setdefault(rep.autoscaler, []).append(rep)
    for name in ALL_AUTOSCALERS:
        rows = sorted(by_policy[name], key=lambda r: r.utilization)
        unders = [r.elasticity.under_frac for r in rows]
        for lo, hi in zip(unders, unders[1:]):
            assert hi >= lo - 1e-12, f"{name}: underprovisioning not monotone {unders}"

    def spread(level: float) -> float:
        overs = [
            r.elasticity.over_frac for r in reports if r.utilization == level
        ]
        return max(overs) - min(overs)

    assert spread(0.9) < spread(0.1)
    assert time.perf_counter() - started < 900.0


def _reference_starts(trace: WorkloadTrace, allocator: str, clusters: list[tuple[int, int]]):
    """Independent list-scan scheduler: no event heap, full rescans per instant."""
    alloc = get_allocator(allocator)
    runtime_ms: dict[int, int] = {}
    cpus: dict[int, int] = {}
    wf_of: dict[int, int] = {}
    parents: dict[int, set[int]] = {}
    for w in trace.workflows:
        for t in w.tasks:
            runtime_ms[t.id] = max(1, to_ms(t.runtime_s))
            cpus[t.id] = t.cpus
            wf_of[t.id] = w.id
            parents[t.id] = set(t.parents)
    wf_by_id = {w.id: w for w in trace.workflows}
    remaining = {w.id: len(w.tasks) for w in trace.workflows}
    chain_dependents: dict[int, list[int]] = {}
    chain_pending: set[int] = set()
    for w in trace.workflows:
        if w.chained_after is not None:
            chain_dependents.setdefault(w.chained_after, []).append(w.id)
            chain_pending.add(w.id)
    submits: dict[int, list[int]] = {}
    for w in trace.workflows:
        submits.setdefault(to_ms(w.submit_time_s), []).append(w.id)

    arrived: set[int] = set()
    active: set[int] = set()
    completed: set[int] = set()
    queued: list[int] = []
    queued_set: set[int] = set()
    running: dict[int, tuple[int, int]] = {}  # tid -> (end_ms, cluster)
    free = dict(clusters)
    starts: dict[int, int] = {}
    total = trace.task_count

    while len(completed) < total:
        now = min(list(submits) + [end for end, _ in running.values()])
        for tid in sorted(t for t, (end, _) in running.items() if end == now):
            _, cid = running.pop(tid)
            free[cid] += cpus[tid]
            completed.add(tid)
            remaining[wf_of[tid]] -= 1
            if remaining[wf_of[tid]] == 0:
                for dep in chain_dependents.get(wf_of[tid], ()):
                    chain_pending.discard(dep)
                    if dep in arrived:
                        active.add(dep)
        for wid in submits.pop(now, ()):
            arrived.add(wid)
            if wid not in chain_pending:
                active.add(wid)
        newly = sorted(
            t.id
            for wid in active
            for t in wf_by_id[wid].tasks
            if t.id not in starts
            and t.id not in queued_set
            and parents[t.id] <= completed
        )
        queued.extend(newly)
        queued_set.update(newly)
        if queued:
            request = PlacementRequest(
                queue=tuple((tid, cpus[tid]) for tid in queued),
                clusters=tuple(sorted(free.items())),
            )
            placed: set[int] = set()
            for tid, cid in alloc(request).assignments:
                free[cid] -= cpus[tid]
                starts[tid] = now
                running[tid] = (now + runtime_ms[tid], cid)
                placed.add(tid)
            queued = [tid for tid in queued if tid not in placed]
            queued_set -= placed
    return starts


def _random_instance(rng: random.Random):
    vpc = rng.randint(2, 4)
    n_clusters = rng.randint(1, 3)
    budget = 10
    workflows = []
    next_task = 0
    wf_id = 0
    while budget > 0 and wf_id < 3:
        k = rng.randint(1, min(4, budget))
        budget -= k
        tasks = []
        for j in range(k):
            parent_pool = [next_task + p for p in range(j)]
            chosen = tuple(p for p in parent_pool if rng.random() < 0.4)
            tasks.append(
                Task(
                    id=next_task + j,
                    runtime_s=round(rng.uniform(0.5, 5.0), 3),
                    cpus=rng.randint(1, vpc),
                    parents=chosen,
                )
            )
        chained = wf_id - 1 if wf_id > 0 and rng.random() < 0.3 else None
        workflows.append(
            Workflow(
                id=wf_id,
                submit_time_s=round(rng.uniform(0.0, 10.0), 3),
                tasks=tuple(tasks),
                chained_after=chained,
            )
        )
        next_task += k
        wf_id += 1
    trace = WorkloadTrace(name="fcfs", workflows=tuple(workflows))
    return trace, n_clusters, vpc


def test_criterion_08_dispatch_matches_reference_scheduler():
    started = time.perf_counter()
    rng = random.Random(8)
    for i in range(1000):
        trace, n_clusters, vpc = _random_instance(rng)
        allocator = ALL_ALLOCATORS[i % len(ALL_ALLOCATORS)]
        res = engine.run(
            trace,
            autoscaler="static",
            allocator=allocator,
            clusters=n_clusters,
            vms_per_cluster=vpc,
        )
        expected = _reference_starts(
            trace, allocator, [(c, vpc) for c in range(n_clusters)]
        )
        assert dict(res.task_starts) == expected, f"instance {i} ({allocator}) diverged"
    assert time.perf_counter() - started < 30.0


def test_criterion_09_reports_are_byte_identical_across_reruns(tmp_path):
    spec = SweepSpec(
        base=ExperimentConfig(
            trace={
                "generator": "burst",
                "params": {
                    "tasks": 300,
                    "runtime_min_s": 1.0,
                    "runtime_max_s": 6.0,
                    "window_s": 20.0,
                    "seed": 3,
                },
            },
            clusters=3,
            vms_per_cluster=5,
            interval_s=5.0,
        ),
        autoscalers=("react", "adapt", "plan"),
        allocators=("fillworstfit", "bestfit"),
    )

    def emit(out_dir):
        reports, errors = run_sweep(spec)
        assert errors == []
        return emit_report(reports, out_dir, dump_tick_supply=True)

    first = emit(tmp_path / "a")
    second = emit(tmp_path / "b")
    for key in ("csv", "json", "supply"):
        assert first[key].read_bytes() == second[key].read_bytes(), f"{key} differs"


def test_criterion_10_scaling_costs_are_monotone():
    interval = 30.0
    policies = {name: make_autoscaler(name) for name in ALL_AUTOSCALERS}
    last_instructions = {name: 0 for name in ALL_AUTOSCALERS}
    hour_bucket_counts: list[int] = []
    ticks = 360  # three hours
    for i in range(ticks):
        t = (i + 1) * interval
        demand = int(50 + 45 * math.sin(t / 700.0))
        arrivals = (i * 7) % 23
        queue = tuple(QueuedTaskView(20_000 + j, 1, 10.0) for j in range(3))
        running = tuple(RunningTaskView(10_000 + j, 1, t + 15.0) for j in range(demand - 3))
        ctx = TickContext(
            now_s=t,
            interval_s=interval,
            sample=MonitoringSample(
                t_s=t,
                supply_vms=60,
                demand_vms=demand,
                queued_cpus=3,
                running_cpus=demand - 3,
                arrivals=arrivals,
            ),
            idle_clusters=1,
            clusters=((0, 10, 60),),
            avg_task_cpu_s=12.0,
            queue=queue,
            running=running,
            dag=lambda: DagSnapshot((), {}),
        )
        for name, policy in policies.items():
            policy.tick(ctx)
            assert policy.counters.instructions >= last_instructions[name], name
            last_instructions[name] = policy.counters.instructions
            assert policy.counters.data_series[-1][1] >= len(policy.history), name
        if (i + 2) % 120 == 0:  # last tick strictly inside each simulated hour
            hist = policies["hist"]
            hour_bucket_counts.append(hist.store_size() - (i + 1))
    assert hour_bucket_counts == [1, 2, 3]  # distinct histogram buckets accumulate
    for name in ALL_AUTOSCALERS:
        assert last_instructions[name] > 0, name


def test_criterion_11_workflow_identities_hold():
    # run identical to its static baseline: everything dispatches at t=0
    instant = ExperimentConfig(
        trace={
            "generator": "burst",
            "params": {"tasks": 50, "runtime_min_s": 2.0, "runtime_max_s": 2.0, "window_s": 0.0},
        },
        clusters=2,
        vms_per_cluster=30,
        baseline=True,
    )
    rep = run_experiment(instant)
    slowdowns = [workflow_metrics(r).slowdown for r in rep.result.records]
    assert all(s == 1.0 for s in slowdowns)
    assert rep.mean_slowdown == 1.0

    # congested run: waits and delays are nonzero and the identities still hold
    congested = ExperimentConfig(
        trace={
            "generator": "burst",
            "params": {"tasks": 100, "runtime_min_s": 3.0, "runtime_max_s": 3.0, "window_s": 10.0},
        },
        clusters=1,
        vms_per_cluster=10,
        interval_s=5.0,
        baseline=True,
    )
    crep = run_experiment(congested)
    records = crep.result.records
    expected_delay_ms = 0
    saw_wait = False
    for r in records:
        m = workflow_metrics(r)
        wait_ms = r.first_start_ms - r.arrival_ms
        makespan_ms = r.last_completion_ms - r.first_start_ms
        saw_wait = saw_wait or wait_ms > 0
        assert m.response_s == (wait_ms + makespan_ms) / 1000.0
        assert m.response_s == m.makespan_s + m.wait_s or round(
            m.response_s * 1000
        ) == round((m.makespan_s + m.wait_s) * 1000)
        assert m.slowdown_normalized == (wait_ms + makespan_ms) / r.critical_path_ms
        expected_delay_ms += max(0, (r.last_completion_ms - r.arrival_ms) - r.critical_path_ms)
    assert saw_wait
    assert cumulative_delay(records) == expected_delay_ms / 1000.0
    assert crep.cumulative_delay_s == expected_delay_ms / 1000.0
    assert expected_delay_ms > 0
