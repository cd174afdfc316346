"""Command-line interface for running experiments, sweeps and trace tooling.

Exit codes: 0 success, 1 invalid input or configuration, 2 simulation
failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import engine, harness, plots, workload
from .allocation import ALLOCATORS
from .autoscaling import AUTOSCALERS, STATIC_POLICY
from .harness import PRESETS, ConfigError, ExperimentConfig, SweepSpec
from .workload import TraceError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2
EXIT_IO = 3

POLICY_CHOICES = sorted(AUTOSCALERS) + [STATIC_POLICY]


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _cmd_run(args: argparse.Namespace) -> int:
    doc = _load_json(args.config)
    if args.autoscaler:
        doc["autoscaler"] = args.autoscaler
    if args.allocator:
        doc["allocator"] = args.allocator
    config = ExperimentConfig.from_dict(doc)
    report = harness.run_experiment(config)
    out = Path(args.out)
    harness.emit_report([report], out, dump_tick_supply=args.supply_samples)
    if args.plots:
        plots.render_all([report], out)
    e = report.elasticity
    print(
        f"{report.workload}: {report.autoscaler}/{report.allocator} on "
        f"{report.clusters}x{report.vms_per_cluster} VMs"
    )
    print(
        f"  makespan {report.makespan_s:.1f}s  mean NSL {report.mean_slowdown_normalized:.3f}  "
        f"A_U {e.under_vms:.2f}  A_O {e.over_vms:.2f}  avg VMs {e.avg_vms:.1f}"
    )
    print(f"  report written to {out}")
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    if args.preset:
        kwargs = {}
        if args.scale is not None:
            kwargs["scale"] = args.scale
        spec = PRESETS[args.preset](**kwargs)
    else:
        spec = SweepSpec.from_dict(_load_json(args.spec))
    out = Path(args.out or spec.out_dir or "out")
    reports, errors = harness.run_sweep(spec)
    harness.emit_report(reports, out, dump_tick_supply=args.supply_samples)
    if args.plots and reports:
        plots.render_all(reports, out)
    print(f"{len(reports)} cells completed, {len(errors)} failed; report written to {out}")
    for label, message in errors:
        print(f"  FAILED {label}: {message}", file=sys.stderr)
    return EXIT_OK if not errors else EXIT_RUNTIME


def _cmd_size(args: argparse.Namespace) -> int:
    trace = workload.load_trace(args.trace)
    clusters = harness.size_infrastructure(trace, args.utilization, args.vms_per_cluster)
    print(clusters)
    return EXIT_OK


def _cmd_gen(args: argparse.Namespace) -> int:
    if args.kind == "chronos":
        trace = workload.generate_chronos(
            tasks_per_workflow=args.tasks_per_workflow,
            runtime_s=args.runtime,
            levels=args.levels,
            chain_group=args.chain_group,
        )
    else:
        trace = workload.generate_burst(
            tasks=args.tasks,
            runtime_min_s=args.runtime_min,
            runtime_max_s=args.runtime_max,
            window_s=args.window,
            tail_tasks=args.tail_tasks,
            tail_window_s=args.tail_window,
            seed=args.seed,
        )
    if args.duplicate > 1:
        trace = workload.duplicate_trace(trace, args.duplicate)
    workload.save_trace(trace, args.out)
    print(f"{trace.name}: {trace.workflow_count} workflows, {trace.task_count} tasks -> {args.out}")
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    trace = workload.load_trace(args.trace)
    print(
        f"{trace.name}: {trace.workflow_count} workflows, {trace.task_count} tasks, "
        f"{trace.total_cpu_seconds:.0f} cpu-seconds over {trace.horizon_s:.0f}s"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autoscalesim",
        description="Trace-driven datacenter autoscaling simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment from a config file")
    run.add_argument("--config", required=True, help="experiment config (JSON)")
    run.add_argument("--autoscaler", choices=POLICY_CHOICES, help="override config autoscaler")
    run.add_argument("--allocator", choices=sorted(ALLOCATORS), help="override config allocator")
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--supply-samples", action="store_true", help="also dump per-tick supply")
    run.add_argument(
        "--no-plots", dest="plots", action="store_false", help="skip figure rendering"
    )
    run.set_defaults(func=_cmd_run, plots=True)

    sweep = sub.add_parser("sweep", help="run a sweep from a spec file or preset")
    source = sweep.add_mutually_exclusive_group(required=True)
    source.add_argument("--spec", help="sweep spec (JSON)")
    source.add_argument("--preset", choices=sorted(PRESETS), help="built-in sweep")
    sweep.add_argument("--scale", type=float, help="shrink factor for preset workloads")
    sweep.add_argument("--out", help="output directory (default: spec out_dir or ./out)")
    sweep.add_argument("--supply-samples", action="store_true", help="also dump per-tick supply")
    sweep.add_argument(
        "--no-plots", dest="plots", action="store_false", help="skip figure rendering"
    )
    sweep.set_defaults(func=_cmd_sweep, plots=True)

    size = sub.add_parser("size", help="compute cluster count for a target utilization")
    size.add_argument("--trace", required=True)
    size.add_argument("--utilization", type=float, required=True)
    size.add_argument("--vms-per-cluster", type=int, default=70)
    size.set_defaults(func=_cmd_size)

    gen = sub.add_parser("gen", help="generate a workload trace file")
    gen_sub = gen.add_subparsers(dest="kind", required=True)
    chronos = gen_sub.add_parser("chronos", help="doubling per-minute workflow arrivals")
    chronos.add_argument("--tasks-per-workflow", type=int, default=3)
    chronos.add_argument("--runtime", type=float, default=60.0)
    chronos.add_argument("--levels", type=int, default=3)
    chronos.add_argument("--chain-group", type=int, default=0)
    burst = gen_sub.add_parser("burst", help="independent tasks over an arrival window")
    burst.add_argument("--tasks", type=int, default=24000)
    burst.add_argument("--runtime-min", type=float, default=2.0)
    burst.add_argument("--runtime-max", type=float, default=2.0)
    burst.add_argument("--window", type=float, default=60.0)
    burst.add_argument("--tail-tasks", type=int, default=0)
    burst.add_argument("--tail-window", type=float, default=0.0)
    burst.add_argument("--seed", type=int, default=0)
    for sp in (chronos, burst):
        sp.add_argument("--duplicate", type=int, default=1)
        sp.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_gen)

    validate = sub.add_parser("validate", help="parse a trace file and print a summary")
    validate.add_argument("--trace", required=True)
    validate.set_defaults(func=_cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TraceError, engine.ConfigurationError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except engine.SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
