"""Figure rendering for experiment reports.

All functions write PNG files next to the delimited report output.  The
matplotlib import is deferred and forced onto the Agg backend so the package
works headless and stays importable when figure output is not wanted.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from .harness import ExperimentReport


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_timeline(report: ExperimentReport, out_path: str | Path) -> Path:
    """Step plot of supply, demand and busy VMs over one run."""
    plt = _plt()
    series = report.result.series
    ts = [s.t_ms / 1000.0 for s in series.samples]
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.step(ts, [s.supply for s in series.samples], where="post", label="supply", lw=1.2)
    ax.step(ts, [s.demand for s in series.samples], where="post", label="demand", lw=1.0)
    ax.step(
        ts,
        [s.busy for s in series.samples],
        where="post",
        label="busy",
        lw=0.8,
        alpha=0.7,
    )
    ax.set_xlabel("time (s)")
    ax.set_ylabel("VMs")
    ax.set_title(f"{report.workload}: {report.autoscaler} / {report.allocator}")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out = Path(out_path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_supply_violins(reports: Sequence[ExperimentReport], out_path: str | Path) -> Path | None:
    """Violin plot of per-tick supply, one violin per autoscaler/allocator pair."""
    plt = _plt()
    groups: list[tuple[str, list[int]]] = []
    for report in sorted(reports, key=lambda r: (r.autoscaler, r.allocator)):
        samples = [supply for _, supply in report.result.tick_supply]
        if samples:
            label = report.autoscaler
            if len({r.allocator for r in reports}) > 1:
                label += f"\n{report.allocator}"
            groups.append((label, samples))
    if not groups:
        return None
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(groups)), 4))
    ax.violinplot([g[1] for g in groups], showmedians=True, widths=0.8)
    ax.set_xticks(range(1, len(groups) + 1))
    ax.set_xticklabels([g[0] for g in groups], fontsize=8)
    ax.set_ylabel("supplied VMs per tick")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    out = Path(out_path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_utilization_trends(
    reports: Sequence[ExperimentReport], out_path: str | Path
) -> Path | None:
    """Normalized under/over-provisioning versus target utilization, per autoscaler."""
    plt = _plt()
    by_policy: dict[str, list[ExperimentReport]] = {}
    for report in reports:
        if report.utilization is not None:
            by_policy.setdefault(report.autoscaler, []).append(report)
    if not by_policy:
        return None
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharex=True)
    for name in sorted(by_policy):
        rows = sorted(by_policy[name], key=lambda r: r.utilization)
        us = [r.utilization for r in rows]
        axes[0].plot(us, [r.elasticity.under_frac for r in rows], marker="o", ms=3, label=name)
        axes[1].plot(us, [r.elasticity.over_frac for r in rows], marker="o", ms=3, label=name)
    axes[0].set_ylabel("avg underprovisioning (fraction)")
    axes[1].set_ylabel("avg overprovisioning (fraction)")
    for ax in axes:
        ax.set_xlabel("target utilization")
        ax.grid(True, alpha=0.3)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    out = Path(out_path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_makespans(reports: Sequence[ExperimentReport], out_path: str | Path) -> Path | None:
    """Bar chart of total makespan per autoscaler, grouped by workload."""
    plt = _plt()
    workloads = sorted({r.workload for r in reports})
    policies = sorted({r.autoscaler for r in reports})
    if not workloads or not policies:
        return None
    fig, ax = plt.subplots(figsize=(max(6, 1.0 * len(policies) * len(workloads)), 4))
    width = 0.8 / len(workloads)
    for i, wl in enumerate(workloads):
        xs, ys = [], []
        for j, pol in enumerate(policies):
            rows = [r for r in reports if r.workload == wl and r.autoscaler == pol]
            if rows:
                xs.append(j + i * width)
                ys.append(sum(r.makespan_s for r in rows) / len(rows))
        ax.bar(xs, ys, width=width, label=wl)
    ax.set_xticks([j + width * (len(workloads) - 1) / 2 for j in range(len(policies))])
    ax.set_xticklabels(policies, fontsize=8)
    ax.set_ylabel("makespan (s)")
    ax.legend(fontsize=8)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    out = Path(out_path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def render_all(reports: Sequence[ExperimentReport], out_dir: str | Path) -> list[Path]:
    """Render the figure set appropriate for the given reports."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if len(reports) == 1:
        written.append(plot_timeline(reports[0], out / "timeline.png"))
    for renderer, name in (
        (plot_supply_violins, "supply_violins.png"),
        (plot_utilization_trends, "utilization_trends.png"),
        (plot_makespans, "makespans.png"),
    ):
        path = renderer(reports, out / name)
        if path is not None:
            written.append(path)
    return written
