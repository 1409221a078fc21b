"""Figure rendering for the report paths.

Charts are conveniences next to the delimited outputs: the weight sweep
as a latency/memory trade-off curve, a trace as a Gantt chart with one
lane per processor plus a transfer lane, and a serving comparison as
paired bars.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["render_sweep", "render_gantt", "render_serving"]

_CPU_COLOR = "#4878cf"
_GPU_COLOR = "#d65f5f"
_XFER_COLOR = "#6acc65"


def render_sweep(points, baseline_gpu, baseline_cpu, path) -> None:
    """Latency and footprint against the memory weight.

    ``points`` holds (alpha, latency, memory, k_star) tuples; the two
    baselines are (latency, memory) pairs drawn as reference lines.
    """
    alphas = [p[0] for p in points]
    lat = [p[1] for p in points]
    mem = [p[2] for p in points]
    fig, ax1 = plt.subplots(figsize=(7, 4.2))
    ax1.plot(alphas, lat, marker="o", color=_GPU_COLOR, label="latency (ms)")
    ax1.axhline(baseline_gpu[0], color=_GPU_COLOR, ls="--", lw=1,
                label="all-GPU latency")
    ax1.axhline(baseline_cpu[0], color="#b66dff", ls=":", lw=1,
                label="all-CPU latency")
    ax1.set_xlabel("memory weight")
    ax1.set_ylabel("latency (ms)")
    ax2 = ax1.twinx()
    ax2.plot(alphas, mem, marker="s", color=_CPU_COLOR, label="GPU memory (MB)")
    ax2.set_ylabel("GPU memory (MB)")
    h1, l1 = ax1.get_legend_handles_labels()
    h2, l2 = ax2.get_legend_handles_labels()
    ax1.legend(h1 + h2, l1 + l2, loc="center right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_gantt(trace, k_star: int, path, names=None) -> None:
    """One lane per processor (0 is the GPU) plus a transfer lane."""
    lanes = k_star + 1
    fig, ax = plt.subplots(figsize=(9, 0.6 * (lanes + 1) + 1.6))
    for s in trace.nodes:
        color = _GPU_COLOR if s.device == 0 else _CPU_COLOR
        ax.barh(s.device, s.end - s.start, left=s.start, height=0.6,
                color=color, edgecolor="black", lw=0.4)
        label = names[s.node] if names else str(s.node)
        ax.text(s.start + (s.end - s.start) / 2, s.device, label,
                ha="center", va="center", fontsize=7)
    xfer_lane = lanes
    for x in trace.transfers:
        ax.barh(xfer_lane, x.end - x.start, left=x.start, height=0.6,
                color=_XFER_COLOR, edgecolor="black", lw=0.4)
    labels = ["gpu"] + [f"cpu{j}" for j in range(1, lanes)] + ["pcie"]
    ax.set_yticks(range(lanes + 1))
    ax.set_yticklabels(labels)
    ax.invert_yaxis()
    ax.set_xlabel("time (ms)")
    ax.set_xlim(0, max(trace.makespan, 1e-9) * 1.03)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_serving(metrics_by_pattern: dict, path) -> None:
    """Violation and swapping rates per execution pattern."""
    patterns = list(metrics_by_pattern)
    viol = [metrics_by_pattern[p]["slo_violation"] for p in patterns]
    swap = [metrics_by_pattern[p]["swapping_rate"] for p in patterns]
    xs = range(len(patterns))
    width = 0.38
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.bar([x - width / 2 for x in xs], viol, width, color=_GPU_COLOR,
           label="SLO violation rate")
    ax.bar([x + width / 2 for x in xs], swap, width, color=_CPU_COLOR,
           label="swapping rate")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(patterns)
    ax.set_ylabel("rate")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
