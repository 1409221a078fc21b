"""Schedule evaluation: closed-form walk and event-driven twin.

Both paths share one start/finish recurrence.  A node on processor ``p``
starts at the later of ``p`` becoming free and every input arriving,
where an input from a predecessor on the other side of the PCIe boundary
arrives ``C[m][i] / b`` ms after the predecessor finishes and a same-side
input arrives immediately.  Because the two paths evaluate the identical
expressions, the simulated makespan with contention disabled equals the
evaluated latency bit for bit.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .costmodel import CostModel, check_compatible

if TYPE_CHECKING:
    from .graph import Graph
    from .planner import Plan

__all__ = [
    "EvalResult",
    "Trace",
    "NodeSpan",
    "TransferSpan",
    "gpu_plan_memory",
    "evaluate",
    "resolve_cores",
    "simulate",
    "baseline_plans",
    "trace_to_csv",
    "save_trace",
]

GPU = 0  #: device class of the GPU; CPU nodes carry class 1


@dataclass(frozen=True)
class EvalResult:
    """Closed-form schedule metrics for one plan."""

    est: tuple[float, ...]
    eft: tuple[float, ...]
    aft: tuple[float, ...]
    latency: float
    gpu_memory: float
    objective: float


@dataclass(frozen=True)
class NodeSpan:
    node: int
    device: int
    start: float
    end: float


@dataclass(frozen=True)
class TransferSpan:
    src: int
    dst: int
    start: float
    end: float
    mb: float


@dataclass(frozen=True)
class Trace:
    """Execution record of one simulated run: node spans per processor,
    boundary transfers, and the overall makespan."""

    nodes: tuple[NodeSpan, ...]
    transfers: tuple[TransferSpan, ...]
    makespan: float


def gpu_plan_memory(graph: "Graph", cm: CostModel, selection) -> float:
    """GPU memory footprint of a device-class assignment.

    Every GPU-resident node contributes its output, ephemeral, and weight
    sizes, plus the output buffer of each CPU-resident predecessor that
    must be staged in.  The sum always runs in ascending node order so the
    result does not depend on how the assignment was produced.
    """
    Mem = cm.Mem
    total = 0.0
    for i in range(graph.n):
        if selection[i] == GPU:
            total += Mem[i, 1] + Mem[i, 2] + Mem[i, 3]
            for m in graph.pred[i]:
                if selection[m] != GPU:
                    total += Mem[m, 1]
    return float(total)


def _cost_lists(cm: CostModel):
    """Plain-float views of the cost tables for the inner loops."""
    return (
        cm.W.tolist(),
        cm.C.T.tolist(),  # column i = transfer sizes into node i
        cm.Mem.tolist(),
        float(cm.b),
    )


def step_times(
    preds, aft, classes, node_class, ccol, b, avail_j, w, input_ready=0.0
):
    """Start and finish of one node on one processor given schedule state.

    This is the single recurrence every consumer shares: the start is the
    max of the processor's availability, the optional input staging time,
    and each predecessor's finish plus its boundary transfer.
    """
    t = input_ready
    for m in preds:
        a = aft[m]
        if (classes[m] == GPU) != (node_class == GPU):
            a = a + ccol[m] / b
        if a > t:
            t = a
    s = avail_j if avail_j > t else t
    return s, s + w


def _input_ready(mem_row, b, node_class, is_entry, io_transfers) -> float:
    if io_transfers and is_entry and node_class == GPU:
        return mem_row[0] / b
    return 0.0


def _exit_latency(aft_i, mem_row, b, node_class, io_transfers) -> float:
    if io_transfers and node_class == GPU:
        return aft_i + mem_row[1] / b
    return aft_i


def _check_plan_shape(graph: "Graph", cm: CostModel, plan: "Plan") -> None:
    n = graph.n
    seq = plan.order.seq
    if len(seq) != n or sorted(seq) != list(range(n)):
        raise ValueError("plan order is not a permutation of the graph's nodes")
    if len(plan.selection) != n or len(plan.cores) != n:
        raise ValueError("plan selection/cores length does not match the graph")
    if not 0 <= plan.k_star <= cm.k:
        raise ValueError(f"k_star {plan.k_star} outside 0..{cm.k}")
    pos = [0] * n
    for p, i in enumerate(seq):
        pos[i] = p
    for a, bb in graph.edge_set:
        if pos[a] > pos[bb]:
            raise ValueError(f"plan order violates precedence on edge ({a}, {bb})")
    for i in range(n):
        cls, core = plan.selection[i], plan.cores[i]
        if cls not in (0, 1):
            raise ValueError(f"node {i} has device class {cls}, expected 0 or 1")
        if cls == GPU and core != 0:
            raise ValueError(f"GPU node {i} must sit on processor 0, got {core}")
        if cls != GPU and not 1 <= core <= plan.k_star:
            raise ValueError(
                f"CPU node {i} needs a core in 1..{plan.k_star}, got {core}"
            )


def evaluate(graph: "Graph", cm: CostModel, plan: "Plan", io_transfers: bool = False) -> EvalResult:
    """Closed-form walk of the plan in its stated order.

    Example: a two-node chain with the producer on the GPU (5 ms), the
    consumer on a CPU core (4 ms), a 4 MB edge and b = 2 MB/ms starts the
    consumer at 5 + 2 = 7 and finishes at 11.
    """
    check_compatible(graph, cm)
    _check_plan_shape(graph, cm, plan)
    W, Ct, Mem, b = _cost_lists(cm)
    n = graph.n
    k_star = plan.k_star
    entry_set = set(graph.entries)
    avail = [0.0] * (k_star + 1)
    est = [0.0] * n
    eft = [0.0] * n
    aft = [0.0] * n
    for i in plan.order.seq:
        j = plan.cores[i]
        cls = plan.selection[i]
        w = W[i][0] if j == 0 else W[i][k_star]
        ready = _input_ready(Mem[i], b, cls, i in entry_set, io_transfers)
        s, f = step_times(
            graph.pred[i], aft, plan.selection, cls, Ct[i], b, avail[j], w, ready
        )
        est[i] = s
        eft[i] = f
        aft[i] = f
        avail[j] = f
    latency = 0.0
    for i in graph.exits:
        t = _exit_latency(aft[i], Mem[i], b, plan.selection[i], io_transfers)
        if t > latency:
            latency = t
    memory = gpu_plan_memory(graph, cm, plan.selection)
    objective = latency + plan.alpha * memory
    return EvalResult(
        est=tuple(est),
        eft=tuple(eft),
        aft=tuple(aft),
        latency=latency,
        gpu_memory=memory,
        objective=objective,
    )


def resolve_cores(
    graph: "Graph",
    cm: CostModel,
    seq,
    classes,
    k_star: int,
    io_transfers: bool = False,
):
    """Pin each node of a device-class assignment to a concrete processor.

    GPU nodes go to processor 0; each CPU node takes the core where it
    finishes earliest, lowest id on ties, which is exactly how the device
    selection pass breaks ties between cores.  Returns (cores, aft,
    latency).
    """
    W, Ct, Mem, b = _cost_lists(cm)
    n = graph.n
    entry_set = set(graph.entries)
    avail = [0.0] * (k_star + 1)
    cores = [0] * n
    aft = [0.0] * n
    for i in seq:
        cls = classes[i]
        if cls == GPU:
            cand = (0,)
            w = W[i][0]
        else:
            if k_star < 1:
                raise ValueError(f"node {i} wants a CPU core but k_star is 0")
            cand = range(1, k_star + 1)
            w = W[i][k_star]
        ready = _input_ready(Mem[i], b, cls, i in entry_set, io_transfers)
        best_j = -1
        best_f = 0.0
        best_s = 0.0
        for j in cand:
            s, f = step_times(
                graph.pred[i], aft, classes, cls, Ct[i], b, avail[j], w, ready
            )
            if best_j < 0 or f < best_f:
                best_j, best_f, best_s = j, f, s
        cores[i] = best_j
        aft[i] = best_f
        avail[best_j] = best_f
    latency = 0.0
    for i in graph.exits:
        t = _exit_latency(aft[i], Mem[i], b, classes[i], io_transfers)
        if t > latency:
            latency = t
    return cores, aft, latency


def simulate(
    graph: "Graph",
    cm: CostModel,
    plan: "Plan",
    pcie_contention: bool = False,
    io_transfers: bool = False,
) -> Trace:
    """Event-driven twin of :func:`evaluate`.

    Each processor runs its assigned nodes in plan order.  Boundary
    transfers either run independently (default) or serialise through a
    single PCIe link served in request order, ties broken by (request
    time, src, dst).  With contention off the makespan equals the
    evaluated latency exactly; with it on the makespan can only grow.
    """
    check_compatible(graph, cm)
    _check_plan_shape(graph, cm, plan)
    W, Ct, Mem, b = _cost_lists(cm)
    n = graph.n
    k_star = plan.k_star
    entry_set = set(graph.entries)

    queues: list[list[int]] = [[] for _ in range(k_star + 1)]
    for i in plan.order.seq:
        queues[plan.cores[i]].append(i)
    head = [0] * (k_star + 1)
    running = [False] * (k_star + 1)
    proc_free = [0.0] * (k_star + 1)

    need = [0] * n  # input arrivals still outstanding
    arrival_max = [0.0] * n
    for i in range(n):
        need[i] = len(graph.pred[i])
        if io_transfers and i in entry_set and plan.selection[i] == GPU:
            need[i] += 1  # host input staging

    node_start = [0.0] * n
    node_end = [0.0] * n
    started = [False] * n
    finished = [False] * n
    spans: list[NodeSpan] = []
    xfers: list[TransferSpan] = []

    # (time, seq) heap; payload ("end", node) or ("xfer", src, dst, mb)
    events: list = []
    seq_counter = 0

    def push(t, payload):
        nonlocal seq_counter
        heapq.heappush(events, (t, seq_counter, payload))
        seq_counter += 1

    link_free = True
    pool: list[tuple[float, int, int, float]] = []  # (request, src, dst, mb)

    def request_transfer(req_time, src, dst, mb):
        nonlocal link_free
        if not pcie_contention:
            end = req_time + mb / b
            xfers.append(TransferSpan(src, dst, req_time, end, mb))
            push(end, ("xfer", src, dst))

        else:
            pool.append((req_time, src, dst, mb))

    def dispatch_link(now):
        nonlocal link_free
        if not pcie_contention or not link_free or not pool:
            return
        pool.sort()
        req_time, src, dst, mb = pool.pop(0)
        end = now + mb / b
        xfers.append(TransferSpan(src, dst, now, end, mb))
        link_free = False
        push(end, ("xfer", src, dst))

    def deliver(src, dst, end):
        if dst < 0:
            return  # host-bound output; only the makespan sees it
        if end > arrival_max[dst]:
            arrival_max[dst] = end
        need[dst] -= 1

    def finish_node(i, end):
        finished[i] = True
        cls = plan.selection[i]
        for c in graph.succ[i]:
            if (plan.selection[c] == GPU) != (cls == GPU):
                request_transfer(end, i, c, float(cm.C[i, c]))
            else:
                deliver(i, c, end)
        if io_transfers and not graph.succ[i] and cls == GPU:
            request_transfer(end, i, -1, Mem[i][1])

    def try_starts():
        for j in range(k_star + 1):
            if running[j] or head[j] >= len(queues[j]):
                continue
            i = queues[j][head[j]]
            if need[i] > 0:
                continue
            w = W[i][0] if j == 0 else W[i][k_star]
            s = proc_free[j] if proc_free[j] > arrival_max[i] else arrival_max[i]
            node_start[i] = s
            node_end[i] = s + w
            started[i] = True
            running[j] = True
            push(s + w, ("end", i))

    # seed: host inputs for GPU entries, then whatever can start at t=0
    if io_transfers:
        for i in graph.entries:
            if plan.selection[i] == GPU:
                request_transfer(0.0, -1, i, Mem[i][0])
    dispatch_link(0.0)
    try_starts()

    while events:
        now = events[0][0]
        batch = []
        while events and events[0][0] == now:
            batch.append(heapq.heappop(events)[2])
        for payload in batch:
            if payload[0] == "end":
                i = payload[1]
                j = plan.cores[i]
                running[j] = False
                proc_free[j] = node_end[i]
                head[j] += 1
                spans.append(NodeSpan(i, j, node_start[i], node_end[i]))
                finish_node(i, node_end[i])
            else:
                _, src, dst = payload
                if pcie_contention:
                    link_free = True
                deliver(src, dst, now)
        dispatch_link(now)
        try_starts()

    if not all(finished):
        stuck = [i for i in range(n) if not finished[i]]
        raise AssertionError(f"simulation stalled with unfinished nodes {stuck}")

    makespan = 0.0
    for i in range(n):
        if node_end[i] > makespan:
            makespan = node_end[i]
    if io_transfers:
        for x in xfers:
            if x.dst < 0 and x.end > makespan:
                makespan = x.end
    spans.sort(key=lambda s: (s.start, s.node))
    xfers.sort(key=lambda x: (x.start, x.src, x.dst))
    return Trace(nodes=tuple(spans), transfers=tuple(xfers), makespan=makespan)


def baseline_plans(graph: "Graph", cm: CostModel, io_transfers: bool = False):
    """The two vanilla execution patterns as plans.

    ``all_gpu`` puts everything on processor 0 with k_star 0; ``all_cpu``
    keeps everything on host cores and picks the core count with the
    lowest evaluated latency (lowest count on ties).  Returns (all_gpu,
    all_cpu).
    """
    from .planner import Order, Plan, topo_sort_hybrid

    check_compatible(graph, cm)
    order = topo_sort_hybrid(graph, cm)
    n = graph.n
    all_gpu = Plan(
        order=order,
        selection=(0,) * n,
        cores=(0,) * n,
        k_star=0,
        alpha=0.0,
    )
    ones = (1,) * n
    best = None
    for k_prime in range(1, cm.k + 1):
        cores, _aft, latency = resolve_cores(
            graph, cm, order.seq, ones, k_prime, io_transfers
        )
        if best is None or latency < best[0]:
            best = (latency, k_prime, tuple(cores))
    all_cpu = Plan(
        order=order,
        selection=ones,
        cores=best[2],
        k_star=best[1],
        alpha=0.0,
    )
    return all_gpu, all_cpu


def trace_to_csv(trace: Trace) -> str:
    """Delimited form: node rows ``node,device,start,end`` and transfer
    rows ``xfer,src,dst,start,end,mb``."""
    lines = []
    for s in trace.nodes:
        lines.append(f"{s.node},{s.device},{s.start!r},{s.end!r}")
    for x in trace.transfers:
        lines.append(f"xfer,{x.src},{x.dst},{x.start!r},{x.end!r},{x.mb!r}")
    return "\n".join(lines) + "\n"


def save_trace(trace: Trace, path) -> None:
    from pathlib import Path

    Path(path).write_text(trace_to_csv(trace))
