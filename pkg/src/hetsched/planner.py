"""Plan construction: node ordering and device-class selection.

The hybrid ordering walks a ready queue breadth-first but chains a child
right behind its parent when the child has a single dependency and its
potential boundary transfer outweighs its average execution time, which
keeps transfer-dominated chains on one device.  Device selection then
walks the order once per candidate CPU core count, placing every node on
the processor that minimises finish time plus the weighted GPU memory it
would add, and keeps the core count with the lowest combined cost.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import TYPE_CHECKING

from . import engine
from .costmodel import CostModel, check_compatible

if TYPE_CHECKING:
    from .graph import Graph

__all__ = [
    "Order",
    "Plan",
    "PlanFormatError",
    "CoreCountPoint",
    "topo_sort_bfs",
    "topo_sort_dfs",
    "topo_sort_hybrid",
    "select_devices",
    "sweep_core_counts",
    "reduce_movements",
    "check_plan",
    "crossing_count",
    "save_plan",
    "load_plan",
]


class PlanFormatError(ValueError):
    """Raised when a plan file cannot be parsed or is inconsistent."""


@dataclass(frozen=True)
class Order:
    """A topological linearisation of a graph's nodes."""

    seq: tuple[int, ...]


@dataclass(frozen=True)
class Plan:
    """A complete placement: visit order, per-node device class (0 GPU,
    1 CPU), the resolved processor id per node, the CPU core budget, and
    the memory weight the plan was built for."""

    order: Order
    selection: tuple[int, ...]
    cores: tuple[int, ...]
    k_star: int
    alpha: float


def _check_acyclic_done(graph: "Graph", emitted_count: int) -> None:
    if emitted_count != graph.n:
        raise ValueError(
            "graph contains a cycle; topological ordering is impossible"
        )


def topo_sort_bfs(graph: "Graph") -> Order:
    """Plain breadth-first (Kahn) order, ascending node index on ties."""
    indeg = [len(graph.pred[i]) for i in range(graph.n)]
    queue = [i for i in range(graph.n) if indeg[i] == 0]
    out: list[int] = []
    qi = 0
    while qi < len(queue):
        u = queue[qi]
        qi += 1
        out.append(u)
        for v in graph.succ[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    _check_acyclic_done(graph, len(out))
    return Order(seq=tuple(out))


def topo_sort_dfs(graph: "Graph") -> Order:
    """Depth-first order that still respects readiness: a child is entered
    only once all of its dependencies are emitted, ascending index on ties."""
    emitted = [False] * graph.n
    out: list[int] = []

    def ready(v: int) -> bool:
        return all(emitted[m] for m in graph.pred[v])

    for s in range(graph.n):
        if emitted[s] or graph.pred[s]:
            continue
        emitted[s] = True
        out.append(s)
        stack: list[tuple[int, int]] = [(s, 0)]
        while stack:
            u, ci = stack[-1]
            children = graph.succ[u]
            if ci < len(children):
                stack[-1] = (u, ci + 1)
                v = children[ci]
                if not emitted[v] and ready(v):
                    emitted[v] = True
                    out.append(v)
                    stack.append((v, 0))
            else:
                stack.pop()
    _check_acyclic_done(graph, len(out))
    return Order(seq=tuple(out))


def topo_sort_hybrid(graph: "Graph", cm: CostModel) -> Order:
    """Ready-queue order with transfer-aware chaining.

    Nodes leave a FIFO ready queue seeded with every entry; a popped node
    is appended only when all of its dependencies are already placed and
    requeued otherwise.  After appending a node, any child that depends
    on it alone and whose boundary transfer would cost more than the
    child's average execution time across device kinds is appended
    immediately, depth-first, instead of entering the queue.
    """
    check_compatible(graph, cm)
    n = graph.n
    W, C, b, k = cm.W, cm.C, float(cm.b), cm.k
    marked = [False] * n
    in_queue = [False] * n
    out: list[int] = []
    queue: list[int] = []
    qi = 0

    def avg_exec(c: int) -> float:
        return (float(W[c, 0]) + float(W[c, k])) / 2.0

    def append_and_chain(v: int) -> None:
        stack: list[tuple[int, int]] = [(v, 0)]
        marked[v] = True
        out.append(v)
        while stack:
            u, ci = stack[-1]
            children = graph.succ[u]
            if ci >= len(children):
                stack.pop()
                continue
            stack[-1] = (u, ci + 1)
            c = children[ci]
            if marked[c]:
                continue
            if len(graph.pred[c]) == 1 and float(C[u, c]) / b > avg_exec(c):
                marked[c] = True
                out.append(c)
                stack.append((c, 0))
            elif not in_queue[c]:
                in_queue[c] = True
                queue.append(c)

    for i in range(n):
        if not graph.pred[i]:
            in_queue[i] = True
            queue.append(i)
    stale = 0
    while qi < len(queue):
        u = queue[qi]
        qi += 1
        if marked[u]:
            continue
        if all(marked[m] for m in graph.pred[u]):
            append_and_chain(u)
            stale = 0
        else:
            queue.append(u)  # requeue behind the current tail
            stale += 1
            if stale > len(queue) - qi:
                break  # every queued node is blocked: cycle
    _check_acyclic_done(graph, len(out))
    return Order(seq=tuple(out))


@dataclass(frozen=True)
class CoreCountPoint:
    """One candidate CPU core budget with its assignment and costs."""

    k_prime: int
    plan: Plan
    latency: float
    gpu_memory: float
    total_cost: float


def sweep_core_counts(
    graph: "Graph",
    cm: CostModel,
    order: Order,
    alpha: float,
    io_transfers: bool = False,
) -> list[CoreCountPoint]:
    """Greedy per-node placement for every core budget 0..k.

    For each node, in order, every processor is scored as its finish time
    there plus ``alpha`` times the GPU memory the node would add if placed
    on the GPU (its output, ephemeral, and weight sizes plus staging
    buffers for CPU-resident inputs); the lowest score wins, processor 0
    first on ties.  The total cost of a budget is the evaluated latency
    plus ``alpha`` times the evaluated footprint, on the same arithmetic
    path as :func:`engine.evaluate`.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    check_compatible(graph, cm)
    W, Ct, Mem, b = engine._cost_lists(cm)
    n = graph.n
    entry_set = set(graph.entries)
    points: list[CoreCountPoint] = []
    for k_prime in range(cm.k + 1):
        avail = [0.0] * (k_prime + 1)
        aft = [0.0] * n
        classes = [0] * n
        cores = [0] * n
        for i in order.seq:
            marg = Mem[i][1] + Mem[i][2] + Mem[i][3]
            for m in graph.pred[i]:
                if classes[m] != engine.GPU:
                    marg += Mem[m][1]
            best_j = -1
            best_cost = 0.0
            best_f = 0.0
            for j in range(k_prime + 1):
                cls = 0 if j == 0 else 1
                w = W[i][0] if j == 0 else W[i][k_prime]
                ready = engine._input_ready(
                    Mem[i], b, cls, i in entry_set, io_transfers
                )
                _s, f = engine.step_times(
                    graph.pred[i], aft, classes, cls, Ct[i], b, avail[j], w, ready
                )
                cost = f + alpha * (marg if j == 0 else 0.0)
                if best_j < 0 or cost < best_cost:
                    best_j, best_cost, best_f = j, cost, f
            classes[i] = 0 if best_j == 0 else 1
            cores[i] = best_j
            aft[i] = best_f
            avail[best_j] = best_f
        latency = 0.0
        for i in graph.exits:
            t = engine._exit_latency(aft[i], Mem[i], b, classes[i], io_transfers)
            if t > latency:
                latency = t
        memory = engine.gpu_plan_memory(graph, cm, classes)
        total = latency + alpha * memory
        plan = Plan(
            order=order,
            selection=tuple(classes),
            cores=tuple(cores),
            k_star=k_prime,
            alpha=alpha,
        )
        points.append(
            CoreCountPoint(
                k_prime=k_prime,
                plan=plan,
                latency=latency,
                gpu_memory=memory,
                total_cost=total,
            )
        )
    return points


def select_devices(
    graph: "Graph",
    cm: CostModel,
    order: Order,
    alpha: float,
    io_transfers: bool = False,
) -> Plan:
    """Pick the device assignment and core budget with the lowest combined
    latency and weighted memory cost; lowest budget on ties."""
    points = sweep_core_counts(graph, cm, order, alpha, io_transfers)
    best = points[0]
    for p in points[1:]:
        if p.total_cost < best.total_cost:
            best = p
    return best.plan


def crossing_count(graph: "Graph", selection) -> int:
    """Number of edges whose endpoints sit on opposite sides of the PCIe
    boundary."""
    return sum(
        1 for a, b in graph.edge_set if (selection[a] == 0) != (selection[b] == 0)
    )


def reduce_movements(
    graph: "Graph",
    cm: CostModel,
    plan: Plan,
    threshold: int | None = None,
    io_transfers: bool = False,
) -> Plan:
    """Flip lone out-of-place nodes to cut boundary traffic.

    A node is a candidate when every dependency or every child sits on
    the other side (alternating chain links satisfy both).  A flip is
    kept only when the re-evaluated objective does not increase.  The
    pass stops once the crossing count reaches ``threshold`` (default
    ``max(1, n // 10)``) or a full scan changes nothing.
    """
    check_compatible(graph, cm)
    if threshold is None:
        threshold = max(1, graph.n // 10)
    if threshold < 0:
        raise ValueError(f"threshold must be non-negative, got {threshold}")
    classes = list(plan.selection)
    current_plan = plan
    current = engine.evaluate(graph, cm, plan, io_transfers).objective
    while crossing_count(graph, classes) > threshold:
        changed = False
        for i in range(graph.n):
            cls = classes[i]
            preds = graph.pred[i]
            succs = graph.succ[i]
            lonely = (
                (succs and all(classes[s] != cls for s in succs))
                or (preds and all(classes[m] != cls for m in preds))
            )
            if not lonely:
                continue
            if cls == 0 and plan.k_star < 1:
                continue  # nowhere to move it
            flipped = list(classes)
            flipped[i] = 1 - cls
            cores, _aft, _lat = engine.resolve_cores(
                graph, cm, plan.order.seq, flipped, plan.k_star, io_transfers
            )
            candidate = replace(
                current_plan, selection=tuple(flipped), cores=tuple(cores)
            )
            obj = engine.evaluate(graph, cm, candidate, io_transfers).objective
            if obj <= current:
                classes = flipped
                current_plan = candidate
                current = obj
                changed = True
        if not changed:
            break
    return current_plan


def check_plan(graph: "Graph", cm: CostModel, plan: Plan) -> None:
    """Raise unless the plan is well formed for this graph and profile."""
    engine._check_plan_shape(graph, cm, plan)
    if plan.k_star == 0 and any(c != 0 for c in plan.selection):
        raise ValueError("k_star is 0 but the plan places nodes on the CPU")
    if plan.alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {plan.alpha}")


def save_plan(plan: Plan, path) -> None:
    doc = {
        "order": list(plan.order.seq),
        "selection": list(plan.selection),
        "cores": list(plan.cores),
        "k_star": plan.k_star,
        "alpha": plan.alpha,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_plan(path) -> Plan:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise PlanFormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise PlanFormatError(f"{path}: expected a JSON object")
    for key in ("order", "selection", "cores", "k_star", "alpha"):
        if key not in doc:
            raise PlanFormatError(f"{path}: missing key {key!r}")
    order, selection, cores = doc["order"], doc["selection"], doc["cores"]
    for name, lst in (("order", order), ("selection", selection), ("cores", cores)):
        if not isinstance(lst, list) or not all(isinstance(x, int) for x in lst):
            raise PlanFormatError(f"{path}: {name} must be a list of integers")
    if not (len(order) == len(selection) == len(cores)):
        raise PlanFormatError(f"{path}: order/selection/cores lengths differ")
    if not isinstance(doc["k_star"], int) or doc["k_star"] < 0:
        raise PlanFormatError(f"{path}: k_star must be a non-negative integer")
    alpha = doc["alpha"]
    if not isinstance(alpha, (int, float)) or alpha < 0:
        raise PlanFormatError(f"{path}: alpha must be a non-negative number")
    if any(s not in (0, 1) for s in selection):
        raise PlanFormatError(f"{path}: selection entries must be 0 or 1")
    return Plan(
        order=Order(seq=tuple(order)),
        selection=tuple(selection),
        cores=tuple(cores),
        k_star=doc["k_star"],
        alpha=float(alpha),
    )
