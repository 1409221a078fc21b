"""Exhaustive reference search over tiny instances.

Enumerates every topological order, every device-class assignment, and
every CPU core budget, scoring each complete candidate with the same
recurrence the evaluator uses.  CPU nodes take the core where they
finish earliest (lowest id on ties), exactly like the greedy selection
pass, so every plan the greedy can produce is inside the searched space
and the best found objective can never exceed the greedy one.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Iterator

import numpy as np

from . import engine
from .costmodel import CostModel, SynthParams, check_compatible, synth_profile
from .planner import Order, Plan, select_devices, topo_sort_hybrid

if TYPE_CHECKING:
    from .graph import Graph

__all__ = [
    "OracleResult",
    "GapRow",
    "GapReport",
    "all_topological_orders",
    "brute_force",
    "greedy_gap",
    "random_corpus",
    "save_gap_report",
]


@dataclass(frozen=True)
class OracleResult:
    best_plan: Plan
    best_objective: float
    explored: int


def all_topological_orders(graph: "Graph") -> Iterator[tuple[int, ...]]:
    """Yield every topological order in lexicographic sequence."""
    n = graph.n
    indeg = [len(graph.pred[i]) for i in range(n)]
    ready = sorted(i for i in range(n) if indeg[i] == 0)
    prefix: list[int] = []

    def walk() -> Iterator[tuple[int, ...]]:
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for u in list(ready):
            ready.remove(u)
            prefix.append(u)
            opened = []
            for v in graph.succ[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    opened.append(v)
            for v in opened:
                ready.append(v)
            ready.sort()
            yield from walk()
            for v in opened:
                ready.remove(v)
            for v in graph.succ[u]:
                indeg[v] += 1
            prefix.pop()
            ready.append(u)
            ready.sort()

    yield from walk()


def brute_force(
    graph: "Graph",
    cm: CostModel,
    alpha: float,
    max_nodes: int = 8,
    io_transfers: bool = False,
) -> OracleResult:
    """Minimise latency plus weighted memory by exhaustive enumeration.

    Candidates are visited in lexicographic (order, core budget,
    assignment) sequence with strict improvement, so the reported
    optimum is deterministic.  ``explored`` counts complete (order,
    assignment, budget) triples; a budget of zero admits only the
    all-GPU assignment.
    """
    if graph.n > max_nodes:
        raise ValueError(
            f"instance has {graph.n} nodes, above the enumeration cap {max_nodes}"
        )
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    check_compatible(graph, cm)
    W, Ct, Mem, b = engine._cost_lists(cm)
    n = graph.n
    preds = graph.pred
    exits = graph.exits
    entry_set = set(graph.entries)
    marg_base = [Mem[i][1] + Mem[i][2] + Mem[i][3] for i in range(n)]
    out_buf = [Mem[i][1] for i in range(n)]

    best_obj = math.inf
    best: tuple | None = None
    explored = 0

    for seq in all_topological_orders(graph):
        for k_prime in range(cm.k + 1):
            avail = [0.0] * (k_prime + 1)
            aft = [0.0] * n
            classes = [0] * n
            cores = [0] * n

            def place(pos: int, mem_acc: float) -> None:
                nonlocal best_obj, best, explored
                if pos == n:
                    explored += 1
                    latency = 0.0
                    for i in exits:
                        t = engine._exit_latency(
                            aft[i], Mem[i], b, classes[i], io_transfers
                        )
                        if t > latency:
                            latency = t
                    obj = latency + alpha * mem_acc
                    if obj < best_obj:
                        best_obj = obj
                        best = (seq, k_prime, tuple(classes), tuple(cores))
                    return
                i = seq[pos]
                for cls in (0, 1):
                    if cls == 1 and k_prime == 0:
                        continue
                    if cls == 0:
                        cand: Iterable[int] = (0,)
                        w = W[i][0]
                        marg = marg_base[i]
                        for m in preds[i]:
                            if classes[m] != engine.GPU:
                                marg += out_buf[m]
                    else:
                        cand = range(1, k_prime + 1)
                        w = W[i][k_prime]
                        marg = 0.0
                    ready = engine._input_ready(
                        Mem[i], b, cls, i in entry_set, io_transfers
                    )
                    best_j = -1
                    best_f = 0.0
                    for j in cand:
                        _s, f = engine.step_times(
                            preds[i], aft, classes, cls, Ct[i], b, avail[j], w, ready
                        )
                        if best_j < 0 or f < best_f:
                            best_j, best_f = j, f
                    saved_avail = avail[best_j]
                    classes[i] = cls
                    cores[i] = best_j
                    aft[i] = best_f
                    avail[best_j] = best_f
                    place(pos + 1, mem_acc + marg)
                    avail[best_j] = saved_avail
                classes[i] = 0
                cores[i] = 0
                aft[i] = 0.0

            place(0, 0.0)

    assert best is not None
    seq, k_prime, classes, cores = best
    plan = Plan(
        order=Order(seq=seq),
        selection=classes,
        cores=cores,
        k_star=k_prime,
        alpha=alpha,
    )
    return OracleResult(
        best_plan=plan,
        best_objective=engine.evaluate(graph, cm, plan, io_transfers).objective,
        explored=explored,
    )


@dataclass(frozen=True)
class GapRow:
    instance: int
    n: int
    k: int
    alpha: float
    greedy_objective: float
    oracle_objective: float
    ratio: float


@dataclass(frozen=True)
class GapReport:
    rows: tuple[GapRow, ...]
    quantiles: dict

    def to_json(self) -> str:
        doc = {
            "rows": [dict(vars(r)) for r in self.rows],
            "quantiles": self.quantiles,
        }
        return json.dumps(doc, indent=2) + "\n"

    def to_csv(self) -> str:
        lines = ["instance,n,k,alpha,greedy_objective,oracle_objective,ratio"]
        for r in self.rows:
            lines.append(
                f"{r.instance},{r.n},{r.k},{r.alpha!r},"
                f"{r.greedy_objective!r},{r.oracle_objective!r},{r.ratio!r}"
            )
        return "\n".join(lines) + "\n"


def greedy_gap(corpus: Iterable[tuple]) -> GapReport:
    """Compare greedy plans against the exhaustive optimum.

    ``corpus`` yields (graph, cost model, alpha) triples.  The oracle can
    never lose to the greedy; that is asserted per instance.  The report
    carries per-instance ratios and summary quantiles.
    """
    rows: list[GapRow] = []
    for idx, (graph, cm, alpha) in enumerate(corpus):
        order = topo_sort_hybrid(graph, cm)
        plan = select_devices(graph, cm, order, alpha)
        g = engine.evaluate(graph, cm, plan).objective
        o = brute_force(graph, cm, alpha).best_objective
        assert o <= g, (
            f"instance {idx}: oracle objective {o} exceeds greedy {g}"
        )
        if o > 0:
            ratio = g / o
        else:
            ratio = 1.0 if g == 0 else math.inf
        rows.append(
            GapRow(
                instance=idx,
                n=graph.n,
                k=cm.k,
                alpha=alpha,
                greedy_objective=g,
                oracle_objective=o,
                ratio=ratio,
            )
        )
    if rows:
        ratios = np.array([r.ratio for r in rows], dtype=np.float64)
        quantiles = {
            "count": len(rows),
            "min": float(np.min(ratios)),
            "p25": float(np.quantile(ratios, 0.25)),
            "median": float(np.quantile(ratios, 0.5)),
            "p75": float(np.quantile(ratios, 0.75)),
            "p90": float(np.quantile(ratios, 0.9)),
            "max": float(np.max(ratios)),
            "mean": float(np.mean(ratios)),
        }
    else:
        quantiles = {"count": 0}
    return GapReport(rows=tuple(rows), quantiles=quantiles)


def random_corpus(
    count: int,
    seed: int,
    max_nodes: int = 7,
    max_k: int = 4,
    alphas: tuple[float, ...] = (0.0, 0.25, 1.0),
) -> list[tuple]:
    """Seeded study corpus of small instances for the gap harness."""
    from .graph import gen_random_dag

    rng = np.random.default_rng(seed)
    corpus = []
    for idx in range(count):
        n = int(rng.integers(4, max_nodes + 1))
        p = 0.4 + 0.3 * float(rng.random())
        k = int(rng.integers(1, max_k + 1))
        graph = gen_random_dag(n, p, int(rng.integers(0, 2**31)))
        params = SynthParams(
            gpu_mean=4.0 + 8.0 * float(rng.random()),
            cpu_base_mean=4.0 + 8.0 * float(rng.random()),
            contention_slope=0.05 + 0.15 * float(rng.random()),
            comm_mean=1.0 + 6.0 * float(rng.random()),
            b=4.0,
            k=k,
        )
        cm = synth_profile(graph, params, int(rng.integers(0, 2**31)))
        corpus.append((graph, cm, alphas[idx % len(alphas)]))
    return corpus


def save_gap_report(report: GapReport, csv_path, json_path=None) -> None:
    Path(csv_path).write_text(report.to_csv())
    if json_path is not None:
        Path(json_path).write_text(report.to_json())
