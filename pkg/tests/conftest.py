"""Shared builders for the test corpus."""
from __future__ import annotations

import numpy as np

from hetsched.costmodel import CostModel, SynthParams, synth_profile
from hetsched.engine import resolve_cores
from hetsched.graph import Graph, gen_demo7, gen_lstm_grid, gen_random_dag
from hetsched.planner import Order, Plan


def hand_cm(n, k, b, W, C=None, Mem=None):
    """Cost model from explicit tables; C is a {(src, dst): mb} dict."""
    C = C or {}
    dense = np.zeros((n, n), dtype=np.float64)
    for (a, bb), mb in C.items():
        dense[a, bb] = mb
    if Mem is None:
        Mem = np.zeros((n, 4), dtype=np.float64)
    return CostModel(
        k=k, b=b, W=np.asarray(W, dtype=np.float64), C=dense,
        Mem=np.asarray(Mem, dtype=np.float64), c_edges=frozenset(C),
    )


def random_params(rng) -> SynthParams:
    return SynthParams(
        gpu_mean=2.0 + 10.0 * float(rng.random()),
        cpu_base_mean=2.0 + 10.0 * float(rng.random()),
        contention_slope=0.2 * float(rng.random()),
        comm_mean=0.5 + 5.0 * float(rng.random()),
        b=1.0 + 7.0 * float(rng.random()),
        k=int(rng.integers(1, 5)),
    )


def random_instance(rng, n_max=30):
    """Seeded (graph, cost model) pair."""
    n = int(rng.integers(2, n_max + 1))
    p = 0.1 + 0.5 * float(rng.random())
    graph = gen_random_dag(n, p, int(rng.integers(0, 2**31)))
    cm = synth_profile(graph, random_params(rng), int(rng.integers(0, 2**31)))
    return graph, cm


def assert_valid_order(graph: Graph, seq) -> None:
    """Fail unless seq is a topological permutation of the graph's nodes."""
    assert sorted(seq) == list(range(graph.n))
    pos = {u: i for i, u in enumerate(seq)}
    for a, b in graph.edges:
        assert pos[a] < pos[b], f"edge ({a}, {b}) runs backwards"


def random_topo_order(graph: Graph, rng) -> Order:
    """Random linearisation via Kahn with random ready picks."""
    indeg = [len(graph.pred[i]) for i in range(graph.n)]
    ready = [i for i in range(graph.n) if indeg[i] == 0]
    out = []
    while ready:
        u = ready.pop(int(rng.integers(0, len(ready))))
        out.append(u)
        for v in graph.succ[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                ready.append(v)
    return Order(seq=tuple(out))


def random_valid_plan(graph: Graph, cm: CostModel, rng, alpha=0.0) -> Plan:
    """Arbitrary well-formed plan: random order, classes, and cores."""
    order = random_topo_order(graph, rng)
    k_star = int(rng.integers(0, cm.k + 1))
    if k_star == 0:
        classes = (0,) * graph.n
    else:
        classes = tuple(int(rng.integers(0, 2)) for _ in range(graph.n))
    if k_star > 0 and bool(rng.integers(0, 2)):
        cores, _aft, _lat = resolve_cores(graph, cm, order.seq, classes, k_star)
        cores = tuple(cores)
    else:
        cores = tuple(
            0 if c == 0 else int(rng.integers(1, k_star + 1)) for c in classes
        )
    return Plan(order=order, selection=classes, cores=cores, k_star=k_star,
                alpha=alpha)


def standard_profiles():
    """The fixed (graph, cost model) pairs the identity tests run over."""
    from hetsched.costmodel import PRESETS

    pairs = []
    for preset in ("gpu-dominant", "cpu-comparable", "comm-heavy"):
        pairs.append((gen_demo7(), synth_profile(gen_demo7(), PRESETS[preset], 5)))
    for layers, seq in ((2, 4), (4, 8)):
        g = gen_lstm_grid(layers, seq)
        pairs.append((g, synth_profile(g, PRESETS["cpu-comparable"], 9)))
    rng = np.random.default_rng(77)
    for _ in range(5):
        pairs.append(random_instance(rng, n_max=20))
    return pairs
