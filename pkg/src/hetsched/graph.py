"""Immutable DAG of kernel vertices with index-based adjacency.

Nodes are dense integers ``0..n-1``; names are display metadata only.
Edges are ordered ``(src, dst)`` pairs kept in lexicographic order.
Generators cover the families used by the planner and the test corpus:
layered recurrent-cell grids, a small seven-node fork/join demo, and
seeded random DAGs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "Graph",
    "GraphFormatError",
    "ValidationReport",
    "validate",
    "gen_lstm_grid",
    "gen_demo7",
    "gen_random_dag",
    "save_graph",
    "load_graph",
]


class GraphFormatError(ValueError):
    """Raised when a graph file cannot be parsed or fails validation."""


@dataclass(frozen=True)
class Graph:
    """A directed graph over integer vertices.

    Construction is deliberately lenient: malformed edge lists (duplicates,
    out-of-range endpoints, cycles) are stored as given so that
    :func:`validate` can report on them.  Adjacency properties only consider
    in-range edges.
    """

    n: int
    names: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]

    @staticmethod
    def make(n: int, edges, names=None) -> "Graph":
        """Build a graph, normalising edge order and defaulting names."""
        if n < 1:
            raise ValueError(f"node count must be positive, got {n}")
        if names is None:
            names = tuple(f"v{i}" for i in range(n))
        else:
            names = tuple(str(x) for x in names)
        if len(names) != n:
            raise ValueError(f"expected {n} names, got {len(names)}")
        norm = tuple(sorted((int(a), int(b)) for a, b in edges))
        return Graph(n=n, names=names, edges=norm)

    @cached_property
    def _valid_edges(self) -> tuple[tuple[int, int], ...]:
        return tuple(
            (a, b)
            for a, b in self.edges
            if 0 <= a < self.n and 0 <= b < self.n and a != b
        )

    @cached_property
    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self._valid_edges)

    @cached_property
    def pred(self) -> tuple[tuple[int, ...], ...]:
        """Predecessors of each node, ascending."""
        p: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in sorted(self.edge_set):
            p[b].append(a)
        return tuple(tuple(x) for x in p)

    @cached_property
    def succ(self) -> tuple[tuple[int, ...], ...]:
        """Successors of each node, ascending."""
        s: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in sorted(self.edge_set):
            s[a].append(b)
        return tuple(tuple(x) for x in s)

    @cached_property
    def entries(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if not self.pred[i])

    @cached_property
    def exits(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if not self.succ[i])


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of structural validation.

    ``cycle_nodes`` lists every vertex that sits on some directed cycle
    (self loops included), ``dangling_edges`` lists edges with an endpoint
    outside ``0..n-1``, and ``duplicate_edges`` lists repeated pairs.
    A graph is accepted iff the report is empty.
    """

    cycle_nodes: tuple[int, ...] = ()
    dangling_edges: tuple[tuple[int, int], ...] = ()
    duplicate_edges: tuple[tuple[int, int], ...] = ()

    @property
    def ok(self) -> bool:
        return not (self.cycle_nodes or self.dangling_edges or self.duplicate_edges)

    def summary(self) -> str:
        if self.ok:
            return "ok"
        parts = []
        if self.cycle_nodes:
            parts.append(f"cycle nodes {list(self.cycle_nodes)}")
        if self.dangling_edges:
            parts.append(f"dangling edges {list(self.dangling_edges)}")
        if self.duplicate_edges:
            parts.append(f"duplicate edges {list(self.duplicate_edges)}")
        return "; ".join(parts)


def _scc_cycle_nodes(n: int, adj: list[list[int]]) -> list[int]:
    """Vertices belonging to a strongly connected component of size >= 2.

    Iterative Kosaraju, safe for deep chains.
    """
    order: list[int] = []
    seen = [False] * n
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        stack: list[tuple[int, int]] = [(s, 0)]
        while stack:
            u, idx = stack[-1]
            if idx < len(adj[u]):
                stack[-1] = (u, idx + 1)
                v = adj[u][idx]
                if not seen[v]:
                    seen[v] = True
                    stack.append((v, 0))
            else:
                order.append(u)
                stack.pop()
    radj: list[list[int]] = [[] for _ in range(n)]
    for u in range(n):
        for v in adj[u]:
            radj[v].append(u)
    comp = [-1] * n
    sizes: list[int] = []
    for s in reversed(order):
        if comp[s] != -1:
            continue
        c = len(sizes)
        comp[s] = c
        members = 1
        work = [s]
        while work:
            u = work.pop()
            for v in radj[u]:
                if comp[v] == -1:
                    comp[v] = c
                    members += 1
                    work.append(v)
        sizes.append(members)
    return [i for i in range(n) if sizes[comp[i]] >= 2]


def validate(graph: Graph) -> ValidationReport:
    """Check structural invariants and report every violation found."""
    dangling = tuple(
        (a, b)
        for a, b in graph.edges
        if not (0 <= a < graph.n and 0 <= b < graph.n)
    )
    seen: set[tuple[int, int]] = set()
    dupes: list[tuple[int, int]] = []
    for e in graph.edges:
        if e in seen and e not in dupes:
            dupes.append(e)
        seen.add(e)
    adj: list[list[int]] = [[] for _ in range(graph.n)]
    self_loops: set[int] = set()
    for a, b in graph.edges:
        if 0 <= a < graph.n and 0 <= b < graph.n:
            if a == b:
                self_loops.add(a)
            else:
                adj[a].append(b)
    cyc = set(_scc_cycle_nodes(graph.n, adj)) | self_loops
    return ValidationReport(
        cycle_nodes=tuple(sorted(cyc)),
        dangling_edges=dangling,
        duplicate_edges=tuple(sorted(dupes)),
    )


def gen_lstm_grid(num_layers: int, seq_len: int) -> Graph:
    """Unfolded recurrent grid: cell (l, t) depends on (l-1, t) and (l, t-1).

    Node index of cell (l, t) is ``l * seq_len + t``; the display name puts
    the timestep first, e.g. ``A_3^1`` for layer 1, timestep 3.
    """
    if num_layers < 1 or seq_len < 1:
        raise ValueError(
            f"grid needs at least one layer and one timestep, got {num_layers}x{seq_len}"
        )
    n = num_layers * seq_len
    names = []
    edges = []
    for l in range(num_layers):
        for t in range(seq_len):
            names.append(f"A_{t}^{l}")
            idx = l * seq_len + t
            if l > 0:
                edges.append(((l - 1) * seq_len + t, idx))
            if t > 0:
                edges.append((l * seq_len + t - 1, idx))
    return Graph.make(n, edges, names)


def gen_demo7() -> Graph:
    """Seven-node fork/join: four independent entries A..D feeding E and F,
    which join at G."""
    names = ("A", "B", "C", "D", "E", "F", "G")
    edges = [(0, 4), (1, 4), (2, 5), (3, 5), (4, 6), (5, 6)]
    return Graph.make(7, edges, names)


def gen_random_dag(n: int, edge_prob: float, seed: int) -> Graph:
    """Random DAG over a fixed vertex order: edge (i, j) with i < j is drawn
    independently with probability ``edge_prob``."""
    if n < 1:
        raise ValueError(f"need at least one node, got {n}")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError(f"edge probability must be within [0, 1], got {edge_prob}")
    rng = np.random.default_rng(seed)
    ii, jj = np.triu_indices(n, k=1)
    hit = rng.random(ii.size) < edge_prob
    edges = [(int(a), int(b)) for a, b in zip(ii[hit], jj[hit])]
    return Graph.make(n, edges)


def save_graph(graph: Graph, path) -> None:
    """Write the JSON form: n, names, and lexicographically sorted edges."""
    doc = {
        "n": graph.n,
        "names": list(graph.names),
        "edges": [list(e) for e in sorted(graph.edges)],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_graph(path) -> Graph:
    """Parse and validate a graph file; any structural defect raises."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise GraphFormatError(f"{path}: expected a JSON object")
    for key in ("n", "names", "edges"):
        if key not in doc:
            raise GraphFormatError(f"{path}: missing key {key!r}")
    n = doc["n"]
    if not isinstance(n, int) or n < 0:
        raise GraphFormatError(f"{path}: n must be a non-negative integer")
    names = doc["names"]
    edges = doc["edges"]
    if not isinstance(names, list) or not all(isinstance(x, str) for x in names):
        raise GraphFormatError(f"{path}: names must be a list of strings")
    if not isinstance(edges, list) or not all(
        isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) for v in e)
        for e in edges
    ):
        raise GraphFormatError(f"{path}: edges must be a list of [src, dst] pairs")
    try:
        g = Graph.make(n, [tuple(e) for e in edges], names)
    except ValueError as exc:
        raise GraphFormatError(f"{path}: {exc}") from exc
    report = validate(g)
    if not report.ok:
        raise GraphFormatError(f"{path}: invalid graph: {report.summary()}")
    return g
