"""Execution, transfer, and memory cost tables for a CPU/GPU node pool.

The pool has one GPU (processor 0) and ``k`` CPU cores (processors
``1..k``).  ``W`` holds per-node execution times: column 0 is the GPU
time, column ``j >= 1`` is the CPU time of the node when ``j`` cores are
busy in total, which models memory-bandwidth contention between cores.
``C`` holds per-edge transfer sizes in MB and ``b`` is the PCIe bandwidth
in MB/ms, so a boundary crossing on edge (i, j) costs ``C[i][j] / b`` ms.
CPU cores share host memory, so a CPU-to-CPU hop is free.  ``Mem`` holds
per-node input, output, ephemeral, and weight sizes in MB.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .graph import Graph

__all__ = [
    "CostModel",
    "ProfileFormatError",
    "SynthParams",
    "PRESETS",
    "crossing",
    "exec_time",
    "comm_time",
    "synth_profile",
    "check_compatible",
    "save_profile",
    "load_profile",
]

#: Memory draws snap to this grid (MB) so that footprint sums come out
#: identical regardless of accumulation order.
MEM_GRID = 1.0 / 1024.0


class ProfileFormatError(ValueError):
    """Raised when a profile file cannot be parsed or is inconsistent."""


@dataclass(eq=False)
class CostModel:
    """Cost tables bound to a node count but not to a particular graph.

    ``c_edges`` records exactly which (src, dst) pairs carry a transfer
    entry, including explicit zero-size ones, so that asking for the
    transfer cost of an unknown pair can be rejected.
    """

    k: int
    b: float
    W: np.ndarray
    C: np.ndarray
    Mem: np.ndarray
    c_edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.C = np.asarray(self.C, dtype=np.float64)
        self.Mem = np.asarray(self.Mem, dtype=np.float64)
        n = self.W.shape[0] if self.W.ndim == 2 else -1
        if self.k < 1:
            raise ValueError(f"need at least one CPU core, got k={self.k}")
        if self.b <= 0:
            raise ValueError(f"bandwidth must be positive, got {self.b}")
        if self.W.ndim != 2 or self.W.shape[1] != self.k + 1:
            raise ValueError(
                f"W must be n x (k+1) = n x {self.k + 1}, got {self.W.shape}"
            )
        if self.C.shape != (n, n):
            raise ValueError(f"C must be {n} x {n}, got {self.C.shape}")
        if self.Mem.shape != (n, 4):
            raise ValueError(f"Mem must be {n} x 4, got {self.Mem.shape}")
        for name, arr in (("W", self.W), ("C", self.C), ("Mem", self.Mem)):
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} entries must be finite and non-negative")
        self.c_edges = frozenset((int(a), int(b)) for a, b in self.c_edges)
        for a, bb in self.c_edges:
            if not (0 <= a < n and 0 <= bb < n):
                raise ValueError(f"transfer entry ({a}, {bb}) out of range for n={n}")
        support = {(int(i), int(j)) for i, j in zip(*np.nonzero(self.C))}
        if not support <= self.c_edges:
            extra = sorted(support - self.c_edges)[:3]
            raise ValueError(f"C has entries outside the declared edge set: {extra}")
        for arr in (self.W, self.C, self.Mem):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.W.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, CostModel):
            return NotImplemented
        return (
            self.k == other.k
            and self.b == other.b
            and self.c_edges == other.c_edges
            and np.array_equal(self.W, other.W)
            and np.array_equal(self.C, other.C)
            and np.array_equal(self.Mem, other.Mem)
        )


def crossing(device_a: int, device_b: int) -> bool:
    """True when the two processor ids sit on opposite sides of the PCIe
    boundary (0 is the GPU, everything else a CPU core)."""
    return (device_a == 0) != (device_b == 0)


def exec_time(cm: CostModel, node: int, device: int, cores_in_use: int) -> float:
    """Execution time of ``node`` on ``device`` while ``cores_in_use`` CPU
    cores are active."""
    if not 0 <= node < cm.n:
        raise ValueError(f"node {node} out of range for n={cm.n}")
    if device == 0:
        return float(cm.W[node, 0])
    if not 1 <= cores_in_use <= cm.k:
        raise ValueError(f"cores_in_use must be within 1..{cm.k}, got {cores_in_use}")
    if not 1 <= device <= cores_in_use:
        raise ValueError(
            f"device {device} exceeds the {cores_in_use} cores in use"
        )
    return float(cm.W[node, cores_in_use])


def comm_time(cm: CostModel, src: int, dst: int, cross_boundary: bool) -> float:
    """Transfer time of edge (src, dst); zero when both ends share a side."""
    if (src, dst) not in cm.c_edges:
        raise ValueError(f"({src}, {dst}) carries no transfer entry")
    if not cross_boundary:
        return 0.0
    return float(cm.C[src, dst]) / cm.b


@dataclass(frozen=True)
class SynthParams:
    """Knobs for the synthetic profile generator.

    ``jitter`` is the half-width of the uniform draw around each mean as a
    fraction of the mean; 0 makes every draw exactly the mean.  The CPU
    contention curve is linear, ``1 + contention_slope * (j - 1)`` for
    ``j`` busy cores, unless an explicit ``cpu_multipliers`` table (one
    entry per core count ``1..k``) overrides it.
    """

    gpu_mean: float = 10.0
    cpu_base_mean: float = 10.0
    contention_slope: float = 0.1
    comm_mean: float = 2.0
    mem_means: tuple[float, float, float, float] = (4.0, 8.0, 6.0, 24.0)
    b: float = 4.0
    k: int = 4
    jitter: float = 0.5
    cpu_multipliers: tuple[float, ...] | None = None


PRESETS: dict[str, SynthParams] = {
    # GPU far ahead of the CPUs and transfers expensive: offloading never pays.
    "gpu-dominant": SynthParams(
        gpu_mean=2.0, cpu_base_mean=20.0, contention_slope=0.15, comm_mean=8.0, b=2.0
    ),
    # CPU and GPU per-node times on the same scale: placement actually trades.
    "cpu-comparable": SynthParams(),
    # Transfers dwarf execution: exercises locality-driven orderings.
    "comm-heavy": SynthParams(comm_mean=80.0, b=2.0),
}


def synth_profile(graph: "Graph", params: SynthParams, seed: int) -> CostModel:
    """Draw a profile for ``graph`` with the given parameter set.

    Draw order is fixed (GPU column, CPU base column, transfer sizes in
    edge order, then memory columns) so a seed fully determines the
    result.  Memory entries snap to a 1/1024 MB grid.
    """
    if params.k < 1:
        raise ValueError(f"need at least one CPU core, got k={params.k}")
    if not 0.0 <= params.jitter < 1.0:
        raise ValueError(f"jitter must be within [0, 1), got {params.jitter}")
    if params.cpu_multipliers is not None and len(params.cpu_multipliers) != params.k:
        raise ValueError(
            f"cpu_multipliers needs one entry per core count 1..{params.k}"
        )
    n = graph.n
    rng = np.random.default_rng(seed)

    def draw(mean: float, size) -> np.ndarray:
        return mean * (1.0 + params.jitter * (2.0 * rng.random(size) - 1.0))

    gpu = draw(params.gpu_mean, n)
    cpu = draw(params.cpu_base_mean, n)
    if params.cpu_multipliers is not None:
        mult = np.asarray(params.cpu_multipliers, dtype=np.float64)
    else:
        mult = 1.0 + params.contention_slope * np.arange(params.k, dtype=np.float64)
    W = np.empty((n, params.k + 1), dtype=np.float64)
    W[:, 0] = gpu
    for j in range(1, params.k + 1):
        W[:, j] = cpu * mult[j - 1]

    edges = sorted(graph.edge_set)
    C = np.zeros((n, n), dtype=np.float64)
    sizes = draw(params.comm_mean, len(edges))
    for (a, bb), mb in zip(edges, sizes):
        C[a, bb] = mb

    Mem = np.empty((n, 4), dtype=np.float64)
    for col in range(4):
        Mem[:, col] = draw(params.mem_means[col], n)
    Mem = np.round(Mem / MEM_GRID) * MEM_GRID

    return CostModel(
        k=params.k, b=params.b, W=W, C=C, Mem=Mem, c_edges=frozenset(edges)
    )


def check_compatible(graph: "Graph", cm: CostModel) -> None:
    """Raise if the profile cannot be bound to the graph.

    Every graph edge must carry a transfer entry (an absent entry would
    silently price the hop at zero) and no entry may sit on a non-edge.
    """
    if cm.n != graph.n:
        raise ValueError(
            f"profile covers {cm.n} nodes but the graph has {graph.n}"
        )
    extra = cm.c_edges - graph.edge_set
    if extra:
        raise ValueError(
            f"profile has transfer entries on non-edges: {sorted(extra)[:3]}"
        )
    missing = graph.edge_set - cm.c_edges
    if missing:
        raise ValueError(
            f"profile lacks transfer entries for edges: {sorted(missing)[:3]}"
        )


def save_profile(cm: CostModel, path) -> None:
    """Write the JSON form; C is stored sparsely as [src, dst, mb] triples."""
    doc = {
        "k": cm.k,
        "b": cm.b,
        "W": [[float(x) for x in row] for row in cm.W],
        "C": [[a, bb, float(cm.C[a, bb])] for a, bb in sorted(cm.c_edges)],
        "Mem": [[float(x) for x in row] for row in cm.Mem],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_profile(path) -> CostModel:
    """Parse a profile file, checking shapes and value ranges."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ProfileFormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProfileFormatError(f"{path}: expected a JSON object")
    for key in ("k", "b", "W", "C", "Mem"):
        if key not in doc:
            raise ProfileFormatError(f"{path}: missing key {key!r}")
    k = doc["k"]
    if not isinstance(k, int) or k < 1:
        raise ProfileFormatError(f"{path}: k must be a positive integer")
    W = doc["W"]
    if not isinstance(W, list) or not W:
        raise ProfileFormatError(f"{path}: W must be a non-empty list of rows")
    n = len(W)
    for row in W:
        if not isinstance(row, list) or len(row) != k + 1:
            raise ProfileFormatError(
                f"{path}: every W row must have k+1 = {k + 1} columns"
            )
    Mem = doc["Mem"]
    if not isinstance(Mem, list) or len(Mem) != n or any(
        not isinstance(r, list) or len(r) != 4 for r in Mem
    ):
        raise ProfileFormatError(f"{path}: Mem must be {n} rows of 4 columns")
    C = np.zeros((n, n), dtype=np.float64)
    c_edges = set()
    for triple in doc["C"]:
        if not isinstance(triple, list) or len(triple) != 3:
            raise ProfileFormatError(f"{path}: C entries must be [src, dst, mb]")
        a, bb, mb = triple
        if not (isinstance(a, int) and isinstance(bb, int)):
            raise ProfileFormatError(f"{path}: C endpoints must be integers")
        if not (0 <= a < n and 0 <= bb < n):
            raise ProfileFormatError(f"{path}: C entry ({a}, {bb}) out of range")
        if (a, bb) in c_edges:
            raise ProfileFormatError(f"{path}: duplicate C entry ({a}, {bb})")
        c_edges.add((a, bb))
        C[a, bb] = mb
    try:
        return CostModel(
            k=k, b=float(doc["b"]), W=W, C=C, Mem=Mem, c_edges=frozenset(c_edges)
        )
    except (TypeError, ValueError) as exc:
        raise ProfileFormatError(f"{path}: {exc}") from exc
