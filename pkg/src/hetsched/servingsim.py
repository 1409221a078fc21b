"""Single-GPU model serving with residency management.

Models occupy their GPU footprint while resident.  A request for a
non-resident model evicts residents (least recently used by default)
until it fits, paying the offload and load transfer times before
executing.  The very first load of a model is a cold start and is not
counted as a swap; every later load is.  Metrics are exact ratios over
the event log, so recounting the log reproduces them.
"""
from __future__ import annotations

import json
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

__all__ = [
    "ModelEntry",
    "Workload",
    "Scenario",
    "ScenarioError",
    "Event",
    "ServingMetrics",
    "ServingResult",
    "PatternReport",
    "run_serving",
    "compare_patterns",
    "slo_from_latency",
    "events_to_csv",
    "save_scenario",
    "load_scenario",
]

#: Default SLO slack over a model's reference latency.
SLO_SLACK = 1.25


class ScenarioError(ValueError):
    """Raised when a scenario file cannot be parsed or is inconsistent."""


@dataclass(frozen=True)
class ModelEntry:
    """One deployable model: residency footprint, per-request latency,
    weight size for load/offload transfers, and its latency target."""

    id: str
    gpu_footprint_mb: float
    exec_latency_ms: float
    weights_mb: float
    slo_ms: float


@dataclass(frozen=True)
class Workload:
    """Request stream description.

    ``pattern`` is ``uniform`` (round-robin over the model list) or
    ``random`` (seeded choice per request).  ``interarrival_ms`` of zero
    means closed-loop: each request arrives as the server frees up, so
    nothing ever queues.  A positive value spaces arrivals evenly and
    lets queueing delay build up.
    """

    total_requests: int
    pattern: str = "uniform"
    seed: int = 0
    interarrival_ms: float = 0.0


@dataclass(frozen=True)
class Event:
    t: float
    event: str
    model: str
    detail: str


@dataclass(frozen=True)
class ServingMetrics:
    invocations: int
    violations: int
    swaps: int

    @property
    def slo_violation(self) -> float:
        return self.violations / self.invocations

    @property
    def swapping_rate(self) -> float:
        return self.swaps / self.invocations


@dataclass(frozen=True)
class ServingResult:
    metrics: ServingMetrics
    events: tuple[Event, ...]


class _LRUPolicy:
    """Evict the model touched longest ago."""

    def __init__(self):
        self._order: OrderedDict[str, None] = OrderedDict()

    def touch(self, model_id: str) -> None:
        self._order.pop(model_id, None)
        self._order[model_id] = None

    def drop(self, model_id: str) -> None:
        self._order.pop(model_id, None)

    def victim(self) -> str:
        return next(iter(self._order))


class _FIFOPolicy(_LRUPolicy):
    """Evict the model loaded earliest; touches after load do not matter."""

    def touch(self, model_id: str) -> None:
        if model_id not in self._order:
            self._order[model_id] = None


POLICIES = {"lru": _LRUPolicy, "fifo": _FIFOPolicy}


def _request_sequence(models, workload: Workload) -> Iterable[int]:
    if workload.pattern == "uniform":
        return (r % len(models) for r in range(workload.total_requests))
    if workload.pattern == "random":
        rng = np.random.default_rng(workload.seed)
        return (
            int(rng.integers(0, len(models)))
            for _ in range(workload.total_requests)
        )
    raise ScenarioError(f"unknown workload pattern {workload.pattern!r}")


def run_serving(
    models,
    capacity_mb: float,
    workload: Workload,
    bandwidth_mb_per_ms: float = 12.0,
    policy: str = "lru",
) -> ServingResult:
    """Serve the request stream and account violations and swaps."""
    models = list(models)
    if not models:
        raise ScenarioError("scenario has no models")
    ids = [m.id for m in models]
    if len(set(ids)) != len(ids):
        raise ScenarioError("model ids must be unique")
    if capacity_mb <= 0:
        raise ScenarioError(f"capacity must be positive, got {capacity_mb}")
    if bandwidth_mb_per_ms <= 0:
        raise ScenarioError(
            f"bandwidth must be positive, got {bandwidth_mb_per_ms}"
        )
    if workload.total_requests < 1:
        raise ScenarioError("workload needs at least one request")
    if workload.interarrival_ms < 0:
        raise ScenarioError("interarrival time cannot be negative")
    for m in models:
        if m.gpu_footprint_mb > capacity_mb:
            raise ScenarioError(
                f"model {m.id} footprint {m.gpu_footprint_mb} MB exceeds "
                f"capacity {capacity_mb} MB"
            )
        if m.slo_ms <= 0:
            raise ScenarioError(f"model {m.id} has a non-positive SLO")
    if policy not in POLICIES:
        raise ScenarioError(f"unknown eviction policy {policy!r}")

    by_id = {m.id: m for m in models}
    b = bandwidth_mb_per_ms
    pol = POLICIES[policy]()
    resident: dict[str, float] = {}
    used = 0.0
    ever_loaded: set[str] = set()
    events: list[Event] = []
    violations = 0
    swaps = 0
    server_free = 0.0

    for r, mi in enumerate(_request_sequence(models, workload)):
        m = models[mi]
        if workload.interarrival_ms > 0:
            arrival = r * workload.interarrival_ms
        else:
            arrival = server_free
        start = max(arrival, server_free)
        wait = start - arrival
        events.append(Event(t=arrival, event="arrive", model=m.id, detail=""))

        stall = 0.0
        if m.id not in resident:
            while used + m.gpu_footprint_mb > capacity_mb:
                victim = pol.victim()
                freed = resident.pop(victim)
                used -= freed
                pol.drop(victim)
                stall += by_id[victim].weights_mb / b
                events.append(
                    Event(t=start, event="evict", model=victim, detail=f"freed={freed!r}")
                )
            stall += m.weights_mb / b
            kind = "swap" if m.id in ever_loaded else "cold"
            if kind == "swap":
                swaps += 1
            ever_loaded.add(m.id)
            resident[m.id] = m.gpu_footprint_mb
            used += m.gpu_footprint_mb
            events.append(Event(t=start, event="load", model=m.id, detail=kind))
        pol.touch(m.id)

        latency = wait + stall + m.exec_latency_ms
        violated = latency > m.slo_ms
        if violated:
            violations += 1
        server_free = start + stall + m.exec_latency_ms
        events.append(
            Event(
                t=server_free,
                event="complete",
                model=m.id,
                detail=f"latency={latency!r},violation={int(violated)}",
            )
        )

    metrics = ServingMetrics(
        invocations=workload.total_requests, violations=violations, swaps=swaps
    )
    return ServingResult(metrics=metrics, events=tuple(events))


@dataclass(frozen=True)
class PatternReport:
    """Side-by-side serving metrics for the three execution patterns."""

    rows: tuple[tuple[str, ServingResult], ...]

    def metrics(self) -> dict[str, dict]:
        out = {}
        for name, res in self.rows:
            out[name] = {
                "invocations": res.metrics.invocations,
                "violations": res.metrics.violations,
                "swaps": res.metrics.swaps,
                "slo_violation": res.metrics.slo_violation,
                "swapping_rate": res.metrics.swapping_rate,
            }
        return out


def compare_patterns(
    models_gpu,
    models_latopt,
    models_memopt,
    capacity_mb: float,
    workload: Workload,
    bandwidth_mb_per_ms: float = 12.0,
    policy: str = "lru",
) -> PatternReport:
    """Run the same workload over the three deployment variants.

    The variants must describe the same models in the same order; only
    their footprints, latencies, and weights may differ.
    """
    ids_gpu = [m.id for m in models_gpu]
    for name, other in (("latency-optimal", models_latopt), ("memory-optimal", models_memopt)):
        if [m.id for m in other] != ids_gpu:
            raise ScenarioError(
                f"{name} variant does not list the same model ids as the gpu variant"
            )
    rows = []
    for name, models in (
        ("gpu", models_gpu),
        ("latency-optimal", models_latopt),
        ("memory-optimal", models_memopt),
    ):
        rows.append(
            (name, run_serving(models, capacity_mb, workload, bandwidth_mb_per_ms, policy))
        )
    return PatternReport(rows=tuple(rows))


def slo_from_latency(reference_latency_ms: float, slack: float = SLO_SLACK) -> float:
    """Default latency target: the reference latency with slack on top."""
    if reference_latency_ms <= 0:
        raise ValueError("reference latency must be positive")
    return reference_latency_ms * slack


def events_to_csv(events) -> str:
    lines = ["t,event,model,detail"]
    for e in events:
        lines.append(f"{e.t!r},{e.event},{e.model},{e.detail}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Scenario:
    """Serving study input: capacity, bandwidth, workload, and either a
    single model list or one list per execution pattern."""

    capacity_mb: float
    bandwidth_mb_per_ms: float
    workload: Workload
    models: tuple[ModelEntry, ...] | None = None
    patterns: dict | None = None

    def __post_init__(self):
        if (self.models is None) == (self.patterns is None):
            raise ScenarioError(
                "scenario needs exactly one of 'models' or 'patterns'"
            )


def _model_to_doc(m: ModelEntry) -> dict:
    return {
        "id": m.id,
        "gpu_footprint_mb": m.gpu_footprint_mb,
        "exec_latency_ms": m.exec_latency_ms,
        "weights_mb": m.weights_mb,
        "slo_ms": m.slo_ms,
    }


def _model_from_doc(doc, where: str) -> ModelEntry:
    if not isinstance(doc, dict):
        raise ScenarioError(f"{where}: model entries must be objects")
    for key in ("id", "gpu_footprint_mb", "exec_latency_ms", "weights_mb", "slo_ms"):
        if key not in doc:
            raise ScenarioError(f"{where}: model entry missing key {key!r}")
    if not isinstance(doc["id"], str):
        raise ScenarioError(f"{where}: model id must be a string")
    for key in ("gpu_footprint_mb", "exec_latency_ms", "weights_mb", "slo_ms"):
        if not isinstance(doc[key], (int, float)) or doc[key] < 0:
            raise ScenarioError(f"{where}: {key} must be a non-negative number")
    return ModelEntry(
        id=doc["id"],
        gpu_footprint_mb=float(doc["gpu_footprint_mb"]),
        exec_latency_ms=float(doc["exec_latency_ms"]),
        weights_mb=float(doc["weights_mb"]),
        slo_ms=float(doc["slo_ms"]),
    )


def save_scenario(scenario: Scenario, path) -> None:
    doc: dict = {
        "capacity_mb": scenario.capacity_mb,
        "bandwidth_mb_per_ms": scenario.bandwidth_mb_per_ms,
        "workload": {
            "total_requests": scenario.workload.total_requests,
            "pattern": scenario.workload.pattern,
            "seed": scenario.workload.seed,
            "interarrival_ms": scenario.workload.interarrival_ms,
        },
    }
    if scenario.models is not None:
        doc["models"] = [_model_to_doc(m) for m in scenario.models]
    else:
        doc["patterns"] = {
            name: [_model_to_doc(m) for m in models]
            for name, models in scenario.patterns.items()
        }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_scenario(path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: expected a JSON object")
    for key in ("capacity_mb", "bandwidth_mb_per_ms", "workload"):
        if key not in doc:
            raise ScenarioError(f"{path}: missing key {key!r}")
    wdoc = doc["workload"]
    if not isinstance(wdoc, dict) or "total_requests" not in wdoc:
        raise ScenarioError(f"{path}: workload must be an object with total_requests")
    workload = Workload(
        total_requests=int(wdoc["total_requests"]),
        pattern=str(wdoc.get("pattern", "uniform")),
        seed=int(wdoc.get("seed", 0)),
        interarrival_ms=float(wdoc.get("interarrival_ms", 0.0)),
    )
    if workload.pattern not in ("uniform", "random"):
        raise ScenarioError(f"{path}: unknown workload pattern {workload.pattern!r}")
    has_models = "models" in doc
    has_patterns = "patterns" in doc
    if has_models == has_patterns:
        raise ScenarioError(f"{path}: need exactly one of 'models' or 'patterns'")
    models = None
    patterns = None
    if has_models:
        if not isinstance(doc["models"], list) or not doc["models"]:
            raise ScenarioError(f"{path}: models must be a non-empty list")
        models = tuple(
            _model_from_doc(m, f"{path} models[{i}]")
            for i, m in enumerate(doc["models"])
        )
    else:
        if not isinstance(doc["patterns"], dict) or not doc["patterns"]:
            raise ScenarioError(f"{path}: patterns must be a non-empty object")
        patterns = {}
        for name, lst in doc["patterns"].items():
            if not isinstance(lst, list) or not lst:
                raise ScenarioError(
                    f"{path}: pattern {name!r} must hold a non-empty model list"
                )
            patterns[name] = tuple(
                _model_from_doc(m, f"{path} patterns[{name}][{i}]")
                for i, m in enumerate(lst)
            )
    return Scenario(
        capacity_mb=float(doc["capacity_mb"]),
        bandwidth_mb_per_ms=float(doc["bandwidth_mb_per_ms"]),
        workload=workload,
        models=models,
        patterns=patterns,
    )
