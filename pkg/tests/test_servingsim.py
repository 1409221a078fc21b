"""Serving-loop accounting: residency, swaps, SLO hits, and scenario files."""
import json

import pytest

from hetsched.servingsim import (
    ModelEntry,
    Scenario,
    ScenarioError,
    Workload,
    compare_patterns,
    events_to_csv,
    load_scenario,
    run_serving,
    save_scenario,
    slo_from_latency,
)


def mk_model(mid, footprint=100.0, exec_ms=10.0, weights=60.0, slo=None):
    return ModelEntry(
        id=mid,
        gpu_footprint_mb=footprint,
        exec_latency_ms=exec_ms,
        weights_mb=weights,
        slo_ms=slo if slo is not None else slo_from_latency(exec_ms),
    )


def test_everything_resident_never_swaps():
    models = [mk_model(m) for m in ("a", "b", "c")]
    res = run_serving(models, 1000.0, Workload(total_requests=9))
    assert res.metrics.swaps == 0
    assert res.metrics.swapping_rate == 0.0
    loads = [e for e in res.events if e.event == "load"]
    assert [e.model for e in loads] == ["a", "b", "c"]
    assert all(e.detail == "cold" for e in loads)
    assert not any(e.event == "evict" for e in res.events)


def test_two_large_models_thrash():
    """Two models that cannot both fit alternate, so every request after
    their first loads pays a swap."""
    models = [mk_model("a", footprint=600.0), mk_model("b", footprint=600.0)]
    requests = 20
    res = run_serving(models, 1000.0, Workload(total_requests=requests))
    assert res.metrics.swaps == requests - 2
    assert res.metrics.swapping_rate == (requests - 2) / requests
    assert sum(1 for e in res.events if e.event == "evict") == requests - 1
    kinds = [e.detail for e in res.events if e.event == "load"]
    assert kinds.count("cold") == 2
    assert kinds.count("swap") == requests - 2


def test_slo_hits_only_on_load_stall():
    """The default target leaves headroom for execution but not for a cold
    load, so exactly the first request of the lone model violates."""
    m = mk_model("a", exec_ms=10.0, weights=60.0)  # stall 5 ms at b=12
    assert m.slo_ms == 12.5
    res = run_serving([m], 1000.0, Workload(total_requests=8))
    assert res.metrics.violations == 1
    assert res.metrics.slo_violation == 1 / 8
    completes = [e for e in res.events if e.event == "complete"]
    assert completes[0].detail == "latency=15.0,violation=1"
    assert completes[1].detail == "latency=10.0,violation=0"


def test_slo_all_violated():
    m = mk_model("a", exec_ms=10.0, slo=9.0)
    res = run_serving([m], 1000.0, Workload(total_requests=5))
    assert res.metrics.slo_violation == 1.0


def test_lru_evicts_least_recently_used():
    models = [mk_model(m, footprint=400.0) for m in ("a", "b", "c")]
    res = run_serving(models, 1000.0, Workload(total_requests=4))
    # uniform order a, b, c, a: c pushes out a, then a returns over b
    evicted = [e.model for e in res.events if e.event == "evict"]
    assert evicted == ["a", "b"]


def test_fifo_and_lru_diverge_after_a_retouch():
    """Request stream b, c, b, a, b, c on room for two: the repeat of b
    protects it under LRU but not under FIFO."""
    models = [mk_model(m, footprint=400.0) for m in ("a", "b", "c")]
    w = Workload(total_requests=6, pattern="random", seed=31)
    res_lru = run_serving(models, 800.0, w)
    res_fifo = run_serving(models, 800.0, w, policy="fifo")
    assert [e.model for e in res_lru.events if e.event == "evict"] == ["c", "a"]
    assert [e.model for e in res_fifo.events if e.event == "evict"] == ["b", "c", "a"]
    assert res_lru.metrics.swaps == 1
    assert res_fifo.metrics.swaps == 2


def test_duplicate_model_ids_rejected():
    a1 = mk_model("a", footprint=400.0)
    with pytest.raises(ScenarioError):
        run_serving([a1, a1], 1000.0, Workload(total_requests=2))


def test_closed_loop_never_waits():
    models = [mk_model(m, footprint=600.0) for m in ("a", "b")]
    res = run_serving(models, 1000.0, Workload(total_requests=10))
    for e in res.events:
        if e.event == "complete" and e.model == "b":
            latency = float(e.detail.split(",")[0].split("=")[1])
            # evict a (5 ms) + load b (5 ms) + run b; queueing never appears
            assert latency == 20.0
            break


def test_open_loop_waits_accumulate():
    """Arrivals faster than service build a linearly growing backlog."""
    m = mk_model("a", exec_ms=10.0, weights=0.0)
    res = run_serving([m], 1000.0,
                      Workload(total_requests=4, interarrival_ms=5.0))
    lat = [float(e.detail.split(",")[0].split("=")[1])
           for e in res.events if e.event == "complete"]
    assert lat == [10.0, 15.0, 20.0, 25.0]


def test_metrics_match_event_log_recount():
    models = [mk_model(m, footprint=350.0) for m in ("a", "b", "c", "d")]
    res = run_serving(models, 1000.0,
                      Workload(total_requests=60, pattern="random", seed=4))
    swaps = sum(1 for e in res.events
                if e.event == "load" and e.detail == "swap")
    violations = sum(1 for e in res.events
                     if e.event == "complete" and e.detail.endswith("violation=1"))
    completes = sum(1 for e in res.events if e.event == "complete")
    assert res.metrics.swaps == swaps
    assert res.metrics.violations == violations
    assert res.metrics.invocations == completes == 60


def test_resident_set_stays_within_capacity():
    models = [mk_model(m, footprint=350.0) for m in ("a", "b", "c", "d")]
    capacity = 1000.0
    res = run_serving(models, capacity,
                      Workload(total_requests=80, pattern="random", seed=9))
    by_id = {m.id: m for m in models}
    used = 0.0
    for e in res.events:
        if e.event == "load":
            used += by_id[e.model].gpu_footprint_mb
        elif e.event == "evict":
            used -= by_id[e.model].gpu_footprint_mb
        assert used <= capacity


def test_random_pattern_is_seeded():
    models = [mk_model(m, footprint=600.0) for m in ("a", "b", "c")]
    w = Workload(total_requests=30, pattern="random", seed=11)
    assert run_serving(models, 1000.0, w) == run_serving(models, 1000.0, w)
    other = Workload(total_requests=30, pattern="random", seed=12)
    assert run_serving(models, 1000.0, other) != run_serving(models, 1000.0, w)


def test_run_serving_validation():
    good = [mk_model("a")]
    w = Workload(total_requests=3)
    with pytest.raises(ScenarioError):
        run_serving([], 1000.0, w)
    with pytest.raises(ScenarioError):
        run_serving([mk_model("a", footprint=2000.0)], 1000.0, w)
    with pytest.raises(ScenarioError):
        run_serving(good, 0.0, w)
    with pytest.raises(ScenarioError):
        run_serving(good, 1000.0, w, bandwidth_mb_per_ms=0.0)
    with pytest.raises(ScenarioError):
        run_serving(good, 1000.0, Workload(total_requests=0))
    with pytest.raises(ScenarioError):
        run_serving(good, 1000.0, Workload(total_requests=3, interarrival_ms=-1.0))
    with pytest.raises(ScenarioError):
        run_serving(good, 1000.0, Workload(total_requests=3, pattern="burst"))
    with pytest.raises(ScenarioError):
        run_serving(good, 1000.0, w, policy="mru")
    with pytest.raises(ScenarioError):
        run_serving([mk_model("a", slo=0.0)], 1000.0, w)


def variant(footprint):
    return [mk_model(m, footprint=footprint) for m in ("a", "b", "c")]


def test_compare_patterns_memory_optimal_stops_swapping():
    report = compare_patterns(
        variant(450.0), variant(400.0), variant(300.0),
        capacity_mb=1000.0,
        workload=Workload(total_requests=40),
    )
    m = report.metrics()
    assert list(m) == ["gpu", "latency-optimal", "memory-optimal"]
    assert m["memory-optimal"]["swapping_rate"] == 0.0
    assert m["gpu"]["swapping_rate"] > 0.0
    assert m["latency-optimal"]["swapping_rate"] > 0.0


def test_compare_patterns_rejects_id_mismatch():
    other = [mk_model(m) for m in ("a", "b", "x")]
    with pytest.raises(ScenarioError):
        compare_patterns(variant(450.0), variant(400.0), other,
                         capacity_mb=1000.0,
                         workload=Workload(total_requests=4))


def test_slo_from_latency():
    assert slo_from_latency(10.0) == 12.5
    assert slo_from_latency(10.0, slack=2.0) == 20.0
    with pytest.raises(ValueError):
        slo_from_latency(0.0)


def test_events_csv_shape():
    res = run_serving([mk_model("a", weights=0.0)], 1000.0,
                      Workload(total_requests=1))
    lines = events_to_csv(res.events).splitlines()
    assert lines[0] == "t,event,model,detail"
    assert lines[1] == "0.0,arrive,a,"
    assert lines[2] == "0.0,load,a,cold"
    assert lines[3] == "10.0,complete,a,latency=10.0,violation=0"


def test_scenario_roundtrip_models(tmp_path):
    sc = Scenario(
        capacity_mb=1000.0,
        bandwidth_mb_per_ms=12.0,
        workload=Workload(total_requests=20, pattern="random", seed=3,
                          interarrival_ms=2.5),
        models=tuple(variant(300.0)),
    )
    p = tmp_path / "scenario.json"
    save_scenario(sc, p)
    assert load_scenario(p) == sc


def test_scenario_roundtrip_patterns(tmp_path):
    sc = Scenario(
        capacity_mb=1000.0,
        bandwidth_mb_per_ms=12.0,
        workload=Workload(total_requests=20),
        patterns={
            "gpu": tuple(variant(450.0)),
            "latency-optimal": tuple(variant(400.0)),
            "memory-optimal": tuple(variant(300.0)),
        },
    )
    p = tmp_path / "scenario.json"
    save_scenario(sc, p)
    assert load_scenario(p) == sc


def test_scenario_needs_exactly_one_form(tmp_path):
    with pytest.raises(ScenarioError):
        Scenario(capacity_mb=1.0, bandwidth_mb_per_ms=1.0,
                 workload=Workload(total_requests=1))
    with pytest.raises(ScenarioError):
        Scenario(capacity_mb=1.0, bandwidth_mb_per_ms=1.0,
                 workload=Workload(total_requests=1),
                 models=tuple(variant(1.0)), patterns={"gpu": tuple(variant(1.0))})


def test_load_scenario_errors(tmp_path):
    p = tmp_path / "s.json"
    p.write_text("{nope")
    with pytest.raises(ScenarioError):
        load_scenario(p)
    p.write_text(json.dumps({"capacity_mb": 1.0, "bandwidth_mb_per_ms": 1.0}))
    with pytest.raises(ScenarioError):
        load_scenario(p)
    p.write_text(json.dumps({
        "capacity_mb": 1.0, "bandwidth_mb_per_ms": 1.0,
        "workload": {"total_requests": 1}, "models": [],
    }))
    with pytest.raises(ScenarioError):
        load_scenario(p)
    p.write_text(json.dumps({
        "capacity_mb": 1.0, "bandwidth_mb_per_ms": 1.0,
        "workload": {"total_requests": 1},
        "models": [{"id": "a", "gpu_footprint_mb": 1.0}],
    }))
    with pytest.raises(ScenarioError):
        load_scenario(p)
    p.write_text(json.dumps({
        "capacity_mb": 1.0, "bandwidth_mb_per_ms": 1.0,
        "workload": {"total_requests": 1, "pattern": "burst"},
        "models": [],
    }))
    with pytest.raises(ScenarioError):
        load_scenario(p)
