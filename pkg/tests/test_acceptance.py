"""Release gate: the nine acceptance checks, one reported line each.

Each test reports a PASS or FAIL line with capture suspended so a plain
pytest run shows the verdict per criterion on the terminal.
"""
import time
from pathlib import Path

import numpy as np

from conftest import (
    assert_valid_order,
    random_instance,
    random_valid_plan,
    standard_profiles,
)
from hetsched.costmodel import PRESETS, SynthParams, load_profile, save_profile, synth_profile
from hetsched.engine import baseline_plans, evaluate, simulate
from hetsched.graph import (
    gen_demo7,
    gen_lstm_grid,
    gen_random_dag,
    load_graph,
    save_graph,
)
from hetsched.oracle import greedy_gap, random_corpus, save_gap_report
from hetsched.planner import (
    check_plan,
    load_plan,
    reduce_movements,
    save_plan,
    select_devices,
    topo_sort_bfs,
    topo_sort_dfs,
    topo_sort_hybrid,
)
from hetsched.servingsim import (
    ModelEntry,
    Scenario,
    Workload,
    compare_patterns,
    load_scenario,
    save_scenario,
    slo_from_latency,
)

ARCHIVE = Path(__file__).resolve().parent.parent / "acceptance_out"


class criterion:
    """Context manager that prints one PASS/FAIL line per criterion."""

    def __init__(self, num: int, text: str):
        self.num = num
        self.text = text

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        verdict = "PASS" if exc_type is None else "FAIL"
        print(f"\n{verdict} criterion {self.num}: {self.text}", flush=True)
        return False


def test_criterion_1_orderings_valid_at_scale(capsys):
    with capsys.disabled(), criterion(1, "three orderings valid on 1000 random graphs in 10 s"):
        rng = np.random.default_rng(11)
        start = time.perf_counter()
        for _ in range(1000):
            n = int(rng.integers(1, 201))
            p = 0.2 * float(rng.random())
            g = gen_random_dag(n, p, int(rng.integers(0, 2**31)))
            cm = synth_profile(g, SynthParams(), int(rng.integers(0, 2**31)))
            for order in (topo_sort_bfs(g), topo_sort_dfs(g),
                          topo_sort_hybrid(g, cm)):
                assert_valid_order(g, order.seq)
        elapsed = time.perf_counter() - start
        assert elapsed < 10.0, f"took {elapsed:.2f} s"


def test_criterion_2_simulator_twins_evaluator(capsys):
    with capsys.disabled(), criterion(2, "event-driven makespan equals evaluated latency on "
                      "1000 seeded plans, exactly"):
        rng = np.random.default_rng(22)
        for _ in range(1000):
            g, cm = random_instance(rng, n_max=40)
            plan = random_valid_plan(g, cm, rng)
            r = evaluate(g, cm, plan)
            t = simulate(g, cm, plan)
            assert t.makespan == r.latency


def test_criterion_3_degenerate_memory_identities(capsys):
    with capsys.disabled(), criterion(3, "all-GPU footprint is the plain per-node sum and "
                      "all-CPU is zero, exactly"):
        for g, cm in standard_profiles():
            gpu_plan, cpu_plan = baseline_plans(g, cm)
            assert evaluate(g, cm, gpu_plan).gpu_memory == float(
                np.sum(cm.Mem[:, 1:4]))
            assert evaluate(g, cm, cpu_plan).gpu_memory == 0.0


def test_criterion_4_weight_bound_forces_cpu(capsys):
    with capsys.disabled(), criterion(4, "a weight above the cost-to-memory bound empties the "
                      "GPU on every corpus instance"):
        rng = np.random.default_rng(44)
        corpus = standard_profiles()
        for _ in range(30):
            corpus.append(random_instance(rng, n_max=25))
        for g, cm in corpus:
            node_mem = cm.Mem[:, 1] + cm.Mem[:, 2] + cm.Mem[:, 3]
            positive = node_mem[node_mem > 0]
            if positive.size == 0:
                continue
            bound = (float(cm.W.sum()) + float(cm.C.sum()) / cm.b) / float(
                positive.min())
            plan = select_devices(g, cm, topo_sort_hybrid(g, cm),
                                  alpha=bound * 1.000001)
            assert plan.selection == (1,) * g.n
            assert evaluate(g, cm, plan).gpu_memory == 0.0


def test_criterion_5_oracle_never_beaten_by_less(capsys):
    with capsys.disabled(), criterion(5, "greedy never beats the exhaustive optimum over 200 "
                      "small instances in 5 min, report archived"):
        start = time.perf_counter()
        corpus = random_corpus(200, seed=42)
        for g, cm, _alpha in corpus:
            assert g.n <= 7 and cm.k <= 4
        report = greedy_gap(corpus)  # dominance asserted per instance
        elapsed = time.perf_counter() - start
        assert elapsed < 300.0, f"took {elapsed:.2f} s"
        assert report.quantiles["count"] == 200
        assert report.quantiles["min"] >= 1.0
        ARCHIVE.mkdir(exist_ok=True)
        save_gap_report(report, ARCHIVE / "gap.csv", ARCHIVE / "gap.json")
        assert "median" in report.quantiles


def test_criterion_6_weight_sweep_trades_memory_for_latency(capsys):
    with capsys.disabled(), criterion(6, "raising the weight to 1.0 strictly cuts memory and "
                      "never cuts latency, in 30 s"):
        start = time.perf_counter()
        for g in (gen_demo7(), gen_lstm_grid(4, 8)):
            cm = synth_profile(g, PRESETS["cpu-comparable"], seed=6)
            order = topo_sort_hybrid(g, cm)
            evs = [
                evaluate(g, cm, select_devices(g, cm, order, i * 0.1))
                for i in range(11)
            ]
            assert evs[10].gpu_memory < evs[0].gpu_memory
            assert evs[0].latency <= evs[10].latency
        elapsed = time.perf_counter() - start
        assert elapsed < 30.0, f"took {elapsed:.2f} s"


def test_criterion_7_serving_patterns_split_on_swapping(capsys):
    with capsys.disabled(), criterion(7, "the memory-lean deployment never swaps while the "
                      "GPU-heavy one does"):
        def variant(footprint):
            return [
                ModelEntry(
                    id=m,
                    gpu_footprint_mb=footprint,
                    exec_latency_ms=10.0,
                    weights_mb=footprint / 2.0,
                    slo_ms=slo_from_latency(10.0),
                )
                for m in ("m0", "m1", "m2", "m3", "m4", "m5")
            ]
        report = compare_patterns(
            variant(300.0), variant(200.0), variant(100.0),
            capacity_mb=1000.0,
            workload=Workload(total_requests=120),
        )
        m = report.metrics()
        assert m["memory-optimal"]["swapping_rate"] == 0.0
        assert m["gpu"]["swapping_rate"] > 0.0


def test_criterion_8_movement_pass_is_safe(capsys):
    with capsys.disabled(), criterion(8, "the movement-reduction pass never raises the "
                      "objective or breaks a plan across 200 seeded plans"):
        rng = np.random.default_rng(88)
        for _ in range(200):
            g, cm = random_instance(rng, n_max=20)
            plan = random_valid_plan(g, cm, rng, alpha=float(rng.random()))
            before = evaluate(g, cm, plan).objective
            out = reduce_movements(g, cm, plan)
            assert evaluate(g, cm, out).objective <= before
            assert out.order == plan.order
            assert out.k_star == plan.k_star
            check_plan(g, cm, out)


def test_criterion_9_artifacts_roundtrip(capsys, tmp_path):
    with capsys.disabled(), criterion(9, "500 seeded artifacts survive the save/load round "
                      "trip unchanged"):
        rng = np.random.default_rng(99)
        count = 0
        for i in range(200):
            g = gen_random_dag(int(rng.integers(1, 40)),
                               0.5 * float(rng.random()),
                               int(rng.integers(0, 2**31)))
            save_graph(g, tmp_path / "g.json")
            assert load_graph(tmp_path / "g.json") == g
            count += 1
        for i in range(150):
            g, cm = random_instance(rng, n_max=25)
            save_profile(cm, tmp_path / "p.json")
            assert load_profile(tmp_path / "p.json") == cm
            count += 1
        for i in range(100):
            g, cm = random_instance(rng, n_max=20)
            plan = random_valid_plan(g, cm, rng, alpha=float(rng.random()))
            save_plan(plan, tmp_path / "plan.json")
            assert load_plan(tmp_path / "plan.json") == plan
            count += 1
        for i in range(50):
            models = tuple(
                ModelEntry(
                    id=f"m{j}",
                    gpu_footprint_mb=float(rng.integers(50, 500)),
                    exec_latency_ms=float(rng.integers(1, 40)),
                    weights_mb=float(rng.integers(10, 300)),
                    slo_ms=float(rng.integers(5, 80)),
                )
                for j in range(int(rng.integers(1, 5)))
            )
            workload = Workload(
                total_requests=int(rng.integers(1, 100)),
                pattern="random" if i % 2 else "uniform",
                seed=int(rng.integers(0, 1000)),
                interarrival_ms=float(rng.integers(0, 10)),
            )
            if i % 3:
                sc = Scenario(capacity_mb=1000.0, bandwidth_mb_per_ms=12.0,
                              workload=workload, models=models)
            else:
                sc = Scenario(capacity_mb=1000.0, bandwidth_mb_per_ms=12.0,
                              workload=workload,
                              patterns={"gpu": models, "latency-optimal": models,
                                        "memory-optimal": models})
            save_scenario(sc, tmp_path / "s.json")
            assert load_scenario(tmp_path / "s.json") == sc
            count += 1
        assert count == 500
