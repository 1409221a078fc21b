"""Heterogeneous CPU/GPU DAG partitioning and serving toolkit.

The package splits into graph structure (:mod:`hetsched.graph`), cost
profiles (:mod:`hetsched.costmodel`), plan construction
(:mod:`hetsched.planner`), schedule evaluation and simulation
(:mod:`hetsched.engine`), an exhaustive reference search
(:mod:`hetsched.oracle`), a model-serving simulator
(:mod:`hetsched.servingsim`), and a CLI (:mod:`hetsched.cli`).
"""

__version__ = "0.1.0"

from .costmodel import (
    CostModel,
    PRESETS,
    SynthParams,
    check_compatible,
    comm_time,
    exec_time,
    load_profile,
    save_profile,
    synth_profile,
)
from .engine import (
    EvalResult,
    Trace,
    baseline_plans,
    evaluate,
    gpu_plan_memory,
    simulate,
)
from .graph import (
    Graph,
    ValidationReport,
    gen_demo7,
    gen_lstm_grid,
    gen_random_dag,
    load_graph,
    save_graph,
    validate,
)
from .oracle import brute_force, greedy_gap
from .planner import (
    Order,
    Plan,
    load_plan,
    reduce_movements,
    save_plan,
    select_devices,
    topo_sort_bfs,
    topo_sort_dfs,
    topo_sort_hybrid,
)
from .servingsim import (
    ModelEntry,
    Scenario,
    Workload,
    compare_patterns,
    load_scenario,
    run_serving,
    save_scenario,
)

__all__ = [
    "__version__",
    "Graph",
    "ValidationReport",
    "gen_lstm_grid",
    "gen_demo7",
    "gen_random_dag",
    "validate",
    "load_graph",
    "save_graph",
    "CostModel",
    "SynthParams",
    "PRESETS",
    "synth_profile",
    "exec_time",
    "comm_time",
    "check_compatible",
    "load_profile",
    "save_profile",
    "Order",
    "Plan",
    "topo_sort_bfs",
    "topo_sort_dfs",
    "topo_sort_hybrid",
    "select_devices",
    "reduce_movements",
    "load_plan",
    "save_plan",
    "EvalResult",
    "Trace",
    "evaluate",
    "simulate",
    "baseline_plans",
    "gpu_plan_memory",
    "brute_force",
    "greedy_gap",
    "ModelEntry",
    "Workload",
    "Scenario",
    "run_serving",
    "compare_patterns",
    "load_scenario",
    "save_scenario",
]
