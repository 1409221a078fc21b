"""Command-line front end.

Every subcommand writes its outputs plus a fully resolved config echo
into the output directory, so a run can be reproduced from what it left
behind.  Validation failures exit with status 2 and a machine-readable
JSON error on stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from . import __version__, engine, oracle, planner, servingsim
from .costmodel import (
    PRESETS,
    ProfileFormatError,
    SynthParams,
    load_profile,
    save_profile,
    synth_profile,
)
from .graph import (
    GraphFormatError,
    gen_demo7,
    gen_lstm_grid,
    gen_random_dag,
    load_graph,
    save_graph,
)
from .planner import PlanFormatError
from .servingsim import ScenarioError

__all__ = ["main"]


class CliError(Exception):
    """Carries a stable error code for the JSON error channel."""

    def __init__(self, code: str, detail: str):
        super().__init__(detail)
        self.code = code
        self.detail = detail


@dataclass(frozen=True)
class RunConfig:
    """Resolved invocation record written next to every output set."""

    subcommand: str
    version: str
    options: dict


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_json(path: Path, doc) -> None:
    _write_text(path, json.dumps(doc, indent=2) + "\n")


def _echo_config(out: Path, subcommand: str, options: dict) -> None:
    cfg = RunConfig(subcommand=subcommand, version=__version__, options=options)
    _write_json(out / f"{subcommand}-config.json", asdict(cfg))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_graph(path: str):
    try:
        return load_graph(path)
    except FileNotFoundError as exc:
        raise CliError("graph-not-found", str(exc)) from exc
    except GraphFormatError as exc:
        raise CliError("invalid-graph", str(exc)) from exc


def _read_profile(path: str):
    try:
        return load_profile(path)
    except FileNotFoundError as exc:
        raise CliError("profile-not-found", str(exc)) from exc
    except ProfileFormatError as exc:
        raise CliError("invalid-profile", str(exc)) from exc


def _read_plan(path: str):
    try:
        return planner.load_plan(path)
    except FileNotFoundError as exc:
        raise CliError("plan-not-found", str(exc)) from exc
    except PlanFormatError as exc:
        raise CliError("invalid-plan", str(exc)) from exc


def _read_scenario(path: str):
    try:
        return servingsim.load_scenario(path)
    except FileNotFoundError as exc:
        raise CliError("scenario-not-found", str(exc)) from exc
    except ScenarioError as exc:
        raise CliError("invalid-scenario", str(exc)) from exc


def _nonneg_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number")
    if value < 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be non-negative")
    return value


def _alpha_range(spec: str) -> list[float]:
    parts = spec.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"{spec!r} is not of the form start:stop:step"
        )
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{spec!r} holds a non-numeric part")
    if start < 0 or stop < start or step <= 0:
        raise argparse.ArgumentTypeError(
            f"{spec!r} needs 0 <= start <= stop and a positive step"
        )
    count = int((stop - start) / step + 1e-9) + 1
    return [start + i * step for i in range(count)]


def cmd_gen_graph(args) -> int:
    out = _out_dir(args)
    if args.family == "lstm":
        graph = gen_lstm_grid(args.layers, args.seq)
    elif args.family == "demo7":
        graph = gen_demo7()
    else:
        graph = gen_random_dag(args.nodes, args.edge_prob, args.seed)
    save_graph(graph, out / "graph.json")
    _echo_config(
        out,
        "gen-graph",
        {
            "family": args.family,
            "layers": args.layers,
            "seq": args.seq,
            "nodes": args.nodes,
            "edge_prob": args.edge_prob,
            "seed": args.seed,
            "out": str(out),
        },
    )
    print(f"wrote {out / 'graph.json'} ({graph.n} nodes, {len(graph.edges)} edges)")
    return 0


def cmd_gen_profile(args) -> int:
    out = _out_dir(args)
    graph = _read_graph(args.graph)
    params = PRESETS[args.preset]
    overrides = {}
    for name in (
        "gpu_mean",
        "cpu_base_mean",
        "contention_slope",
        "comm_mean",
        "b",
        "k",
        "jitter",
    ):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if overrides:
        params = replace(params, **overrides)
    try:
        cm = synth_profile(graph, params, args.seed)
    except ValueError as exc:
        raise CliError("invalid-input", str(exc)) from exc
    save_profile(cm, out / "profile.json")
    _echo_config(
        out,
        "gen-profile",
        {
            "graph": args.graph,
            "preset": args.preset,
            "overrides": overrides,
            "seed": args.seed,
            "out": str(out),
        },
    )
    print(f"wrote {out / 'profile.json'} (n={cm.n}, k={cm.k})")
    return 0


def _bind(graph, cm) -> None:
    from .costmodel import check_compatible

    try:
        check_compatible(graph, cm)
    except ValueError as exc:
        raise CliError("invalid-input", str(exc)) from exc


def cmd_plan(args) -> int:
    out = _out_dir(args)
    graph = _read_graph(args.graph)
    cm = _read_profile(args.profile)
    _bind(graph, cm)
    order = planner.topo_sort_hybrid(graph, cm)
    plan = planner.select_devices(graph, cm, order, args.alpha, args.io_transfers)
    if args.movement_threshold is not None:
        plan = planner.reduce_movements(
            graph, cm, plan, args.movement_threshold, args.io_transfers
        )
    result = engine.evaluate(graph, cm, plan, args.io_transfers)
    planner.save_plan(plan, out / "plan.json")
    _write_json(
        out / "eval.json",
        {
            "latency_ms": result.latency,
            "gpu_memory_mb": result.gpu_memory,
            "objective": result.objective,
            "k_star": plan.k_star,
            "crossings": planner.crossing_count(graph, plan.selection),
        },
    )
    _echo_config(
        out,
        "plan",
        {
            "graph": args.graph,
            "profile": args.profile,
            "alpha": args.alpha,
            "movement_threshold": args.movement_threshold,
            "io_transfers": args.io_transfers,
            "out": str(out),
        },
    )
    print(
        f"plan: k_star={plan.k_star} latency={result.latency:.3f} ms "
        f"memory={result.gpu_memory:.3f} MB objective={result.objective:.3f}"
    )
    return 0


def cmd_sweep(args) -> int:
    out = _out_dir(args)
    graph = _read_graph(args.graph)
    cm = _read_profile(args.profile)
    _bind(graph, cm)
    order = planner.topo_sort_hybrid(graph, cm)
    rows = []
    points = []
    for alpha in args.alpha_sweep:
        plan = planner.select_devices(graph, cm, order, alpha, args.io_transfers)
        res = engine.evaluate(graph, cm, plan, args.io_transfers)
        rows.append(("plan", alpha, res.latency, res.gpu_memory, plan.k_star))
        points.append((alpha, res.latency, res.gpu_memory, plan.k_star))
    all_gpu, all_cpu = engine.baseline_plans(graph, cm, args.io_transfers)
    res_gpu = engine.evaluate(graph, cm, all_gpu, args.io_transfers)
    res_cpu = engine.evaluate(graph, cm, all_cpu, args.io_transfers)
    rows.append(("baseline-gpu", None, res_gpu.latency, res_gpu.gpu_memory, 0))
    rows.append(
        ("baseline-cpu", None, res_cpu.latency, res_cpu.gpu_memory, all_cpu.k_star)
    )
    lines = ["kind,alpha,latency_ms,gpu_memory_mb,k_star"]
    for kind, alpha, lat, mem, k_star in rows:
        a = "" if alpha is None else repr(alpha)
        lines.append(f"{kind},{a},{lat!r},{mem!r},{k_star}")
    _write_text(out / "sweep.csv", "\n".join(lines) + "\n")
    if not args.no_figure:
        from . import figures

        figures.render_sweep(
            points,
            (res_gpu.latency, res_gpu.gpu_memory),
            (res_cpu.latency, res_cpu.gpu_memory),
            out / "sweep.svg",
        )
    _echo_config(
        out,
        "sweep",
        {
            "graph": args.graph,
            "profile": args.profile,
            "alpha_sweep": args.alpha_sweep,
            "io_transfers": args.io_transfers,
            "no_figure": args.no_figure,
            "out": str(out),
        },
    )
    print(f"wrote {out / 'sweep.csv'} ({len(args.alpha_sweep)} points + 2 baselines)")
    return 0


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    graph = _read_graph(args.graph)
    cm = _read_profile(args.profile)
    _bind(graph, cm)
    plan = _read_plan(args.plan)
    try:
        planner.check_plan(graph, cm, plan)
    except ValueError as exc:
        raise CliError("invalid-plan", str(exc)) from exc
    trace = engine.simulate(
        graph, cm, plan, args.pcie_contention, args.io_transfers
    )
    res = engine.evaluate(graph, cm, plan, args.io_transfers)
    engine.save_trace(trace, out / "trace.csv")
    _write_json(
        out / "sim.json",
        {
            "makespan_ms": trace.makespan,
            "evaluated_latency_ms": res.latency,
            "pcie_contention": args.pcie_contention,
            "io_transfers": args.io_transfers,
        },
    )
    if not args.no_figure:
        from . import figures

        figures.render_gantt(trace, plan.k_star, out / "gantt.svg", graph.names)
    _echo_config(
        out,
        "simulate",
        {
            "graph": args.graph,
            "profile": args.profile,
            "plan": args.plan,
            "pcie_contention": args.pcie_contention,
            "io_transfers": args.io_transfers,
            "no_figure": args.no_figure,
            "out": str(out),
        },
    )
    print(f"makespan {trace.makespan:.3f} ms (evaluated latency {res.latency:.3f} ms)")
    return 0


def cmd_oracle_gap(args) -> int:
    out = _out_dir(args)
    corpus = oracle.random_corpus(
        args.count, args.seed, max_nodes=args.max_nodes, max_k=args.max_k
    )
    report = oracle.greedy_gap(corpus)
    oracle.save_gap_report(report, out / "gap.csv", out / "gap.json")
    _echo_config(
        out,
        "oracle-gap",
        {
            "count": args.count,
            "max_nodes": args.max_nodes,
            "max_k": args.max_k,
            "seed": args.seed,
            "out": str(out),
        },
    )
    q = report.quantiles
    if q.get("count"):
        print(
            f"gap over {q['count']} instances: median {q['median']:.4f}, "
            f"p90 {q['p90']:.4f}, max {q['max']:.4f}"
        )
    else:
        print("gap corpus is empty")
    return 0


def cmd_serve(args) -> int:
    out = _out_dir(args)
    scenario = _read_scenario(args.scenario)
    try:
        if scenario.models is not None:
            result = servingsim.run_serving(
                scenario.models,
                scenario.capacity_mb,
                scenario.workload,
                scenario.bandwidth_mb_per_ms,
            )
            metrics = {
                "invocations": result.metrics.invocations,
                "violations": result.metrics.violations,
                "swaps": result.metrics.swaps,
                "slo_violation": result.metrics.slo_violation,
                "swapping_rate": result.metrics.swapping_rate,
            }
            _write_json(out / "metrics.json", metrics)
            _write_text(out / "events.csv", servingsim.events_to_csv(result.events))
            print(
                f"slo_violation={metrics['slo_violation']:.4f} "
                f"swapping_rate={metrics['swapping_rate']:.4f}"
            )
        else:
            wanted = ("gpu", "latency-optimal", "memory-optimal")
            missing = [p for p in wanted if p not in scenario.patterns]
            if missing:
                raise CliError(
                    "invalid-scenario",
                    f"pattern comparison needs {list(wanted)}, missing {missing}",
                )
            report = servingsim.compare_patterns(
                scenario.patterns["gpu"],
                scenario.patterns["latency-optimal"],
                scenario.patterns["memory-optimal"],
                scenario.capacity_mb,
                scenario.workload,
                scenario.bandwidth_mb_per_ms,
            )
            _write_json(out / "metrics.json", report.metrics())
            for name, res in report.rows:
                _write_text(
                    out / f"events-{name}.csv",
                    servingsim.events_to_csv(res.events),
                )
            if not args.no_figure:
                from . import figures

                figures.render_serving(report.metrics(), out / "serving.svg")
            for name, m in report.metrics().items():
                print(
                    f"{name}: slo_violation={m['slo_violation']:.4f} "
                    f"swapping_rate={m['swapping_rate']:.4f}"
                )
    except ScenarioError as exc:
        raise CliError("invalid-scenario", str(exc)) from exc
    _echo_config(
        out,
        "serve",
        {"scenario": args.scenario, "no_figure": args.no_figure, "out": str(out)},
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetsched",
        description="plan, evaluate, and simulate CPU/GPU DAG placements",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("gen-graph", help="generate a graph file")
    p.add_argument("--family", choices=("lstm", "demo7", "random"), required=True)
    p.add_argument("--layers", type=int, default=2, help="lstm: layer count")
    p.add_argument("--seq", type=int, default=8, help="lstm: timestep count")
    p.add_argument("--nodes", type=int, default=16, help="random: node count")
    p.add_argument("--edge-prob", type=float, default=0.3,
                   help="random: edge probability")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_gen_graph)

    p = sub.add_parser("gen-profile", help="synthesise a cost profile for a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--preset", choices=sorted(PRESETS), default="cpu-comparable")
    p.add_argument("--gpu-mean", type=float, default=None)
    p.add_argument("--cpu-base-mean", type=float, default=None)
    p.add_argument("--contention-slope", type=float, default=None)
    p.add_argument("--comm-mean", type=float, default=None)
    p.add_argument("--b", type=float, default=None, help="PCIe bandwidth, MB/ms")
    p.add_argument("--k", type=int, default=None, help="CPU core count")
    p.add_argument("--jitter", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_gen_profile)

    p = sub.add_parser("plan", help="build and evaluate a placement")
    p.add_argument("--graph", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--alpha", type=_nonneg_float, default=0.0,
                   help="memory weight in the objective")
    p.add_argument("--movement-threshold", type=int, default=None,
                   help="run the movement reduction pass down to this crossing count")
    p.add_argument("--io-transfers", action="store_true",
                   help="charge host input/output staging for GPU boundary nodes")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("sweep", help="sweep the memory weight")
    p.add_argument("--graph", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--alpha-sweep", type=_alpha_range, default="0:1:0.1",
                   help="start:stop:step, inclusive")
    p.add_argument("--io-transfers", action="store_true")
    p.add_argument("--no-figure", action="store_true")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="event-driven run of a saved plan")
    p.add_argument("--graph", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--pcie-contention", action="store_true",
                   help="serialise boundary transfers through one link")
    p.add_argument("--io-transfers", action="store_true")
    p.add_argument("--no-figure", action="store_true")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle-gap", help="greedy vs exhaustive on tiny instances")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--max-nodes", type=int, default=7)
    p.add_argument("--max-k", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_oracle_gap)

    p = sub.add_parser("serve", help="serving study from a scenario file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--no-figure", action="store_true")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    if isinstance(getattr(args, "alpha_sweep", None), str):
        try:
            args.alpha_sweep = _alpha_range(args.alpha_sweep)
        except argparse.ArgumentTypeError as exc:
            print(json.dumps({"error": "invalid-input", "detail": str(exc)}),
                  file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except CliError as exc:
        print(json.dumps({"error": exc.code, "detail": exc.detail}), file=sys.stderr)
        return 2
    except ValueError as exc:
        print(json.dumps({"error": "invalid-input", "detail": str(exc)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
