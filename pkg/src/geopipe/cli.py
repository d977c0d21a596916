"""Command-line interface.

Subcommands:
  group            build the two-level device hierarchy from a cluster file
  cost             evaluate the analytic cost of a plan
  plan             search for the best parallelization plan
  simulate         run the event-driven simulator on a plan
  compare          sweep policies / adapter settings, emit a CSV table
  export-timeline  write a Chrome trace-event timeline for a plan
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import List, Optional

from . import fileio
from .adapter import AdapterConfig
from .costmodel import breakdown_table, plan_cost
from .engine import Policy
from .errors import GeopipeError
from .grouping import (
    build_hierarchy,
    group_first_level,
    group_second_level,
    hierarchy_dot,
)
from .nettrace import CONSTANT_TRACE
from .planner import SearchConfig, exhaustive_plan, search_plan
from .simulator import SimConfig, simulate
from .timeline import render_text, write_timeline
from .timing import GroupIndex, build_plan_timing


def _policy(name: str) -> Policy:
    try:
        return Policy(name)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown policy {name!r}; choose from "
            f"{', '.join(p.value for p in Policy)}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="write output to this file instead of stdout")


def _load_groups(args) -> GroupIndex:
    if getattr(args, "groups", None):
        fgs, sgs_by_fg = fileio.read_groups(args.groups)
    else:
        topology = fileio.read_cluster(args.cluster)
        fgs = group_first_level(topology, args.threshold_net)
        sgs_by_fg = {
            fg.id: group_second_level(fg, topology, args.threshold_compute)
            for fg in fgs
        }
    return GroupIndex.build(fgs, sgs_by_fg)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def cmd_group(args) -> int:
    topology = fileio.read_cluster(args.cluster)
    fgs = group_first_level(topology, args.threshold_net)
    sgs_by_fg = build_hierarchy(topology, args.threshold_net,
                                args.threshold_compute)
    if args.dot:
        _emit(hierarchy_dot(topology, fgs, sgs_by_fg), args.out)
    else:
        _emit(json.dumps(fileio.groups_to_dict(fgs, sgs_by_fg), indent=2),
              args.out)
    return 0


def cmd_cost(args) -> int:
    topology = fileio.read_cluster(args.cluster)
    model = fileio.read_model(args.model)
    plan = fileio.read_plan(args.plan)
    groups = _load_groups(args)
    breakdown = plan_cost(plan, topology, model, groups)
    _emit(breakdown_table(breakdown), args.out)
    return 0


def cmd_plan(args) -> int:
    topology = fileio.read_cluster(args.cluster)
    model = fileio.read_model(args.model)
    groups = _load_groups(args)
    config = SearchConfig(seed=args.seed, beam_width=args.beam_width,
                          max_iter=args.max_iter)
    search = exhaustive_plan if args.exhaustive else search_plan
    result = search(model, topology, groups, config)
    doc = fileio.plan_to_dict(result.plan)
    doc["cost_s"] = result.breakdown.plan_cost
    doc["evaluated"] = result.evaluated
    _emit(json.dumps(doc, indent=2), args.out)
    print(f"best cost {result.breakdown.plan_cost:.6g} s "
          f"({result.evaluated} plans evaluated)", file=sys.stderr)
    return 0


def cmd_simulate(args) -> int:
    topology = fileio.read_cluster(args.cluster)
    model = fileio.read_model(args.model)
    plan = fileio.read_plan(args.plan)
    groups = _load_groups(args)
    trace = fileio.read_trace(args.trace) if args.trace else CONSTANT_TRACE
    config = SimConfig(iterations=args.iterations, seed=args.seed,
                       adapter=AdapterConfig())
    report = simulate(plan, topology, model, groups, args.policy, trace,
                      adapter_enabled=args.adapter, config=config)
    _emit(json.dumps(report.to_dict(), indent=2), args.out)
    return 0


def cmd_compare(args) -> int:
    topology = fileio.read_cluster(args.cluster)
    model = fileio.read_model(args.model)
    plan = fileio.read_plan(args.plan)
    groups = _load_groups(args)
    trace = fileio.read_trace(args.trace) if args.trace else CONSTANT_TRACE
    config = SimConfig(iterations=args.iterations, seed=args.seed)
    policies = [args.policy] if args.policy else list(Policy)
    rows: List[dict] = []
    for policy in policies:
        for adapter_on in ([True, False] if args.adapter else [False]):
            report = simulate(plan, topology, model, groups, policy, trace,
                              adapter_enabled=adapter_on, config=config)
            rows.append({
                "policy": policy.value,
                "adapter": int(adapter_on),
                "makespan_s": f"{report.makespan:.9g}",
                "throughput_samples_per_s": f"{report.throughput:.9g}",
                "steady_throughput_samples_per_s":
                    f"{report.steady_throughput:.9g}",
                "max_bubble_fraction":
                    f"{max(report.bubble_fractions):.9g}",
                "adapter_actions": len(report.adapter_actions),
            })
    fieldnames = list(rows[0].keys())
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(rows)
    else:
        writer = csv.DictWriter(sys.stdout, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    return 0


def cmd_export_timeline(args) -> int:
    topology = fileio.read_cluster(args.cluster)
    model = fileio.read_model(args.model)
    plan = fileio.read_plan(args.plan)
    groups = _load_groups(args)
    trace = fileio.read_trace(args.trace) if args.trace else CONSTANT_TRACE
    config = SimConfig(iterations=args.iterations, seed=args.seed)
    report = simulate(plan, topology, model, groups, args.policy, trace,
                      adapter_enabled=args.adapter, config=config)
    out = args.out or "timeline.json"
    write_timeline(report.schedule, out, report.transfers)
    print(render_text(report.schedule), file=sys.stderr)
    print(f"wrote {out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geopipe",
        description="Plan and simulate pipelined training over "
                    "geo-distributed devices.")
    sub = parser.add_subparsers(dest="command", required=True)

    def grouping_flags(p):
        p.add_argument("--threshold-net", type=float, default=0.3,
                       help="relative spread below which network groups merge")
        p.add_argument("--threshold-compute", type=float, default=0.3,
                       help="relative spread below which compute groups merge")
        p.add_argument("--groups",
                       help="precomputed groups file (skips regrouping)")

    p = sub.add_parser("group", help="build the device hierarchy")
    p.add_argument("cluster")
    p.add_argument("--threshold-net", type=float, default=0.3)
    p.add_argument("--threshold-compute", type=float, default=0.3)
    p.add_argument("--dot", action="store_true",
                   help="emit a DOT graph instead of JSON")
    _add_common(p)
    p.set_defaults(func=cmd_group)

    p = sub.add_parser("cost", help="evaluate a plan's analytic cost")
    p.add_argument("cluster")
    p.add_argument("model")
    p.add_argument("plan")
    grouping_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("plan", help="search for the best plan")
    p.add_argument("cluster")
    p.add_argument("model")
    grouping_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beam-width", type=int, default=8)
    p.add_argument("--max-iter", type=int, default=20)
    p.add_argument("--exhaustive", action="store_true",
                   help="enumerate every plan (tiny instances only)")
    _add_common(p)
    p.set_defaults(func=cmd_plan)

    def sim_flags(p):
        p.add_argument("--policy", type=_policy, default=Policy.ONE_F_ONE_B)
        p.add_argument("--adapter", action="store_true",
                       help="enable dynamic micro-batch adjustment")
        p.add_argument("--iterations", type=int, default=3)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trace", help="bandwidth trace file")

    p = sub.add_parser("simulate", help="simulate a plan")
    p.add_argument("cluster")
    p.add_argument("model")
    p.add_argument("plan")
    grouping_flags(p)
    sim_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="compare policies / adapter settings")
    p.add_argument("cluster")
    p.add_argument("model")
    p.add_argument("plan")
    grouping_flags(p)
    p.add_argument("--policy", type=_policy, default=None,
                   help="restrict to one policy (default: all)")
    p.add_argument("--adapter", action="store_true",
                   help="also run each policy with the adapter enabled")
    p.add_argument("--iterations", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", help="bandwidth trace file")
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-timeline",
                       help="write a trace-event timeline for a plan")
    p.add_argument("cluster")
    p.add_argument("model")
    p.add_argument("plan")
    grouping_flags(p)
    sim_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_export_timeline)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GeopipeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
