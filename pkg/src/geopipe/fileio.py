"""Readers and writers for the structured input/output files.

All formats are JSON with a versioned ``schema`` header.  Parse failures
raise :class:`InputFileError` naming the offending field so the CLI can emit
precise diagnostics.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from .errors import InputFileError
from .grouping import FirstLevelGroup, SecondLevelGroup
from .nettrace import NetworkTrace
from .plans import (
    IntraSplit,
    LayerSpec,
    ModelSpec,
    ParallelPlan,
    SplitKind,
    StageAssignment,
)
from .profiling import (
    ClusterTopology,
    DeviceSpec,
    LinkMeasurement,
    build_topology,
)

CLUSTER_SCHEMA = "cluster/v1"
MODEL_SCHEMA = "model/v1"
TRACE_SCHEMA = "trace/v1"
PLAN_SCHEMA = "plan/v1"
GROUPS_SCHEMA = "groups/v1"


def _load(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputFileError(f"{path}: not valid JSON ({exc})") from exc
    except OSError as exc:
        raise InputFileError(f"{path}: {exc}") from exc


def _require(record: dict, key: str, context: str):
    if key not in record:
        raise InputFileError(f"{context}: missing field {key!r}")
    return record[key]


def _check_schema(doc: dict, expected: str, path):
    if doc.get("schema") != expected:
        raise InputFileError(
            f"{path}: field 'schema' must be {expected!r}, "
            f"got {doc.get('schema')!r}")


def read_cluster(path) -> ClusterTopology:
    doc = _load(path)
    _check_schema(doc, CLUSTER_SCHEMA, path)
    devices = []
    weights: Dict[str, List[float]] = {}
    for i, rec in enumerate(_require(doc, "devices", str(path))):
        ctx = f"{path}: devices[{i}]"
        benches = _require(rec, "benchmarks", ctx)
        if not benches:
            raise InputFileError(f"{ctx}: field 'benchmarks' is empty")
        times = tuple(
            (_require(b, "task", f"{ctx}.benchmarks[{j}]"),
             float(_require(b, "seconds", f"{ctx}.benchmarks[{j}]")))
            for j, b in enumerate(benches)
        )
        if any("weight" in b for b in benches):
            weights[rec["id"]] = [
                float(b.get("weight", 1.0 / len(benches))) for b in benches
            ]
        devices.append(
            DeviceSpec(
                id=str(_require(rec, "id", ctx)),
                memory_bytes=float(_require(rec, "memory_bytes", ctx)),
                benchmark_times=times,
                region_tag=str(rec.get("region", "")),
            )
        )
    measurements = []
    for i, rec in enumerate(_require(doc, "links", str(path))):
        ctx = f"{path}: links[{i}]"
        measurements.append(
            LinkMeasurement(
                endpoints=frozenset((str(_require(rec, "a", ctx)),
                                     str(_require(rec, "b", ctx)))),
                alpha_seconds=float(_require(rec, "alpha_s", ctx)),
                beta_seconds=float(_require(rec, "beta_s", ctx)),
                payload_bytes_m=float(_require(rec, "payload_bytes", ctx)),
                latency_seconds=(float(rec["latency_s"])
                                 if "latency_s" in rec else None),
                bandwidth_bytes_per_s=(float(rec["bandwidth_Bps"])
                                       if "bandwidth_Bps" in rec else None),
            )
        )
    return build_topology(devices, measurements, weights or None)


def read_model(path) -> ModelSpec:
    doc = _load(path)
    _check_schema(doc, MODEL_SCHEMA, path)
    layers = []
    for i, rec in enumerate(_require(doc, "layers", str(path))):
        ctx = f"{path}: layers[{i}]"
        fwd = float(_require(rec, "fwd_flops", ctx))
        layers.append(
            LayerSpec(
                fwd_flops=fwd,
                bwd_input_flops=float(rec.get("bwd_input_flops", fwd)),
                bwd_weight_flops=float(rec.get("bwd_weight_flops", fwd)),
                activation_out_bytes=float(
                    _require(rec, "activation_out_bytes", ctx)),
                param_bytes=float(_require(rec, "param_bytes", ctx)),
            )
        )
    kwargs = {}
    if "global_batch_candidates" in doc:
        kwargs["global_batch_candidates"] = tuple(
            int(b) for b in doc["global_batch_candidates"])
    if "microbatch_candidates" in doc:
        kwargs["microbatch_candidates"] = tuple(
            int(m) for m in doc["microbatch_candidates"])
    return ModelSpec(layers=tuple(layers), **kwargs)


def read_trace(path) -> NetworkTrace:
    doc = _load(path)
    _check_schema(doc, TRACE_SCHEMA, path)
    by_link: Dict[str, List[Tuple[float, float]]] = {}
    for i, rec in enumerate(doc.get("events", [])):
        ctx = f"{path}: events[{i}]"
        link = str(_require(rec, "link", ctx))
        by_link.setdefault(link, []).append(
            (float(_require(rec, "t_s", ctx)),
             float(_require(rec, "multiplier", ctx)))
        )
    return NetworkTrace(
        breakpoints={k: tuple(sorted(v)) for k, v in by_link.items()})


def plan_to_dict(plan: ParallelPlan) -> dict:
    return {
        "schema": PLAN_SCHEMA,
        "batch": plan.batch_b,
        "microbatch": plan.microbatch_m,
        "stages": [
            {
                "fg": s.fg_id,
                "layers": [s.layer_start, s.layer_end],
                "split": {
                    "kind": s.intra_split.kind.value,
                    "parts": [list(p) for p in s.intra_split.parts],
                },
            }
            for s in plan.stages
        ],
    }


def write_plan(plan: ParallelPlan, path) -> None:
    Path(path).write_text(json.dumps(plan_to_dict(plan), indent=2) + "\n")


def read_plan(path) -> ParallelPlan:
    doc = _load(path)
    _check_schema(doc, PLAN_SCHEMA, path)
    stages = []
    for i, rec in enumerate(_require(doc, "stages", str(path))):
        ctx = f"{path}: stages[{i}]"
        split_rec = rec.get("split", {"kind": "uniform", "parts": []})
        split = IntraSplit(
            kind=SplitKind(split_rec["kind"]),
            parts=tuple(tuple(p) for p in split_rec.get("parts", [])),
        )
        start, end = _require(rec, "layers", ctx)
        stages.append(
            StageAssignment(fg_id=str(_require(rec, "fg", ctx)),
                            layer_start=int(start), layer_end=int(end),
                            intra_split=split)
        )
    return ParallelPlan(
        stages=tuple(stages),
        batch_b=int(_require(doc, "batch", str(path))),
        microbatch_m=int(_require(doc, "microbatch", str(path))),
    )


def groups_to_dict(fgs: Sequence[FirstLevelGroup],
                   sgs_by_fg: Dict[str, Sequence[SecondLevelGroup]]) -> dict:
    return {
        "schema": GROUPS_SCHEMA,
        "first_level": [
            {
                "id": fg.id,
                "members": list(fg.member_device_ids),
                "intra_metric": fg.intra_metric,
                "aggregate_capacity": fg.aggregate_capacity,
                "min_intra_bandwidth": fg.min_intra_bandwidth,
                "second_level": [
                    {
                        "id": sg.id,
                        "members": list(sg.member_device_ids),
                        "aggregate_capacity": sg.aggregate_capacity,
                    }
                    for sg in sgs_by_fg[fg.id]
                ],
            }
            for fg in fgs
        ],
    }


def read_groups(path) -> Tuple[List[FirstLevelGroup], Dict[str, List[SecondLevelGroup]]]:
    doc = _load(path)
    _check_schema(doc, GROUPS_SCHEMA, path)
    fgs = []
    sgs_by_fg: Dict[str, List[SecondLevelGroup]] = {}
    for rec in _require(doc, "first_level", str(path)):
        fg = FirstLevelGroup(
            id=rec["id"],
            member_device_ids=tuple(rec["members"]),
            intra_metric=rec.get("intra_metric"),
            aggregate_capacity=rec["aggregate_capacity"],
            min_intra_bandwidth=rec.get("min_intra_bandwidth"),
        )
        fgs.append(fg)
        sgs_by_fg[fg.id] = [
            SecondLevelGroup(
                id=s["id"], parent_fg_id=fg.id,
                member_device_ids=tuple(s["members"]),
                aggregate_capacity=s["aggregate_capacity"],
            )
            for s in rec["second_level"]
        ]
    return fgs, sgs_by_fg


def write_json(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_report(path) -> dict:
    doc = _load(path)
    _check_schema(doc, "report/v1", path)
    return doc
