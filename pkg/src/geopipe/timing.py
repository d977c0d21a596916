"""Derive concrete per-stage and per-boundary timing from a plan.

This is the single place where a plan, a cluster topology, and a model are
turned into seconds: stage compute durations (per sample, split into forward,
input-gradient, and weight-gradient work), inter-stage transfer parameters on
the gateway link between consecutive groups, and intra-group collective
costs.  Both the cost model and the event engine consume the result, which
keeps the estimator and the simulation consistent by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from .errors import DegenerateGroupError, InvalidTopologyError
from .grouping import FirstLevelGroup, SecondLevelGroup
from .plans import (
    ModelSpec,
    ParallelPlan,
    SplitKind,
    stage_layers,
    stage_param_bytes,
)
from .profiling import ClusterTopology


@dataclass(frozen=True)
class GroupIndex:
    """Lookup tables for the grouping hierarchy."""

    fgs: Dict[str, FirstLevelGroup]
    sgs: Dict[str, SecondLevelGroup]
    sgs_by_fg: Dict[str, Tuple[SecondLevelGroup, ...]]

    @staticmethod
    def build(fgs: Sequence[FirstLevelGroup],
              sgs_by_fg: Dict[str, Sequence[SecondLevelGroup]]) -> "GroupIndex":
        sgs = {sg.id: sg for sgs in sgs_by_fg.values() for sg in sgs}
        return GroupIndex(
            fgs={fg.id: fg for fg in fgs},
            sgs=sgs,
            sgs_by_fg={k: tuple(v) for k, v in sgs_by_fg.items()},
        )


@dataclass(frozen=True)
class StageTiming:
    """Seconds of compute per sample, plus per-iteration closing costs."""

    fwd_per_sample: float
    bwd_per_sample: float
    wgt_per_sample: float
    al_seconds: float        # intra-group collective cost, once per iteration
    sync_seconds: float      # weight synchronization closing the iteration
    opt_seconds: float
    effective_capacity: float


@dataclass(frozen=True)
class BoundaryTiming:
    """The gateway link carrying activations/gradients between two stages."""

    link_id: str
    latency_seconds: float
    bandwidth_bytes_per_s: float
    act_bytes_per_sample: float
    grad_bytes_per_sample: float


@dataclass(frozen=True)
class PlanTiming:
    stages: Tuple[StageTiming, ...]
    boundaries: Tuple[BoundaryTiming, ...]  # len == num_stages - 1
    batch: int
    microbatch: int

    @property
    def num_stages(self) -> int:
        return len(self.stages)

    def fwd_seconds(self, s: int, size: int) -> float:
        return self.stages[s].fwd_per_sample * size

    def bwd_seconds(self, s: int, size: int) -> float:
        return self.stages[s].bwd_per_sample * size

    def wgt_seconds(self, s: int, size: int) -> float:
        return self.stages[s].wgt_per_sample * size

    def transfer_seconds(self, boundary: int, bytes_count: float) -> float:
        b = self.boundaries[boundary]
        return b.latency_seconds + bytes_count / b.bandwidth_bytes_per_s

    def act_transfer_seconds(self, boundary: int, size: int) -> float:
        b = self.boundaries[boundary]
        return self.transfer_seconds(boundary, b.act_bytes_per_sample * size)

    def grad_transfer_seconds(self, boundary: int, size: int) -> float:
        b = self.boundaries[boundary]
        return self.transfer_seconds(boundary, b.grad_bytes_per_sample * size)


def gateway_link(fg_a: FirstLevelGroup, fg_b: FirstLevelGroup,
                 topology: ClusterTopology) -> Tuple[str, str]:
    """The cross-group device pair with the best link metric."""
    best = None
    for u in fg_a.member_device_ids:
        for v in fg_b.member_device_ids:
            key = (topology.p_t(u, v), u, v)
            if best is None or key < best:
                best = key
    return best[1], best[2]


def effective_capacity(stage, groups: GroupIndex, model: ModelSpec,
                       layers) -> float:
    """Aggregate compute capacity of a stage's group under its intra split.

    DP/TP-style splits use the summed capacity of the group.  An asymmetric
    sub-pipeline is throughput-bound by its slowest sub-stage, giving
    ``min_j(capacity_j / flop_fraction_j)``.
    """
    fg = groups.fgs[stage.fg_id]
    if stage.intra_split.kind is SplitKind.ASYMMETRIC_PP:
        total = sum(l.total_flops for l in layers)
        best = None
        for sg_id, start, end in stage.intra_split.parts:
            sub = sum(
                model.layers[i].total_flops for i in range(start, end)
            )
            frac = sub / total
            cap = groups.sgs[sg_id].aggregate_capacity
            if frac > 0:
                val = cap / frac
                best = val if best is None else min(best, val)
        if best is None:
            raise DegenerateGroupError(f"stage on {fg.id}: empty sub-pipeline")
        return best
    cap = fg.aggregate_capacity
    if cap <= 0:
        raise DegenerateGroupError(f"group {fg.id} has zero capacity")
    return cap


def collective_volume(plan: ParallelPlan, model: ModelSpec, s: int,
                      groups: GroupIndex) -> float:
    """Bytes synchronized inside the stage's group once per iteration.

    Gradient rings move twice the parameter bytes; a tensor-split stage
    additionally exchanges one micro-batch of boundary activations.
    """
    stage = plan.stages[s]
    fg = groups.fgs[stage.fg_id]
    if len(fg.member_device_ids) < 2:
        return 0.0
    params = stage_param_bytes(plan, model, s)
    volume = 2.0 * params
    if stage.intra_split.kind is SplitKind.ASYMMETRIC_TP_DP:
        boundary_act = model.layers[stage.layer_end - 1].activation_out_bytes
        volume += boundary_act * plan.microbatch_m
    return volume


def intra_group_seconds(volume: float, fg: FirstLevelGroup) -> float:
    """Collective time ``V / min(bandwidth)`` within a first-level group."""
    if volume == 0.0:
        return 0.0
    if fg.min_intra_bandwidth is None:
        return 0.0  # singleton group: no collective needed
    if fg.min_intra_bandwidth <= 0:
        raise InvalidTopologyError(f"group {fg.id} has a zero-bandwidth link")
    return volume / fg.min_intra_bandwidth


def build_plan_timing(
    plan: ParallelPlan,
    topology: ClusterTopology,
    model: ModelSpec,
    groups: GroupIndex,
    opt_seconds: float = 0.0,
) -> PlanTiming:
    if plan.num_layers != model.num_layers:
        raise InvalidTopologyError(
            f"plan covers {plan.num_layers} layers, model has {model.num_layers}"
        )
    stages: List[StageTiming] = []
    for s, stage in enumerate(plan.stages):
        layers = stage_layers(plan, model, s)
        cap = effective_capacity(stage, groups, model, layers)
        fg = groups.fgs[stage.fg_id]
        volume = collective_volume(plan, model, s, groups)
        al = intra_group_seconds(volume, fg)
        params = stage_param_bytes(plan, model, s)
        sync = intra_group_seconds(params, fg)
        stages.append(
            StageTiming(
                fwd_per_sample=sum(l.fwd_flops for l in layers) / cap,
                bwd_per_sample=sum(l.bwd_input_flops for l in layers) / cap,
                wgt_per_sample=sum(l.bwd_weight_flops for l in layers) / cap,
                al_seconds=al,
                sync_seconds=sync,
                opt_seconds=opt_seconds,
                effective_capacity=cap,
            )
        )

    boundaries: List[BoundaryTiming] = []
    for i in range(plan.num_stages - 1):
        fg_a = groups.fgs[plan.stages[i].fg_id]
        fg_b = groups.fgs[plan.stages[i + 1].fg_id]
        u, v = gateway_link(fg_a, fg_b, topology)
        link = topology.link(u, v)
        if link.bandwidth_bytes_per_s <= 0:
            raise InvalidTopologyError(f"gateway link {u}-{v} has zero bandwidth")
        act = model.layers[plan.stages[i].layer_end - 1].activation_out_bytes
        boundaries.append(
            BoundaryTiming(
                link_id=f"{i}-{i + 1}",
                latency_seconds=link.latency_seconds,
                bandwidth_bytes_per_s=link.bandwidth_bytes_per_s,
                act_bytes_per_sample=act,
                grad_bytes_per_sample=act,
            )
        )
    return PlanTiming(
        stages=tuple(stages),
        boundaries=tuple(boundaries),
        batch=plan.batch_b,
        microbatch=plan.microbatch_m,
    )
