"""Per-stage pipeline cost estimator.

A stage's cost combines four terms: the fill cost contributed by its
predecessors (one micro-batch of compute plus the activation transfer at each
earlier boundary), the run cost (micro-batch count times per-micro-batch
compute), the residual latency of transfers that compute cannot hide, and the
intra-group collective time.  The plan cost is the maximum over stages, which
the planner minimizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

from .grouping import FirstLevelGroup
from .plans import ModelSpec, ParallelPlan
from .profiling import ClusterTopology
from .timing import (
    GroupIndex,
    PlanTiming,
    build_plan_timing,
    intra_group_seconds,
)


@dataclass(frozen=True)
class StageCost:
    fill_seconds: float
    run_seconds: float
    residual_seconds: float
    collective_seconds: float

    @property
    def total(self) -> float:
        return (self.fill_seconds + self.run_seconds
                + self.residual_seconds + self.collective_seconds)


@dataclass(frozen=True)
class CostBreakdown:
    per_stage: Tuple[StageCost, ...]
    plan_cost: float


def residual_latency(t_comm: float, t_lap: float) -> float:
    """Communication time left over after overlapping with compute."""
    return max(0.0, t_comm - t_lap)


def intra_group_comm(volume_bytes: float, fg: FirstLevelGroup) -> float:
    """Collective time for one iteration's DP/TP synchronization."""
    return intra_group_seconds(volume_bytes, fg)


def stage_compute_time(timing: PlanTiming, s: int) -> float:
    """Compute seconds for one micro-batch on stage ``s`` (F + B + W)."""
    st = timing.stages[s]
    per_sample = st.fwd_per_sample + st.bwd_per_sample + st.wgt_per_sample
    return per_sample * timing.microbatch


def boundary_transfer_time(timing: PlanTiming, i: int) -> float:
    """One micro-batch's activation transfer across boundary ``i``."""
    return timing.act_transfer_seconds(i, timing.microbatch)


def stage_cost(timing: PlanTiming, s: int) -> StageCost:
    micro_count = timing.batch // timing.microbatch
    fill = 0.0
    residual = 0.0
    for i in range(s):
        transfer = boundary_transfer_time(timing, i)
        fill += stage_compute_time(timing, i) + transfer
        residual += residual_latency(transfer, stage_compute_time(timing, i + 1))
    return StageCost(
        fill_seconds=fill,
        run_seconds=micro_count * stage_compute_time(timing, s),
        residual_seconds=residual,
        collective_seconds=timing.stages[s].al_seconds,
    )


def plan_cost_from_timing(timing: PlanTiming) -> CostBreakdown:
    per_stage = tuple(stage_cost(timing, s) for s in range(timing.num_stages))
    return CostBreakdown(
        per_stage=per_stage,
        plan_cost=max(c.total for c in per_stage),
    )


def plan_cost(
    plan: ParallelPlan,
    topology: ClusterTopology,
    model: ModelSpec,
    groups: GroupIndex,
    opt_seconds: float = 0.0,
) -> CostBreakdown:
    timing = build_plan_timing(plan, topology, model, groups, opt_seconds)
    return plan_cost_from_timing(timing)


def breakdown_table(breakdown: CostBreakdown) -> str:
    """Human-readable per-stage table."""
    header = f"{'stage':>5} {'fill_s':>12} {'run_s':>12} {'residual_s':>12} {'collective_s':>13} {'total_s':>12}"
    rows = [header]
    for s, c in enumerate(breakdown.per_stage):
        rows.append(
            f"{s:>5} {c.fill_seconds:>12.6g} {c.run_seconds:>12.6g} "
            f"{c.residual_seconds:>12.6g} {c.collective_seconds:>13.6g} {c.total:>12.6g}"
        )
    rows.append(f"plan cost: {breakdown.plan_cost:.6g} s")
    return "\n".join(rows)
