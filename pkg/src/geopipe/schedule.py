"""Pipeline schedules: generation under four policies, validation, analysis."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .engine import EngineResult, OpKind, PipeOp, PipelineEngine, Policy
from .errors import InvalidTimingError
from .timing import BoundaryTiming, PlanTiming, StageTiming


@dataclass(frozen=True)
class Schedule:
    """Per-stage ordered operation lists for one or more iterations."""

    ops: Tuple[Tuple[PipeOp, ...], ...]
    makespan: float
    policy: Policy
    num_stages: int
    micro_count: int

    def stage_ops(self, s: int) -> Tuple[PipeOp, ...]:
        return self.ops[s]


def make_timing(
    fwd: Sequence[float],
    bwd: Sequence[float],
    wgt: Sequence[float],
    transfer: Sequence[float],
    microbatch: int = 1,
    micro_count: int = 1,
    sync: Optional[Sequence[float]] = None,
    opt: Optional[Sequence[float]] = None,
    latency: float = 0.0,
) -> PlanTiming:
    """Build a PlanTiming directly from per-micro-batch durations.

    ``transfer`` gives the activation/gradient transfer seconds per
    micro-batch at each boundary; handy for fixtures that do not want to go
    through a topology.
    """
    S = len(fwd)
    if not (len(bwd) == len(wgt) == S) or len(transfer) != S - 1:
        raise InvalidTimingError("timing vectors have inconsistent lengths")
    sync = sync or [0.0] * S
    opt = opt or [0.0] * S
    stages = tuple(
        StageTiming(
            fwd_per_sample=fwd[s] / microbatch,
            bwd_per_sample=bwd[s] / microbatch,
            wgt_per_sample=wgt[s] / microbatch,
            al_seconds=sync[s],
            sync_seconds=sync[s],
            opt_seconds=opt[s],
            effective_capacity=1.0,
        )
        for s in range(S)
    )
    boundaries = tuple(
        BoundaryTiming(
            link_id=f"{i}-{i + 1}",
            latency_seconds=latency,
            # Express the requested per-micro-batch transfer as bytes over a
            # unit-bandwidth link so traces can still scale it.
            bandwidth_bytes_per_s=1.0,
            act_bytes_per_sample=max(transfer[i] - latency, 0.0) / microbatch,
            grad_bytes_per_sample=max(transfer[i] - latency, 0.0) / microbatch,
        )
        for i in range(S - 1)
    )
    return PlanTiming(stages=stages, boundaries=boundaries,
                      batch=microbatch * micro_count, microbatch=microbatch)


def generate_schedule(timing: PlanTiming, policy: Policy,
                      iterations: int = 1) -> Schedule:
    """Run the deterministic event engine with static link timing."""
    result = PipelineEngine(timing, policy, iterations=iterations).run()
    return schedule_from_result(result, policy, timing)


def schedule_from_result(result: EngineResult, policy: Policy,
                         timing: PlanTiming) -> Schedule:
    return Schedule(
        ops=tuple(tuple(stage_ops) for stage_ops in result.ops),
        makespan=result.makespan,
        policy=policy,
        num_stages=timing.num_stages,
        micro_count=timing.batch // timing.microbatch,
    )


def validate_schedule(schedule: Schedule, timing: PlanTiming,
                      tol: float = 1e-9) -> List[str]:
    """Check dependency and resource rules; returns a list of violations.

    Transfer arrivals are lower-bounded by latency plus bytes over the base
    bandwidth, so the check is valid for any link contention the generator
    may have added on top.

    ``tol`` is relative: it is scaled by the makespan so the checks stay
    meaningful at any time scale.
    """
    tol = tol * max(1.0, schedule.makespan)
    violations: List[str] = []
    index: Dict[Tuple[int, int, OpKind, int], PipeOp] = {}
    for s in range(schedule.num_stages):
        for op in schedule.stage_ops(s):
            if op.end < op.start - tol:
                violations.append(f"stage {s}: op {op.kind.value} ends before it starts")
            if op.microbatch_id is not None:
                index[(s, op.iteration, op.kind, op.microbatch_id)] = op

    for s in range(schedule.num_stages):
        prev_end = None
        for op in sorted(schedule.stage_ops(s), key=lambda o: (o.start, o.end)):
            if prev_end is not None and op.start < prev_end - tol:
                violations.append(
                    f"stage {s}: ops overlap at t={op.start:.6g}")
            prev_end = max(prev_end or op.end, op.end)

    for (s, it, kind, k), op in index.items():
        if kind is OpKind.FORWARD and s > 0:
            up = index.get((s - 1, it, OpKind.FORWARD, k))
            if up is not None:
                arrival = up.end + timing.act_transfer_seconds(s - 1, op.size)
                if op.start < arrival - tol:
                    violations.append(
                        f"F(stage {s}, mb {k}, iter {it}) starts before its "
                        f"activation arrives")
        if kind is OpKind.BACKWARD:
            f = index.get((s, it, OpKind.FORWARD, k))
            if f is not None and op.start < f.end - tol:
                violations.append(
                    f"B(stage {s}, mb {k}, iter {it}) starts before F ends")
            if s < schedule.num_stages - 1:
                down = index.get((s + 1, it, OpKind.BACKWARD, k))
                if down is not None:
                    arrival = down.end + timing.grad_transfer_seconds(s, op.size)
                    if op.start < arrival - tol:
                        violations.append(
                            f"B(stage {s}, mb {k}, iter {it}) starts before "
                            f"its gradient arrives")
        if kind is OpKind.WEIGHT_UPDATE:
            b = index.get((s, it, OpKind.BACKWARD, k))
            if b is not None and op.start < b.end - tol:
                violations.append(
                    f"W(stage {s}, mb {k}, iter {it}) starts before B ends")

    for s in range(schedule.num_stages):
        by_iter: Dict[int, List[PipeOp]] = {}
        for op in schedule.stage_ops(s):
            by_iter.setdefault(op.iteration, []).append(op)
        for it, stage_ops in by_iter.items():
            syncs = [o for o in stage_ops if o.kind is OpKind.WEIGHT_SYNC]
            opts = [o for o in stage_ops if o.kind is OpKind.OPTIMIZER_STEP]
            ws = [o for o in stage_ops if o.kind is OpKind.WEIGHT_UPDATE]
            if len(syncs) != 1 or len(opts) != 1:
                violations.append(
                    f"stage {s} iter {it}: expected one sync and one optimizer")
                continue
            last_w = max((w.end for w in ws), default=0.0)
            if syncs[0].start < last_w - tol:
                violations.append(
                    f"stage {s} iter {it}: sync starts before last weight update")
            if opts[0].start < syncs[0].end - tol:
                violations.append(
                    f"stage {s} iter {it}: optimizer starts before sync ends")
    return violations


def bubble_fraction(schedule: Schedule) -> List[float]:
    """Per-stage idle fraction of the makespan."""
    if schedule.makespan <= 0:
        raise ValueError("makespan must be positive")
    fractions = []
    for s in range(schedule.num_stages):
        busy = sum(op.end - op.start for op in schedule.stage_ops(s))
        fractions.append((schedule.makespan - busy) / schedule.makespan)
    return fractions
