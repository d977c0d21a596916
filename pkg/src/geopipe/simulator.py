"""Discrete-event simulation of a plan under a time-varying network."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .adapter import AdapterAction, AdapterConfig, DynamicBatchAdapter
from .engine import PipelineEngine, Policy, TransferRecord
from .nettrace import CONSTANT_TRACE, NetworkTrace, effective_bandwidth
from .plans import ModelSpec, ParallelPlan
from .profiling import ClusterTopology
from .schedule import Schedule, schedule_from_result
from .timing import GroupIndex, PlanTiming, build_plan_timing

__all__ = [
    "NetworkTrace", "CONSTANT_TRACE", "effective_bandwidth",
    "SimConfig", "SimReport", "simulate", "simulate_timing",
]


@dataclass(frozen=True)
class SimConfig:
    iterations: int = 3
    warmup_iterations: int = 1  # excluded from steady throughput
    opt_seconds: float = 0.0
    async_iterations: bool = False
    adapter: AdapterConfig = field(default_factory=AdapterConfig)
    seed: int = 0


@dataclass(frozen=True)
class SimReport:
    makespan: float
    throughput: float          # total samples / makespan
    steady_throughput: float   # samples per second after warm-up iterations
    bubble_fractions: Tuple[float, ...]
    adapter_actions: Tuple[AdapterAction, ...]
    transfers: Tuple[TransferRecord, ...]
    schedule: Schedule
    iteration_ends: Tuple[float, ...]
    policy: Policy
    adapter_enabled: bool
    total_samples: int

    def to_dict(self) -> dict:
        return {
            "schema": "report/v1",
            "policy": self.policy.value,
            "adapter_enabled": self.adapter_enabled,
            "makespan_s": self.makespan,
            "throughput_samples_per_s": self.throughput,
            "steady_throughput_samples_per_s": self.steady_throughput,
            "total_samples": self.total_samples,
            "bubble_fractions": list(self.bubble_fractions),
            "iteration_ends_s": list(self.iteration_ends),
            "adapter_actions": [
                {"t": a.t, "stage": a.stage, "old_size": a.old_size,
                 "new_size": a.new_size, "signal": a.signal}
                for a in self.adapter_actions
            ],
            "transfers": [
                {"link": tr.link_id, "direction": tr.direction,
                 "start": tr.start, "end": tr.end, "size": tr.size,
                 "iteration": tr.iteration, "microbatch": tr.microbatch_id}
                for tr in self.transfers
            ],
        }


def simulate_timing(
    timing: PlanTiming,
    policy: Policy,
    trace: NetworkTrace = CONSTANT_TRACE,
    adapter_enabled: bool = False,
    config: SimConfig = SimConfig(),
) -> SimReport:
    """Run the event engine and assemble a report."""
    adapter = (
        DynamicBatchAdapter(timing.num_stages, timing.microbatch,
                            config.adapter)
        if adapter_enabled else None
    )
    engine = PipelineEngine(
        timing, policy, iterations=config.iterations, trace=trace,
        adapter=adapter, async_iterations=config.async_iterations,
    )
    result = engine.run()
    schedule = schedule_from_result(result, policy, timing)
    total = timing.batch * config.iterations
    warm = min(config.warmup_iterations, config.iterations - 1)
    steady_samples = timing.batch * (config.iterations - warm)
    steady_start = result.iteration_ends[warm - 1] if warm > 0 else 0.0
    steady_span = result.makespan - steady_start
    busy = [
        sum(op.end - op.start for op in stage_ops) for stage_ops in result.ops
    ]
    bubbles = tuple(
        (result.makespan - b) / result.makespan for b in busy
    )
    return SimReport(
        makespan=result.makespan,
        throughput=total / result.makespan,
        steady_throughput=steady_samples / steady_span,
        bubble_fractions=bubbles,
        adapter_actions=tuple(adapter.actions) if adapter else (),
        transfers=tuple(result.transfers),
        schedule=schedule,
        iteration_ends=tuple(result.iteration_ends),
        policy=policy,
        adapter_enabled=adapter_enabled,
        total_samples=total,
    )


def simulate(
    plan: ParallelPlan,
    topology: ClusterTopology,
    model: ModelSpec,
    groups: GroupIndex,
    policy: Policy,
    trace: NetworkTrace = CONSTANT_TRACE,
    adapter_enabled: bool = False,
    config: SimConfig = SimConfig(),
) -> SimReport:
    timing = build_plan_timing(plan, topology, model, groups,
                               opt_seconds=config.opt_seconds)
    return simulate_timing(timing, policy, trace, adapter_enabled, config)
