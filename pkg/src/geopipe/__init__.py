"""Planner and simulator for pipelined training across heterogeneous,
geo-distributed device fleets."""

from .adapter import (
    AdapterAction,
    AdapterConfig,
    DynamicBatchAdapter,
    MonitorWindow,
    Phase,
    Signal,
)
from .costmodel import CostBreakdown, StageCost, plan_cost, plan_cost_from_timing
from .engine import OpKind, PipeOp, PipelineEngine, Policy, TransferRecord
from .errors import (
    GeopipeError,
    InfeasibleSplitError,
    InputFileError,
    NoFeasiblePlanError,
    SchedulingBugError,
)
from .grouping import (
    FirstLevelGroup,
    SecondLevelGroup,
    build_hierarchy,
    group_first_level,
    group_second_level,
)
from .nettrace import CONSTANT_TRACE, NetworkTrace, effective_bandwidth
from .planner import SearchConfig, SearchResult, exhaustive_plan, search_plan
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
    comm_capability,
    compute_capacity,
)
from .schedule import (
    Schedule,
    bubble_fraction,
    generate_schedule,
    make_timing,
    validate_schedule,
)
from .simulator import SimConfig, SimReport, simulate, simulate_timing
from .timing import GroupIndex, PlanTiming, build_plan_timing

__version__ = "0.1.0"

__all__ = [
    "AdapterAction", "AdapterConfig", "DynamicBatchAdapter", "MonitorWindow",
    "Phase", "Signal",
    "CostBreakdown", "StageCost", "plan_cost", "plan_cost_from_timing",
    "OpKind", "PipeOp", "PipelineEngine", "Policy", "TransferRecord",
    "GeopipeError", "InfeasibleSplitError", "InputFileError",
    "NoFeasiblePlanError", "SchedulingBugError",
    "FirstLevelGroup", "SecondLevelGroup", "build_hierarchy",
    "group_first_level", "group_second_level",
    "CONSTANT_TRACE", "NetworkTrace", "effective_bandwidth",
    "SearchConfig", "SearchResult", "exhaustive_plan", "search_plan",
    "IntraSplit", "LayerSpec", "ModelSpec", "ParallelPlan", "SplitKind",
    "StageAssignment",
    "ClusterTopology", "DeviceSpec", "LinkMeasurement", "build_topology",
    "comm_capability", "compute_capacity",
    "Schedule", "bubble_fraction", "generate_schedule", "make_timing",
    "validate_schedule",
    "SimConfig", "SimReport", "simulate", "simulate_timing",
    "GroupIndex", "PlanTiming", "build_plan_timing",
]
