"""Parallel-plan search: beam search over stage orders and layer cuts,
plus second-level asymmetric splitting inside each first-level group."""

from __future__ import annotations

import itertools
import logging
import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .costmodel import CostBreakdown, plan_cost
from .errors import (
    FactorizationError,
    InfeasibleSplitError,
    NoFeasiblePlanError,
)
from .grouping import FirstLevelGroup
from .plans import (
    IntraSplit,
    ModelSpec,
    ParallelPlan,
    SplitKind,
    StageAssignment,
    stage_param_bytes,
)
from .profiling import ClusterTopology
from .timing import GroupIndex

log = logging.getLogger(__name__)

INFEASIBLE = math.inf


@dataclass(frozen=True)
class Candidate:
    """A stage order plus per-stage layer counts."""

    order: Tuple[str, ...]
    counts: Tuple[int, ...]


@dataclass(frozen=True)
class SearchConfig:
    seed: int
    beam_width: int = 8
    max_iter: int = 20
    bottleneck_factor: float = 1.25  # sub-stage imbalance triggering TP/DP
    opt_seconds: float = 0.0

    def __post_init__(self):
        if self.beam_width < 1 or self.max_iter < 1:
            raise ValueError("beam_width and max_iter must be >= 1")


@dataclass
class SearchResult:
    plan: ParallelPlan
    breakdown: CostBreakdown
    best_cost_trace: List[float]  # incumbent best after each beam iteration
    evaluated: int


def proportional_split(total: int, weights: Sequence[float],
                       minimum: int = 0) -> List[int]:
    """Integer shares proportional to weights via largest-remainder rounding."""
    wsum = sum(weights)
    raw = [total * w / wsum for w in weights]
    shares = [int(math.floor(r)) for r in raw]
    remainders = [r - s for r, s in zip(raw, shares)]
    leftover = total - sum(shares)
    for idx in sorted(range(len(weights)),
                      key=lambda i: (-remainders[i], i))[:leftover]:
        shares[idx] += 1
    if minimum > 0:
        # Steal from the largest shares to honor the floor.
        for i in range(len(shares)):
            while shares[i] < minimum:
                donor = max(range(len(shares)), key=lambda j: shares[j])
                if shares[donor] <= minimum:
                    raise InfeasibleSplitError(
                        f"cannot give {minimum} unit(s) to each of "
                        f"{len(shares)} parts out of {total}")
                shares[donor] -= 1
                shares[i] += 1
    return shares


def split_asymmetric_pp(layer_start: int, layer_end: int,
                        sg_ids: Sequence[str],
                        capacities: Sequence[float]) -> List[Tuple[str, int, int]]:
    """Contiguous sub-ranges proportional to sub-group capacities."""
    n = layer_end - layer_start
    if len(sg_ids) > n:
        raise InfeasibleSplitError(
            f"{len(sg_ids)} sub-groups cannot split {n} layers")
    counts = proportional_split(n, capacities, minimum=1)
    out = []
    pos = layer_start
    for sg_id, c in zip(sg_ids, counts):
        out.append((sg_id, pos, pos + c))
        pos += c
    return out


def split_asymmetric_dp(capacities: Sequence[float]) -> List[float]:
    """Data fractions proportional to unit capacities, summing to 1."""
    total = sum(capacities)
    fractions = [c / total for c in capacities]
    # Force exact unit sum despite float rounding.
    fractions[-1] = 1.0 - sum(fractions[:-1])
    return fractions


def split_asymmetric_tp_dp(
    capacities: Sequence[float],
    tensor_shape: Optional[Tuple[float, float]] = None,
    rel_tol: float = 1e-9,
) -> List[Tuple[float, float]]:
    """Rank-1 grid tiles matching device capacity ratios.

    Devices fill the grid column by column; tile (i, j) spans
    ``row_i / sum(rows)`` of the first dimension and ``col_j / sum(cols)``
    of the second.  Raises FactorizationError when the ratios admit no grid
    with both dimensions >= 2 (the planner then falls back to data splitting).
    """
    n = len(capacities)
    shapes = sorted(
        ((r, n // r) for r in range(2, n) if n % r == 0 and n // r >= 2),
        key=lambda rc: abs(rc[0] - rc[1]),
    )
    for r, c in shapes:
        grid = [[capacities[j * r + i] for j in range(c)] for i in range(r)]
        ok = all(
            math.isclose(grid[i][j] * grid[0][0], grid[i][0] * grid[0][j],
                         rel_tol=rel_tol)
            for i in range(r) for j in range(c)
        )
        if not ok:
            continue
        rows = [grid[i][0] for i in range(r)]
        cols = [grid[0][j] for j in range(c)]
        rsum, csum = sum(rows), sum(cols)
        tiles = []
        for k in range(n):
            i, j = k % r, k // r
            tiles.append((rows[i] / rsum, cols[j] / csum))
        if tensor_shape is not None:
            b, t = tensor_shape
            tiles = [(b * rf, t * cf) for rf, cf in tiles]
        return tiles
    raise FactorizationError(
        f"capacity ratios {list(capacities)} admit no rank-1 grid")


def choose_intra_split(
    fg: FirstLevelGroup,
    groups: GroupIndex,
    topology: ClusterTopology,
    model: ModelSpec,
    layer_start: int,
    layer_end: int,
    bottleneck_factor: float = 1.25,
) -> IntraSplit:
    """Deterministic second-level strategy selection for one stage.

    Try the asymmetric sub-pipeline first; when a sub-group would bottleneck
    it or sub-groups outnumber layers, try the tensor/data grid; otherwise
    fall back to asymmetric data splitting.
    """
    sgs = groups.sgs_by_fg[fg.id]
    if len(fg.member_device_ids) == 1 or len(sgs) == 1:
        return IntraSplit(SplitKind.UNIFORM)
    caps = [sg.aggregate_capacity for sg in sgs]
    try:
        parts = split_asymmetric_pp(
            layer_start, layer_end, [sg.id for sg in sgs], caps)
        times = []
        for (sg_id, a, b), cap in zip(parts, caps):
            flops = sum(model.layers[i].total_flops for i in range(a, b))
            times.append(flops / cap)
        mean = sum(times) / len(times)
        if max(times) <= bottleneck_factor * mean:
            return IntraSplit(SplitKind.ASYMMETRIC_PP, tuple(parts))
    except InfeasibleSplitError:
        pass
    device_caps = [topology.p_c(d) for d in fg.member_device_ids]
    try:
        tiles = split_asymmetric_tp_dp(device_caps)
        parts = tuple(
            (d, rf, cf)
            for d, (rf, cf) in zip(fg.member_device_ids, tiles)
        )
        return IntraSplit(SplitKind.ASYMMETRIC_TP_DP, parts)
    except FactorizationError:
        pass
    fractions = split_asymmetric_dp(caps)
    parts = tuple((sg.id, f) for sg, f in zip(sgs, fractions))
    return IntraSplit(SplitKind.ASYMMETRIC_DP, parts)


def build_plan(
    candidate: Candidate,
    batch_b: int,
    microbatch_m: int,
    groups: GroupIndex,
    topology: ClusterTopology,
    model: ModelSpec,
    bottleneck_factor: float = 1.25,
) -> ParallelPlan:
    stages = []
    pos = 0
    for fg_id, count in zip(candidate.order, candidate.counts):
        fg = groups.fgs[fg_id]
        split = choose_intra_split(
            fg, groups, topology, model, pos, pos + count, bottleneck_factor)
        stages.append(StageAssignment(fg_id=fg_id, layer_start=pos,
                                      layer_end=pos + count,
                                      intra_split=split))
        pos += count
    return ParallelPlan(stages=tuple(stages), batch_b=batch_b,
                        microbatch_m=microbatch_m)


def assigned_param_bytes(plan: ParallelPlan, model: ModelSpec,
                         groups: GroupIndex) -> Dict[str, float]:
    """Parameter bytes each device must hold under the plan's splits."""
    assigned: Dict[str, float] = {}
    for s, stage in enumerate(plan.stages):
        fg = groups.fgs[stage.fg_id]
        params = stage_param_bytes(plan, model, s)
        split = stage.intra_split
        if split.kind is SplitKind.ASYMMETRIC_PP:
            for sg_id, a, b in split.parts:
                sub = sum(model.layers[i].param_bytes for i in range(a, b))
                for d in groups.sgs[sg_id].member_device_ids:
                    assigned[d] = assigned.get(d, 0.0) + sub
        elif split.kind is SplitKind.ASYMMETRIC_TP_DP:
            for d, rf, cf in split.parts:
                assigned[d] = assigned.get(d, 0.0) + params * rf * cf
        else:
            for d in fg.member_device_ids:
                assigned[d] = assigned.get(d, 0.0) + params
    return assigned


def memory_feasible(plan: ParallelPlan, model: ModelSpec,
                    groups: GroupIndex, topology: ClusterTopology) -> bool:
    for device_id, bytes_needed in assigned_param_bytes(plan, model, groups).items():
        if bytes_needed > topology.device(device_id).memory_bytes:
            return False
    return True


def initial_candidates(model: ModelSpec, fgs: Sequence[FirstLevelGroup],
                       l: int, seed: int) -> List[Candidate]:
    """Random group permutations with capacity-proportional cuts, jittered."""
    if len(fgs) > model.num_layers:
        raise InfeasibleSplitError(
            f"{len(fgs)} groups cannot each take a layer of "
            f"{model.num_layers}")
    rng = random.Random(seed)
    ids = sorted(fg.id for fg in fgs)
    caps = {fg.id: fg.aggregate_capacity for fg in fgs}
    out = []
    for i in range(l):
        order = list(ids)
        rng.shuffle(order)
        counts = proportional_split(
            model.num_layers, [caps[f] for f in order], minimum=1)
        if i > 0 and len(counts) > 1:
            # Jittered variant: nudge one layer across a random boundary.
            j = rng.randrange(len(counts) - 1)
            if rng.random() < 0.5 and counts[j] > 1:
                counts[j] -= 1
                counts[j + 1] += 1
            elif counts[j + 1] > 1:
                counts[j + 1] -= 1
                counts[j] += 1
        out.append(Candidate(order=tuple(order), counts=tuple(counts)))
    return out


def expand_candidates(cands: Sequence[Candidate],
                      rng: random.Random) -> List[Candidate]:
    """Each candidate, one random stage transposition, and every +-1 cut shift."""
    seen = {}
    for cand in cands:
        variants = [cand]
        k = len(cand.order)
        if k > 1:
            i, j = rng.sample(range(k), 2)
            order = list(cand.order)
            order[i], order[j] = order[j], order[i]
            variants.append(Candidate(order=tuple(order), counts=cand.counts))
        for b in range(k - 1):
            if cand.counts[b] > 1:
                counts = list(cand.counts)
                counts[b] -= 1
                counts[b + 1] += 1
                variants.append(Candidate(cand.order, tuple(counts)))
            if cand.counts[b + 1] > 1:
                counts = list(cand.counts)
                counts[b + 1] -= 1
                counts[b] += 1
                variants.append(Candidate(cand.order, tuple(counts)))
        for v in variants:
            seen.setdefault((v.order, v.counts), v)
    return list(seen.values())


def _evaluate(candidate: Candidate, b: int, m: int, groups: GroupIndex,
              topology: ClusterTopology, model: ModelSpec,
              config: SearchConfig, cache: dict):
    key = (candidate.order, candidate.counts, b, m)
    if key not in cache:
        plan = build_plan(candidate, b, m, groups, topology, model,
                          config.bottleneck_factor)
        if not memory_feasible(plan, model, groups, topology):
            log.warning("plan %s exceeds device memory; penalized", key)
            cache[key] = (INFEASIBLE, plan, None)
        else:
            breakdown = plan_cost(plan, topology, model, groups,
                                  config.opt_seconds)
            cache[key] = (breakdown.plan_cost, plan, breakdown)
    return cache[key]


def search_plan(
    model: ModelSpec,
    topology: ClusterTopology,
    groups: GroupIndex,
    config: SearchConfig,
) -> SearchResult:
    """Beam search over (batch, micro-batch, stage order, layer cuts).

    The best plan is tracked globally across all (batch, micro-batch)
    combinations; infeasible combinations are skipped with a warning.
    """
    fgs = sorted(groups.fgs.values(), key=lambda g: g.id)
    cache: dict = {}
    best = None  # (cost, encoding, plan, breakdown)
    trace: List[float] = []
    for b in model.global_batch_candidates:
        for m in model.microbatch_candidates:
            rng = random.Random(f"{config.seed}:{b}:{m}")
            beam = initial_candidates(model, fgs, config.beam_width,
                                      rng.randrange(2 ** 30))
            incumbent = math.inf
            for _ in range(config.max_iter):
                expanded = expand_candidates(beam, rng)
                scored = []
                for cand in expanded:
                    cost, plan, breakdown = _evaluate(
                        cand, b, m, groups, topology, model, config, cache)
                    scored.append((cost, (cand.order, cand.counts), cand,
                                   plan, breakdown))
                scored.sort(key=lambda x: (x[0], x[1]))
                beam = [x[2] for x in scored[:config.beam_width]]
                top = scored[0]
                incumbent = min(incumbent, top[0])
                if best is None or (top[0], top[1]) < (best[0], best[1]):
                    best = (top[0], top[1], top[3], top[4])
                trace.append(min(incumbent, best[0]))
            if incumbent == math.inf:
                log.warning("no feasible plan for batch=%d micro=%d", b, m)
    if best is None or best[0] == INFEASIBLE or best[3] is None:
        raise NoFeasiblePlanError("all (batch, micro-batch) pairs infeasible")
    return SearchResult(plan=best[2], breakdown=best[3],
                        best_cost_trace=trace, evaluated=len(cache))


def exhaustive_plan(
    model: ModelSpec,
    topology: ClusterTopology,
    groups: GroupIndex,
    config: SearchConfig,
) -> SearchResult:
    """Enumerate every permutation, cut placement, and (b, m) pair.

    Only tractable on tiny instances; used as the optimality oracle.
    """
    fg_ids = sorted(groups.fgs)
    n = model.num_layers
    cache: dict = {}
    best = None
    count = 0
    for b in model.global_batch_candidates:
        for m in model.microbatch_candidates:
            for order in itertools.permutations(fg_ids):
                for cuts in _compositions(n, len(order)):
                    cand = Candidate(order=order, counts=cuts)
                    cost, plan, breakdown = _evaluate(
                        cand, b, m, groups, topology, model, config, cache)
                    count += 1
                    key = (cost, (order, cuts))
                    if best is None or key < (best[0], best[1]):
                        best = (cost, (order, cuts), plan, breakdown)
    if best is None or best[3] is None:
        raise NoFeasiblePlanError("no feasible plan in exhaustive sweep")
    return SearchResult(plan=best[2], breakdown=best[3],
                        best_cost_trace=[best[0]], evaluated=count)


def _compositions(total: int, parts: int):
    """All orderings of ``total`` into ``parts`` positive integers."""
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest
