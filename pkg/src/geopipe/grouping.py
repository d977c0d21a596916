"""Two-level device hierarchy built by greedy agglomerative merging.

Level one clusters devices by network capability: candidate group pairs live
in a heap keyed by their average cross-pair link metric (best link first) and
a popped pair merges only when the candidate metric is consistent with both
groups' existing internal metrics.  Level two repeats the procedure inside
each network group, keyed by relative compute-capacity difference.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import EmptyClusterError, InvalidPairError
from .profiling import ClusterTopology


@dataclass(frozen=True)
class FirstLevelGroup:
    """A network-homogeneous device group."""

    id: str
    member_device_ids: Tuple[str, ...]
    intra_metric: Optional[float]       # mean pairwise p_t; None for singletons
    aggregate_capacity: float
    min_intra_bandwidth: Optional[float]  # bytes/s; None for singletons


@dataclass(frozen=True)
class SecondLevelGroup:
    """A compute-homogeneous subgroup of a first-level group."""

    id: str
    parent_fg_id: str
    member_device_ids: Tuple[str, ...]
    aggregate_capacity: float


@dataclass(frozen=True)
class MergeRecord:
    """Audit entry for one accepted merge."""

    members_a: Tuple[str, ...]
    members_b: Tuple[str, ...]
    value_a: float
    value_b: float
    candidate_value: float
    relative_spread: float


def group_pair_metric(a: Sequence[str], b: Sequence[str], topology: ClusterTopology) -> float:
    """Arithmetic mean of p_t over all cross pairs between two disjoint groups."""
    if set(a) & set(b):
        raise InvalidPairError(f"groups overlap: {sorted(set(a) & set(b))}")
    values = [topology.p_t(u, v) for u in a for v in b]
    return sum(values) / len(values)


def _mean_intra_pt(members: Sequence[str], topology: ClusterTopology) -> Optional[float]:
    if len(members) < 2:
        return None
    vals = [topology.p_t(u, v) for u, v in itertools.combinations(sorted(members), 2)]
    return sum(vals) / len(vals)


def _min_intra_bw(members: Sequence[str], topology: ClusterTopology) -> Optional[float]:
    if len(members) < 2:
        return None
    return min(
        topology.bandwidth(u, v)
        for u, v in itertools.combinations(sorted(members), 2)
    )


def _relative_spread(values: Sequence[float]) -> float:
    top = max(values)
    if top == 0:
        return 0.0
    return (top - min(values)) / top


def _agglomerate(
    items: Sequence[str],
    pair_key,
    merge_values,
    threshold: float,
    audit: Optional[List[MergeRecord]] = None,
) -> List[Tuple[str, ...]]:
    """Generic greedy merging over groups of item ids.

    ``pair_key(a, b)`` orders candidate pairs (smallest popped first).
    ``merge_values(a, b)`` returns the capability values compared against
    ``threshold`` as a relative spread.  A popped pair that fails the
    predicate is discarded permanently.  Groups are tuples of sorted ids;
    ties break on the lexicographically smallest member id.
    """
    alive: Dict[Tuple[str, ...], None] = {
        (item,): None for item in sorted(items)
    }
    heap = []
    counter = itertools.count()

    def push_pairs(group):
        for other in alive:
            if other == group:
                continue
            a, b = sorted((group, other))
            heapq.heappush(heap, (pair_key(a, b), a, b, next(counter)))

    groups = list(alive)
    for i, a in enumerate(groups):
        for b in groups[i + 1:]:
            heapq.heappush(heap, (pair_key(a, b), a, b, next(counter)))

    while heap:
        key, a, b, _ = heapq.heappop(heap)
        if a not in alive or b not in alive:
            continue  # stale entry referencing a consumed group
        values = merge_values(a, b)
        spread = _relative_spread(values)
        if spread >= threshold:
            continue  # discarded permanently
        del alive[a]
        del alive[b]
        merged = tuple(sorted(a + b))
        if audit is not None:
            audit.append(
                MergeRecord(
                    members_a=a,
                    members_b=b,
                    value_a=values[0],
                    value_b=values[1],
                    candidate_value=values[-1],
                    relative_spread=spread,
                )
            )
        push_pairs(merged)
        alive[merged] = None

    return sorted(alive)


def group_first_level(
    topology: ClusterTopology,
    threshold: float = 0.3,
    audit: Optional[List[MergeRecord]] = None,
) -> List[FirstLevelGroup]:
    """Partition the cluster into network-homogeneous first-level groups.

    Only the surviving top-level groupings are returned; intermediate
    subgroups formed along the way are discarded.
    """
    if not topology.devices:
        raise EmptyClusterError("topology has no devices")
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")

    def pair_key(a, b):
        return group_pair_metric(a, b, topology)

    def merge_values(a, b):
        cross = group_pair_metric(a, b, topology)
        # A singleton has no internal links; its capability value is the
        # candidate cross-pair value itself.
        va = _mean_intra_pt(a, topology)
        vb = _mean_intra_pt(b, topology)
        return (
            cross if va is None else va,
            cross if vb is None else vb,
            cross,
        )

    member_sets = _agglomerate(
        topology.device_ids, pair_key, merge_values, threshold, audit
    )
    groups = []
    for idx, members in enumerate(member_sets):
        groups.append(
            FirstLevelGroup(
                id=f"fg{idx}",
                member_device_ids=members,
                intra_metric=_mean_intra_pt(members, topology),
                aggregate_capacity=sum(topology.p_c(m) for m in members),
                min_intra_bandwidth=_min_intra_bw(members, topology),
            )
        )
    return groups


def group_second_level(
    fg: FirstLevelGroup,
    topology: ClusterTopology,
    threshold: float = 0.3,
    audit: Optional[List[MergeRecord]] = None,
) -> List[SecondLevelGroup]:
    """Partition one first-level group into compute-homogeneous subgroups."""
    if not fg.member_device_ids:
        raise EmptyClusterError(f"group {fg.id} has no members")
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")

    def mean_pc(group):
        return sum(topology.p_c(m) for m in group) / len(group)

    def pair_key(a, b):
        va, vb = mean_pc(a), mean_pc(b)
        return _relative_spread((va, vb))

    def merge_values(a, b):
        return (mean_pc(a), mean_pc(b))

    member_sets = _agglomerate(
        fg.member_device_ids, pair_key, merge_values, threshold, audit
    )
    groups = []
    for idx, members in enumerate(member_sets):
        groups.append(
            SecondLevelGroup(
                id=f"{fg.id}.sg{idx}",
                parent_fg_id=fg.id,
                member_device_ids=members,
                aggregate_capacity=sum(topology.p_c(m) for m in members),
            )
        )
    return groups


def build_hierarchy(
    topology: ClusterTopology,
    threshold_net: float = 0.3,
    threshold_compute: float = 0.3,
) -> Dict[str, List[SecondLevelGroup]]:
    """Convenience wrapper: first-level groups mapped to their subgroups."""
    fgs = group_first_level(topology, threshold_net)
    return {
        fg.id: group_second_level(fg, topology, threshold_compute) for fg in fgs
    }


def hierarchy_dot(topology: ClusterTopology, fgs: Sequence[FirstLevelGroup],
                  sgs_by_fg: Dict[str, List[SecondLevelGroup]]) -> str:
    """Render the hierarchy as a DOT graph for inspection."""
    lines = ["graph cluster_hierarchy {", "  compound=true;"]
    for fg in fgs:
        lines.append(f'  subgraph "cluster_{fg.id}" {{')
        lines.append(f'    label="{fg.id}";')
        for sg in sgs_by_fg[fg.id]:
            lines.append(f'    subgraph "cluster_{sg.id}" {{')
            lines.append(f'      label="{sg.id}";')
            for m in sg.member_device_ids:
                lines.append(f'      "{m}" [label="{m}\\np_c={topology.p_c(m):.3g}"];')
            lines.append("    }")
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines)
