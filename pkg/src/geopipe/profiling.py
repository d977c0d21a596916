"""Device and network capability metrics, and cluster topology assembly.

Measurements arrive from input files or test fixtures; nothing here touches
real hardware.  The communication metric combines a large-payload transfer
time with a small-payload time, ``p_t = alpha + beta / m`` (lower is a better
link).  The compute metric is a weighted sum of benchmark rates,
``p_c = sum_i w_i / t_i`` (higher is a faster device).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from .errors import (
    EmptyClusterError,
    IncompleteTopologyError,
    InvalidBenchmarkError,
    InvalidMeasurementError,
)


@dataclass(frozen=True)
class DeviceSpec:
    """A single compute device with its benchmark samples."""

    id: str
    memory_bytes: float
    benchmark_times: Tuple[Tuple[str, float], ...]
    region_tag: str = ""

    def __post_init__(self):
        if self.memory_bytes <= 0:
            raise InvalidBenchmarkError(
                f"device {self.id}: memory_bytes must be positive"
            )
        if not self.benchmark_times:
            raise InvalidBenchmarkError(
                f"device {self.id}: benchmark_times must be non-empty"
            )
        for task, seconds in self.benchmark_times:
            if seconds <= 0:
                raise InvalidBenchmarkError(
                    f"device {self.id}: benchmark {task!r} has non-positive time"
                )


@dataclass(frozen=True)
class LinkMeasurement:
    """Transfer-time samples for one unordered device pair.

    ``latency_seconds`` and ``bandwidth_bytes_per_s`` are the raw link
    parameters retained for the cost model and the simulator; when omitted
    they are derived from the payload samples.
    """

    endpoints: FrozenSet[str]
    alpha_seconds: float
    beta_seconds: float
    payload_bytes_m: float
    latency_seconds: Optional[float] = None
    bandwidth_bytes_per_s: Optional[float] = None

    def __post_init__(self):
        if len(self.endpoints) != 2:
            raise InvalidMeasurementError("endpoints must be two distinct devices")
        if self.alpha_seconds <= 0:
            raise InvalidMeasurementError("alpha_seconds must be positive")
        if self.beta_seconds <= 0:
            raise InvalidMeasurementError("beta_seconds must be positive")
        if self.payload_bytes_m <= 0:
            raise InvalidMeasurementError("payload_bytes_m must be positive")
        if self.latency_seconds is None:
            object.__setattr__(self, "latency_seconds", self.beta_seconds)
        if self.bandwidth_bytes_per_s is None:
            object.__setattr__(
                self, "bandwidth_bytes_per_s", self.payload_bytes_m / self.alpha_seconds
            )


@dataclass(frozen=True)
class CommMetric:
    """Scalar link cost in seconds-like units; lower is better."""

    p_t: float


@dataclass(frozen=True)
class ComputeMetric:
    """Scalar device throughput in work units per second; higher is better."""

    p_c: float


def comm_capability(m: LinkMeasurement) -> CommMetric:
    """Combine the payload samples into the unified link metric."""
    return CommMetric(p_t=m.alpha_seconds + m.beta_seconds / m.payload_bytes_m)


def compute_capacity(tasks: Sequence[Tuple[float, float]]) -> ComputeMetric:
    """Weighted sum of benchmark rates, ``sum_i w_i / t_i``."""
    if not tasks:
        raise InvalidBenchmarkError("benchmark list is empty")
    total = 0.0
    for w, t in tasks:
        if t <= 0:
            raise InvalidBenchmarkError(f"benchmark time {t} is not positive")
        if w < 0:
            raise InvalidBenchmarkError(f"benchmark weight {w} is negative")
        total += w / t
    if total <= 0:
        raise InvalidBenchmarkError("at least one benchmark weight must be positive")
    return ComputeMetric(p_c=total)


@dataclass(frozen=True)
class LinkInfo:
    """Per-pair link state held by the topology."""

    metric: CommMetric
    latency_seconds: float
    bandwidth_bytes_per_s: float


@dataclass(frozen=True)
class ClusterTopology:
    """Devices with compute metrics plus a complete symmetric link matrix."""

    devices: Tuple[DeviceSpec, ...]
    compute: Dict[str, ComputeMetric] = field(compare=False)
    links: Dict[FrozenSet[str], LinkInfo] = field(compare=False)

    @property
    def device_ids(self) -> List[str]:
        return [d.id for d in self.devices]

    def device(self, device_id: str) -> DeviceSpec:
        for d in self.devices:
            if d.id == device_id:
                return d
        raise KeyError(device_id)

    def p_c(self, device_id: str) -> float:
        return self.compute[device_id].p_c

    def p_t(self, a: str, b: str) -> float:
        return self.links[frozenset((a, b))].metric.p_t

    def link(self, a: str, b: str) -> LinkInfo:
        return self.links[frozenset((a, b))]

    def bandwidth(self, a: str, b: str) -> float:
        return self.links[frozenset((a, b))].bandwidth_bytes_per_s

    def latency(self, a: str, b: str) -> float:
        return self.links[frozenset((a, b))].latency_seconds


def benchmark_weights(device: DeviceSpec, weights=None) -> List[Tuple[float, float]]:
    """Pair benchmark times with weights, defaulting to uniform 1/n."""
    n = len(device.benchmark_times)
    if weights is None:
        weights = [1.0 / n] * n
    return [(w, t) for w, (_, t) in zip(weights, device.benchmark_times)]


def build_topology(
    devices: Sequence[DeviceSpec],
    measurements: Sequence[LinkMeasurement],
    weights: Optional[Dict[str, Sequence[float]]] = None,
) -> ClusterTopology:
    """Compute all metrics and assemble a complete topology.

    Requires exactly one measurement per unordered device pair; missing or
    duplicate pairs raise :class:`IncompleteTopologyError` naming the pairs.
    ``weights`` optionally maps device id to per-benchmark weights.
    """
    if not devices:
        raise EmptyClusterError("no devices supplied")
    ordered = tuple(sorted(devices, key=lambda d: d.id))
    ids = [d.id for d in ordered]
    if len(set(ids)) != len(ids):
        raise IncompleteTopologyError("duplicate device ids")

    expected = {
        frozenset((a, b)) for i, a in enumerate(ids) for b in ids[i + 1:]
    }
    links: Dict[FrozenSet[str], LinkInfo] = {}
    duplicates = []
    for m in measurements:
        if m.endpoints in links:
            duplicates.append(tuple(sorted(m.endpoints)))
            continue
        if m.endpoints not in expected:
            raise IncompleteTopologyError(
                f"measurement references unknown pair {tuple(sorted(m.endpoints))}"
            )
        links[m.endpoints] = LinkInfo(
            metric=comm_capability(m),
            latency_seconds=m.latency_seconds,
            bandwidth_bytes_per_s=m.bandwidth_bytes_per_s,
        )
    missing = sorted(tuple(sorted(p)) for p in expected - set(links))
    if duplicates or missing:
        raise IncompleteTopologyError(
            f"incomplete link matrix: missing={missing} duplicates={sorted(duplicates)}",
            missing=missing,
            duplicates=sorted(duplicates),
        )

    compute = {}
    for d in ordered:
        w = weights.get(d.id) if weights else None
        compute[d.id] = compute_capacity(benchmark_weights(d, w))
    return ClusterTopology(devices=ordered, compute=compute, links=links)
