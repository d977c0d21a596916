"""Piecewise-constant bandwidth traces for inter-stage links."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from .errors import InputFileError


@dataclass(frozen=True)
class NetworkTrace:
    """Bandwidth multipliers per link over simulated time.

    Each link maps to breakpoints ``(t_seconds, multiplier)`` sorted by time;
    the multiplier before the first breakpoint is 1.0.
    """

    breakpoints: Dict[str, Tuple[Tuple[float, float], ...]] = field(
        default_factory=dict
    )

    def __post_init__(self):
        for link, points in self.breakpoints.items():
            last_t = None
            for t, mult in points:
                if mult <= 0:
                    raise InputFileError(
                        f"trace link {link}: multiplier must be positive"
                    )
                if last_t is not None and t <= last_t:
                    raise InputFileError(
                        f"trace link {link}: breakpoints must be strictly increasing"
                    )
                last_t = t

    def multiplier(self, link: str, t: float) -> float:
        points = self.breakpoints.get(link, ())
        if not points:
            return 1.0
        idx = bisect.bisect_right([p[0] for p in points], t) - 1
        if idx < 0:
            return 1.0
        return points[idx][1]


CONSTANT_TRACE = NetworkTrace()


def effective_bandwidth(base_bandwidth: float, trace: NetworkTrace,
                        link: str, t: float) -> float:
    """Instantaneous bytes/second on a link at simulated time ``t``."""
    return base_bandwidth * trace.multiplier(link, t)


def transfer_end_time(start: float, bytes_count: float, base_bandwidth: float,
                      latency: float, trace: NetworkTrace, link: str) -> float:
    """Completion time of a transfer that spans bandwidth breakpoints.

    Bytes flow from ``start`` at the instantaneous effective bandwidth; a
    transfer crossing a breakpoint is split at the breakpoint.  Link latency
    is added at the end.
    """
    points = [p for p in trace.breakpoints.get(link, ()) if p[0] > start]
    t = start
    remaining = bytes_count
    for bp_t, _ in points:
        bw = effective_bandwidth(base_bandwidth, trace, link, t)
        span = bp_t - t
        if remaining <= bw * span:
            return t + remaining / bw + latency
        remaining -= bw * span
        t = bp_t
    bw = effective_bandwidth(base_bandwidth, trace, link, t)
    return t + remaining / bw + latency
