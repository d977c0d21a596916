"""Cluster fixture shared by the demo scripts."""

import itertools

from geopipe import (
    DeviceSpec,
    LinkMeasurement,
    build_topology,
    group_first_level,
    group_second_level,
)
from geopipe.timing import GroupIndex

SITES = {0: [4.0, 4.0], 1: [2.0, 2.0], 2: [1.0, 1.0]}


def demo_cluster():
    devices, site_of = [], {}
    for site, speeds in SITES.items():
        for i, speed in enumerate(speeds):
            # Benchmark: unit-work probe timed so that p_c lands in flops/s
            # (speed is in teraflops).
            d = DeviceSpec(id=f"s{site}n{i}", memory_bytes=24e9,
                           benchmark_times=(("bench", 1.0 / (speed * 1e12)),))
            devices.append(d)
            site_of[d.id] = site
    links = []
    for a, b in itertools.combinations(devices, 2):
        local = site_of[a.id] == site_of[b.id]
        links.append(LinkMeasurement(
            endpoints=frozenset((a.id, b.id)),
            alpha_seconds=0.008 if local else 0.6,
            beta_seconds=0.002,
            payload_bytes_m=1e6,
            latency_seconds=0.0005 if local else 0.03,
            bandwidth_bytes_per_s=1.25e9 if local else 2.5e7,
        ))
    return build_topology(devices, links)


def demo_groups(topology, threshold_net=0.3, threshold_compute=0.3):
    fgs = group_first_level(topology, threshold_net)
    sgs = {fg.id: group_second_level(fg, topology, threshold_compute)
           for fg in fgs}
    return GroupIndex.build(fgs, sgs)
