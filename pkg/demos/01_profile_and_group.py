"""Profile a mixed fleet and build the two-level device hierarchy.

Twelve devices sit in three well-connected sites; links inside a site are
fast, links between sites are slow.  The first grouping level recovers the
three sites from the link metrics alone; the second level then splits each
site by compute speed.
"""

import itertools

from geopipe import (
    DeviceSpec,
    LinkMeasurement,
    build_topology,
    group_first_level,
    group_second_level,
)
from geopipe.grouping import hierarchy_dot

SITES = {
    0: [4.0, 4.0, 2.0, 2.0],   # two fast cards, two mid-range
    1: [3.0, 1.0, 5.0, 7.0],   # a grab-bag: every device different
    2: [6.0, 6.0, 2.0, 0.5],   # one matched pair plus stragglers
}


def main():
    devices = []
    site_of = {}
    for site, speeds in SITES.items():
        for i, speed in enumerate(speeds):
            d = DeviceSpec(
                id=f"s{site}n{i}",
                memory_bytes=16e9,
                benchmark_times=(("conv", 1.0 / speed), ("matmul", 1.0 / speed)),
                region_tag=f"site-{site}",
            )
            devices.append(d)
            site_of[d.id] = site

    links = []
    for a, b in itertools.combinations(devices, 2):
        local = site_of[a.id] == site_of[b.id]
        links.append(LinkMeasurement(
            endpoints=frozenset((a.id, b.id)),
            alpha_seconds=0.008 if local else 0.9,
            beta_seconds=0.002,
            payload_bytes_m=1e6,
            latency_seconds=0.0005 if local else 0.04,
            bandwidth_bytes_per_s=1.25e9 if local else 1.2e7,
        ))

    topology = build_topology(devices, links)

    print("link metric samples:")
    print(f"  intra-site  s0n0-s0n1: {topology.p_t('s0n0', 's0n1'):.4f} s")
    print(f"  cross-site  s0n0-s1n0: {topology.p_t('s0n0', 's1n0'):.4f} s")
    print()

    fgs = group_first_level(topology, threshold=0.3)
    print(f"first level: {len(fgs)} network groups")
    for fg in fgs:
        sgs = group_second_level(fg, topology, threshold=0.3)
        members = ", ".join(fg.member_device_ids)
        print(f"  {fg.id}: [{members}]  capacity={fg.aggregate_capacity:.1f}")
        for sg in sgs:
            speeds = [topology.p_c(d) for d in sg.member_device_ids]
            print(f"    {sg.id}: {list(sg.member_device_ids)}  p_c={speeds}")

    print()
    print("DOT rendering (pipe into `dot -Tpng` to draw):")
    sgs_by_fg = {fg.id: group_second_level(fg, topology, 0.3) for fg in fgs}
    print(hierarchy_dot(topology, fgs, sgs_by_fg))


if __name__ == "__main__":
    main()
