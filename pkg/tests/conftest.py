import itertools
import random

import pytest

from geopipe import (
    DeviceSpec,
    LayerSpec,
    LinkMeasurement,
    ModelSpec,
    build_topology,
    group_first_level,
    group_second_level,
)
from geopipe.timing import GroupIndex

EPS_BETA = 1e-3  # small but valid serialization term for constructed links


def link(u, v, p_t, bandwidth=None, latency=None):
    """A measurement whose derived metric is (almost exactly) p_t."""
    return LinkMeasurement(
        endpoints=frozenset((u, v)),
        alpha_seconds=p_t - EPS_BETA / 1e6,
        beta_seconds=EPS_BETA,
        payload_bytes_m=1e6,
        latency_seconds=latency,
        bandwidth_bytes_per_s=bandwidth,
    )


def device(did, p_c=1.0, memory=1e15):
    return DeviceSpec(id=did, memory_bytes=memory,
                      benchmark_times=(("bench", 1.0 / p_c),))


def full_mesh(devices, p_t_fn, bandwidth=None, latency=None):
    return [
        link(a.id, b.id, p_t_fn(a.id, b.id), bandwidth, latency)
        for a, b in itertools.combinations(devices, 2)
    ]


def clique_topology(pcs_by_clique, intra=0.01, cross=1.0, memory=1e15,
                    bandwidth=None, latency=None):
    """Cliques with uniform intra-clique p_t and a worse cross-clique p_t."""
    devs = []
    clique_of = {}
    for c, pcs in enumerate(pcs_by_clique):
        for k, p_c in enumerate(pcs):
            d = device(f"c{c}d{k}", p_c, memory)
            devs.append(d)
            clique_of[d.id] = c
    links = full_mesh(
        devs,
        lambda u, v: intra if clique_of[u] == clique_of[v] else cross,
        bandwidth, latency,
    )
    return build_topology(devs, links)


def flat_topology(pcs, p_t=0.01, memory=1e15):
    devs = [device(f"d{i}", p, memory) for i, p in enumerate(pcs)]
    return build_topology(devs, full_mesh(devs, lambda u, v: p_t))


def make_groups(topology, threshold_net=0.3, threshold_compute=0.3):
    fgs = group_first_level(topology, threshold_net)
    sgs = {
        fg.id: group_second_level(fg, topology, threshold_compute)
        for fg in fgs
    }
    return GroupIndex.build(fgs, sgs)


def uniform_model(num_layers, flops=10.0, act_bytes=1.0, param_bytes=1.0,
                  batches=(8,), micros=(2,)):
    layers = tuple(
        LayerSpec(fwd_flops=flops, bwd_input_flops=flops,
                  bwd_weight_flops=flops / 2,
                  activation_out_bytes=act_bytes, param_bytes=param_bytes)
        for _ in range(num_layers)
    )
    return ModelSpec(layers=layers, global_batch_candidates=batches,
                     microbatch_candidates=micros)


def random_topology(rng: random.Random, n=None):
    n = n or rng.randint(2, 9)
    devs = [device(f"d{i}", rng.uniform(0.5, 20.0)) for i in range(n)]
    pts = {
        frozenset((a.id, b.id)): rng.uniform(0.005, 2.0)
        for a, b in itertools.combinations(devs, 2)
    }
    links = full_mesh(devs, lambda u, v: pts[frozenset((u, v))])
    return build_topology(devs, links)


@pytest.fixture
def three_clique_topology():
    return clique_topology([[1.0] * 4] * 3)
