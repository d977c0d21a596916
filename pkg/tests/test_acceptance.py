"""Acceptance gate: the eight headline checks, one pass/fail line each.

Each test prints ``acceptance N: PASS`` on success; a failure raises with
the measured numbers so the line reads as the failure message instead.
"""

import itertools
import random
import time

import pytest

from geopipe import (
    NetworkTrace,
    OpKind,
    Policy,
    SearchConfig,
    SimConfig,
    build_plan_timing,
    exhaustive_plan,
    generate_schedule,
    make_timing,
    plan_cost_from_timing,
    search_plan,
    simulate_timing,
    validate_schedule,
)
from geopipe.engine import PipelineEngine
from geopipe.planner import (
    split_asymmetric_dp,
    split_asymmetric_pp,
    split_asymmetric_tp_dp,
)
from geopipe import group_first_level, group_second_level

from conftest import clique_topology, flat_topology, make_groups, uniform_model
from test_schedule import naive_checker, random_timing


def ok(n, detail=""):
    suffix = f" ({detail})" if detail else ""
    print(f"acceptance {n}: PASS{suffix}")


def test_1_schedule_validity_randomized():
    start = time.monotonic()
    rng = random.Random(2024)
    policies = list(Policy)
    for i in range(200):
        t = random_timing(rng)
        policy = policies[i % len(policies)]
        sch = generate_schedule(t, policy,
                                iterations=rng.choice([1, 2]))
        ours = validate_schedule(sch, t)
        assert ours == [], f"instance {i}: {ours[:3]}"
        assert naive_checker(sch, t) == 0, f"instance {i}: naive disagrees"
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"took {elapsed:.1f}s"
    ok(1, f"200 instances valid, both checkers agree, {elapsed:.1f}s")


def test_2_policy_ordering_on_slow_links():
    start = time.monotonic()
    t = make_timing(fwd=[1.0] * 4, bwd=[1.0] * 4, wgt=[1.0] * 4,
                    transfer=[1.5] * 3, microbatch=1, micro_count=6)
    spans = {p: generate_schedule(t, p).makespan for p in Policy}
    assert spans[Policy.ZB_COMPACT] < spans[Policy.ZB_ORIGINAL], spans
    assert spans[Policy.ZB_ORIGINAL] <= spans[Policy.ONE_F_ONE_B], spans
    ops = generate_schedule(t, Policy.ZB_COMPACT).stage_ops(1)
    last_f = max(o.end for o in ops if o.kind is OpKind.FORWARD)
    first_w = min(o.start for o in ops if o.kind is OpKind.WEIGHT_UPDATE)
    assert last_f <= first_w, (last_f, first_w)
    elapsed = time.monotonic() - start
    assert elapsed < 1.0
    ok(2, "compact %.1f < original %.1f <= alternating %.1f" % (
        spans[Policy.ZB_COMPACT], spans[Policy.ZB_ORIGINAL],
        spans[Policy.ONE_F_ONE_B]))


def _random_instance(seed):
    rng = random.Random(seed)
    n_cliques = rng.randint(2, 4)
    cliques = [
        [rng.choice([1.0, 2.0, 4.0])] * rng.randint(2, 3)
        for _ in range(n_cliques)
    ]
    topo = clique_topology(cliques, intra=0.01, cross=rng.uniform(0.3, 1.0),
                           bandwidth=rng.uniform(5e7, 5e8), latency=0.001)
    groups = make_groups(topo)
    layers = rng.randint(len(groups.fgs), 8)
    model = uniform_model(layers, flops=rng.uniform(4.0, 16.0),
                          act_bytes=rng.uniform(1e4, 1e6),
                          param_bytes=1e6,
                          batches=(8,), micros=(2, 4))
    return topo, groups, model


def test_3_planner_matches_exhaustive_at_desk_scale():
    start = time.monotonic()
    worst = 1.0
    count = 0
    seed = 0
    while count < 10:
        seed += 1
        topo, groups, model = _random_instance(seed)
        if len(groups.fgs) > 4:
            continue
        # A wider beam than the runtime default: at desk scale the candidate
        # space is tiny and width 16 reliably reaches the optimum.
        cfg = SearchConfig(seed=seed, beam_width=16, max_iter=20)
        beam = search_plan(model, topo, groups, cfg)
        oracle = exhaustive_plan(model, topo, groups, cfg)
        ratio = beam.breakdown.plan_cost / oracle.breakdown.plan_cost
        assert ratio <= 1.05, f"seed {seed}: ratio {ratio:.4f}"
        trace = beam.best_cost_trace
        assert all(a >= b for a, b in zip(trace, trace[1:])), seed
        worst = max(worst, ratio)
        count += 1
    elapsed = time.monotonic() - start
    assert elapsed < 60.0, f"took {elapsed:.1f}s"
    ok(3, f"{count} instances, worst beam/oracle ratio {worst:.4f}, "
          f"{elapsed:.1f}s")


def test_4_cost_model_tracks_simulator():
    start = time.monotonic()
    worst = 0.0
    for seed in range(20):
        topo, groups, model = _random_instance(100 + seed)
        plan = search_plan(model, topo, groups,
                           SearchConfig(seed=seed)).plan
        timing = build_plan_timing(plan, topo, model, groups)
        predicted = plan_cost_from_timing(timing).plan_cost
        simulated = simulate_timing(timing, Policy.ONE_F_ONE_B,
                                    config=SimConfig(iterations=1)).makespan
        err = abs(predicted - simulated) / simulated
        assert err <= 0.15, f"seed {seed}: relative error {err:.3f}"
        worst = max(worst, err)
    elapsed = time.monotonic() - start
    assert elapsed < 30.0, f"took {elapsed:.1f}s"
    ok(4, f"20 plans, worst relative error {worst:.3f}, {elapsed:.1f}s")


def test_5_grouping_reproduces_reference_hierarchy():
    start = time.monotonic()
    topo = clique_topology([[1.0] * 4] * 3, intra=0.01, cross=1.0)
    fgs = group_first_level(topo, 0.3)
    assert len(fgs) == 3, [f.member_device_ids for f in fgs]
    assert all(len(f.member_device_ids) == 4 for f in fgs)

    def pattern(pcs, threshold=0.3):
        t = flat_topology(pcs)
        (fg,) = group_first_level(t, 0.5)
        sizes = sorted(len(sg.member_device_ids)
                       for sg in group_second_level(fg, t, threshold))
        return sizes

    assert pattern([10, 10, 5, 5, 1], 0.2) == [1, 2, 2]       # three SGs
    assert pattern([1, 3, 9, 27]) == [1, 1, 1, 1]             # all standalone
    assert pattern([10, 10, 3, 1]) == [1, 1, 2]               # 1 SG + 2 alone
    elapsed = time.monotonic() - start
    assert elapsed < 1.0
    ok(5, "3 first-level groups of 4; all three second-level patterns")


def test_6_adapter_pays_off_under_fluctuation():
    start = time.monotonic()
    t = make_timing(fwd=[0.2] * 4, bwd=[0.2] * 4, wgt=[0.1] * 4,
                    transfer=[0.8] * 3, microbatch=8, micro_count=8,
                    latency=0.02)
    cfg = SimConfig(iterations=6)
    settled = simulate_timing(t, Policy.ONE_F_ONE_B, config=cfg)
    drop_at = settled.iteration_ends[0]
    # Halve every inter-stage link mid-run (a drop inside the 40-60% band).
    trace = NetworkTrace(breakpoints={
        f"{i}-{i + 1}": ((drop_at, 0.5),) for i in range(3)})
    off = simulate_timing(t, Policy.ONE_F_ONE_B, trace, False, cfg)
    on = simulate_timing(t, Policy.ONE_F_ONE_B, trace, True, cfg)
    fluct_ratio = on.throughput / off.throughput
    assert fluct_ratio >= 1.2, f"fluctuation ratio {fluct_ratio:.3f}"
    stable_on = simulate_timing(t, Policy.ONE_F_ONE_B, adapter_enabled=True,
                                config=cfg)
    stable_ratio = stable_on.throughput / settled.throughput
    assert stable_ratio >= 0.9, f"stable ratio {stable_ratio:.3f}"
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"took {elapsed:.1f}s"
    ok(6, f"fluctuation gain {fluct_ratio:.2f}x, stable ratio "
          f"{stable_ratio:.2f}, {elapsed:.1f}s")


def test_7_conservation_and_determinism():
    start = time.monotonic()
    rng = random.Random(77)
    for i in range(100):
        S = rng.randint(2, 4)
        m = rng.choice([2, 4, 8])
        t = make_timing(
            fwd=[rng.uniform(0.1, 1.0) for _ in range(S)],
            bwd=[rng.uniform(0.1, 1.0) for _ in range(S)],
            wgt=[rng.uniform(0.05, 0.5) for _ in range(S)],
            transfer=[rng.uniform(0.1, 1.5) for _ in range(S - 1)],
            microbatch=m, micro_count=rng.randint(2, 5),
            latency=rng.uniform(0.0, 0.1),
        )
        links = [f"{b}-{b + 1}" for b in range(S - 1)]
        trace = NetworkTrace(breakpoints={
            link: ((rng.uniform(0.5, 5.0), rng.choice([0.4, 0.5, 0.6])),)
            for link in links if rng.random() < 0.7
        })
        policy = rng.choice(list(Policy))
        iters = rng.choice([1, 2, 3])
        cfg = SimConfig(iterations=iters)
        rep = simulate_timing(t, policy, trace, True, cfg)
        for it in range(iters):
            for s in range(S):
                for kind in (OpKind.FORWARD, OpKind.BACKWARD):
                    total = sum(op.size for op in rep.schedule.stage_ops(s)
                                if op.kind is kind and op.iteration == it)
                    assert total == t.batch, (i, it, s, kind, total)
        again = simulate_timing(t, policy, trace, True, cfg)
        assert rep.to_dict() == again.to_dict(), f"config {i} not reproducible"
    elapsed = time.monotonic() - start
    assert elapsed < 60.0, f"took {elapsed:.1f}s"
    ok(7, f"100 configs conserve samples and rerun bit-identically, "
          f"{elapsed:.1f}s")


def test_8_asymmetric_split_algebra():
    start = time.monotonic()
    assert split_asymmetric_pp(0, 6, ["x", "y"], [1.0, 2.0]) == [
        ("x", 0, 2), ("y", 2, 6)]
    assert split_asymmetric_dp([1.0, 2.0]) == pytest.approx([1 / 3, 2 / 3])
    assert split_asymmetric_tp_dp([1.0, 2.0, 2.0, 4.0]) == pytest.approx(
        [(1 / 3, 1 / 3), (2 / 3, 1 / 3), (1 / 3, 2 / 3), (2 / 3, 2 / 3)])
    # Zero slack on randomized shapes.
    rng = random.Random(8)
    for _ in range(50):
        k = rng.randint(2, 5)
        caps = [rng.choice([1.0, 2.0, 3.0, 4.0]) for _ in range(k)]
        total = rng.randint(k, 12)
        parts = split_asymmetric_pp(0, total, [f"g{i}" for i in range(k)],
                                    caps)
        assert parts[0][1] == 0 and parts[-1][2] == total
        assert all(a[2] == b[1] for a, b in zip(parts, parts[1:]))
        fractions = split_asymmetric_dp(caps)
        assert sum(fractions) == 1.0
    for rows in ([1.0, 1.0], [1.0, 2.0], [1.0, 3.0]):
        for cols in ([1.0, 1.0], [1.0, 2.0]):
            caps = [r * c for c in cols for r in rows]
            tiles = split_asymmetric_tp_dp(caps)
            assert sum(r * c for r, c in tiles) == pytest.approx(1.0)
    elapsed = time.monotonic() - start
    assert elapsed < 1.0
    ok(8, "reference splits exact; randomized splits leave zero slack")
