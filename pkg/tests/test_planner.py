import random

import pytest

from geopipe import (
    SearchConfig,
    SplitKind,
    exhaustive_plan,
    search_plan,
)
from geopipe.errors import FactorizationError, InfeasibleSplitError
from geopipe.planner import (
    Candidate,
    expand_candidates,
    initial_candidates,
    proportional_split,
    split_asymmetric_dp,
    split_asymmetric_pp,
    split_asymmetric_tp_dp,
)

from conftest import clique_topology, make_groups, uniform_model


class TestProportionalLayerSplit:
    def test_equal_capacities(self):
        got = split_asymmetric_pp(0, 6, ["a", "b"], [1.0, 1.0])
        assert got == [("a", 0, 3), ("b", 3, 6)]

    def test_one_to_two_ratio(self):
        got = split_asymmetric_pp(0, 6, ["a", "b"], [1.0, 2.0])
        assert got == [("a", 0, 2), ("b", 2, 6)]

    def test_largest_remainder(self):
        got = split_asymmetric_pp(0, 5, ["a", "b"], [2.0, 3.0])
        assert got == [("a", 0, 2), ("b", 2, 5)]

    def test_each_part_gets_a_layer(self):
        got = split_asymmetric_pp(0, 3, ["a", "b", "c"], [100.0, 1.0, 1.0])
        assert [hi - lo for _, lo, hi in got] == [1, 1, 1]

    def test_more_parts_than_layers_rejected(self):
        with pytest.raises(InfeasibleSplitError):
            split_asymmetric_pp(0, 2, ["a", "b", "c"], [1.0, 1.0, 1.0])

    def test_zero_slack(self):
        for total, weights in [(7, [1, 2, 4]), (9, [5, 3, 1]), (4, [1, 1, 1, 1])]:
            assert sum(proportional_split(total, weights, minimum=1)) == total


class TestDataFractions:
    def test_one_to_two(self):
        assert split_asymmetric_dp([1.0, 2.0]) == pytest.approx([1 / 3, 2 / 3])

    def test_equal(self):
        assert split_asymmetric_dp([5.0, 5.0]) == pytest.approx([0.5, 0.5])

    def test_three_way(self):
        assert split_asymmetric_dp([1.0, 2.0, 2.0]) == pytest.approx([0.2, 0.4, 0.4])

    def test_exact_unit_sum(self):
        fr = split_asymmetric_dp([1.0, 1.0, 1.0])
        assert sum(fr) == 1.0


class TestGridTiles:
    def test_grid_ratio_1224(self):
        tiles = split_asymmetric_tp_dp([1.0, 2.0, 2.0, 4.0])
        assert tiles == pytest.approx(
            [(1 / 3, 1 / 3), (2 / 3, 1 / 3), (1 / 3, 2 / 3), (2 / 3, 2 / 3)])

    def test_equal_quarters(self):
        tiles = split_asymmetric_tp_dp([1.0, 1.0, 1.0, 1.0])
        assert tiles == pytest.approx([(0.5, 0.5)] * 4)

    def test_unfactorable_ratio_rejected(self):
        with pytest.raises(FactorizationError):
            split_asymmetric_tp_dp([1.0, 1.0, 2.0])

    def test_tiles_cover_unit_square(self):
        tiles = split_asymmetric_tp_dp([1.0, 2.0, 2.0, 4.0])
        assert sum(r * c for r, c in tiles) == pytest.approx(1.0)


@pytest.fixture
def small_setup():
    topo = clique_topology([[4.0, 4.0], [2.0], [1.0]], intra=0.01, cross=0.5,
                           bandwidth=1e8, latency=0.001)
    groups = make_groups(topo)
    model = uniform_model(6, flops=8.0, act_bytes=1e5, param_bytes=1e6,
                          batches=(8,), micros=(2, 4))
    return topo, groups, model


class TestCandidates:
    def test_single_fg_single_stage(self, small_setup):
        topo, groups, model = small_setup
        fgs = [next(iter(groups.fgs.values()))]
        cands = initial_candidates(model, fgs, 4, seed=0)
        assert all(c.counts == (model.num_layers,) for c in cands)

    def test_count_and_reproducibility(self, small_setup):
        topo, groups, model = small_setup
        fgs = list(groups.fgs.values())
        a = initial_candidates(model, fgs, 4, seed=7)
        b = initial_candidates(model, fgs, 4, seed=7)
        assert len(a) == 4 and a == b

    def test_capacity_proportional_cuts(self):
        topo = clique_topology([[0.5, 0.5], [1.5, 1.5]], intra=0.01, cross=0.5)
        groups = make_groups(topo)
        model = uniform_model(8)
        (first, *_) = initial_candidates(
            model, list(groups.fgs.values()), 4, seed=0)
        by_id = dict(zip(first.order, first.counts))
        small = min(groups.fgs.values(), key=lambda f: f.aggregate_capacity)
        big = max(groups.fgs.values(), key=lambda f: f.aggregate_capacity)
        assert by_id[small.id] == 2 and by_id[big.id] == 6

    def test_expansion_variants(self):
        rng = random.Random(0)
        cand = Candidate(order=("a", "b"), counts=(2, 2))
        got = expand_candidates([cand], rng)
        # self + one reorder + two cut shifts
        assert cand in got
        assert len(got) == 4

    def test_expansion_clamps_empty_stage(self):
        rng = random.Random(0)
        cand = Candidate(order=("a", "b"), counts=(1, 3))
        got = expand_candidates([cand], rng)
        assert all(min(c.counts) >= 1 for c in got)

    def test_singleton_order_no_reorder(self):
        rng = random.Random(0)
        cand = Candidate(order=("a",), counts=(4,))
        assert expand_candidates([cand], rng) == [cand]


class TestSearch:
    def test_single_fg_trivial_plan(self):
        topo = clique_topology([[2.0, 2.0]], bandwidth=1e8, latency=0.001)
        groups = make_groups(topo)
        model = uniform_model(4, batches=(4,), micros=(1,))
        res = search_plan(model, topo, groups, SearchConfig(seed=0))
        assert res.plan.num_stages == 1
        assert res.plan.stages[0].layer_end == 4

    def test_matches_exhaustive_on_tiny_instance(self, small_setup):
        topo, groups, model = small_setup
        cfg = SearchConfig(seed=3, beam_width=8, max_iter=10)
        beam = search_plan(model, topo, groups, cfg)
        oracle = exhaustive_plan(model, topo, groups, cfg)
        assert beam.breakdown.plan_cost <= 1.05 * oracle.breakdown.plan_cost

    def test_trace_monotone_non_increasing(self, small_setup):
        topo, groups, model = small_setup
        res = search_plan(model, topo, groups, SearchConfig(seed=5))
        trace = res.best_cost_trace
        assert all(a >= b for a, b in zip(trace, trace[1:]))

    def test_deterministic_for_fixed_seed(self, small_setup):
        topo, groups, model = small_setup
        cfg = SearchConfig(seed=11)
        a = search_plan(model, topo, groups, cfg)
        b = search_plan(model, topo, groups, cfg)
        assert a.plan == b.plan
        assert a.breakdown.plan_cost == b.breakdown.plan_cost

    def test_memory_pressure_changes_feasibility(self):
        # Tiny device memories make every plan infeasible.
        topo = clique_topology([[2.0], [1.0]], memory=10.0,
                               bandwidth=1e8, latency=0.001)
        groups = make_groups(topo)
        model = uniform_model(4, param_bytes=1e9, batches=(4,), micros=(2,))
        from geopipe.errors import NoFeasiblePlanError
        with pytest.raises(NoFeasiblePlanError):
            search_plan(model, topo, groups, SearchConfig(seed=0))

    def test_plan_layers_tile_model(self, small_setup):
        topo, groups, model = small_setup
        res = search_plan(model, topo, groups, SearchConfig(seed=2))
        spans = sorted((s.layer_start, s.layer_end) for s in res.plan.stages)
        assert spans[0][0] == 0 and spans[-1][1] == model.num_layers
        for (a, b), (c, d) in zip(spans, spans[1:]):
            assert b == c

    def test_intra_split_kinds_valid(self, small_setup):
        topo, groups, model = small_setup
        res = search_plan(model, topo, groups, SearchConfig(seed=2))
        for stage in res.plan.stages:
            assert stage.intra_split.kind in SplitKind
