import json

import pytest

from geopipe import IntraSplit, ParallelPlan, SplitKind, StageAssignment
from geopipe.errors import InputFileError
from geopipe.fileio import (
    groups_to_dict,
    plan_to_dict,
    read_cluster,
    read_groups,
    read_model,
    read_plan,
    read_trace,
    write_json,
    write_plan,
)
from geopipe.grouping import group_first_level, group_second_level

CLUSTER_DOC = {
    "schema": "cluster/v1",
    "devices": [
        {"id": "a", "memory_bytes": 16e9, "region": "west",
         "benchmarks": [{"task": "matmul", "seconds": 0.5}]},
        {"id": "b", "memory_bytes": 16e9,
         "benchmarks": [{"task": "matmul", "seconds": 1.0}]},
    ],
    "links": [
        {"a": "a", "b": "b", "alpha_s": 0.1, "beta_s": 0.001,
         "payload_bytes": 1e6, "latency_s": 0.02, "bandwidth_Bps": 1e7},
    ],
}

MODEL_DOC = {
    "schema": "model/v1",
    "layers": [
        {"fwd_flops": 1e9, "activation_out_bytes": 1e5, "param_bytes": 1e6}
        for _ in range(4)
    ],
    "global_batch_candidates": [8],
    "microbatch_candidates": [2, 4],
}


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


class TestClusterFile:
    def test_round_trip(self, tmp_path):
        topo = read_cluster(write(tmp_path, "c.json", CLUSTER_DOC))
        assert topo.device_ids == ["a", "b"]
        assert topo.p_c("a") == pytest.approx(2.0)
        assert topo.latency("a", "b") == pytest.approx(0.02)
        assert topo.bandwidth("a", "b") == pytest.approx(1e7)

    def test_wrong_schema_named(self, tmp_path):
        doc = dict(CLUSTER_DOC, schema="cluster/v0")
        with pytest.raises(InputFileError, match="schema"):
            read_cluster(write(tmp_path, "c.json", doc))

    def test_missing_field_precisely_located(self, tmp_path):
        doc = json.loads(json.dumps(CLUSTER_DOC))
        del doc["devices"][1]["memory_bytes"]
        with pytest.raises(InputFileError, match=r"devices\[1\].*memory_bytes"):
            read_cluster(write(tmp_path, "c.json", doc))

    def test_invalid_json_reported(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text("{nope")
        with pytest.raises(InputFileError, match="not valid JSON"):
            read_cluster(p)


class TestModelFile:
    def test_round_trip(self, tmp_path):
        model = read_model(write(tmp_path, "m.json", MODEL_DOC))
        assert model.num_layers == 4
        assert model.global_batch_candidates == (8,)
        assert model.microbatch_candidates == (2, 4)

    def test_backward_flops_default_to_forward(self, tmp_path):
        model = read_model(write(tmp_path, "m.json", MODEL_DOC))
        assert model.layers[0].bwd_input_flops == model.layers[0].fwd_flops

    def test_missing_layer_field_located(self, tmp_path):
        doc = json.loads(json.dumps(MODEL_DOC))
        del doc["layers"][2]["param_bytes"]
        with pytest.raises(InputFileError, match=r"layers\[2\].*param_bytes"):
            read_model(write(tmp_path, "m.json", doc))


class TestTraceFile:
    def test_round_trip(self, tmp_path):
        doc = {"schema": "trace/v1", "events": [
            {"link": "0-1", "t_s": 5.0, "multiplier": 0.5},
            {"link": "0-1", "t_s": 2.0, "multiplier": 0.8},
        ]}
        trace = read_trace(write(tmp_path, "t.json", doc))
        assert trace.multiplier("0-1", 3.0) == 0.8
        assert trace.multiplier("0-1", 6.0) == 0.5
        assert trace.multiplier("0-1", 1.0) == 1.0

    def test_empty_events_constant(self, tmp_path):
        trace = read_trace(write(tmp_path, "t.json",
                                 {"schema": "trace/v1", "events": []}))
        assert trace.multiplier("anything", 100.0) == 1.0


class TestPlanFile:
    def _plan(self):
        return ParallelPlan(
            stages=(
                StageAssignment("fg-0", 0, 2,
                                IntraSplit(SplitKind.UNIFORM, ())),
                StageAssignment("fg-1", 2, 4,
                                IntraSplit(SplitKind.ASYMMETRIC_DP,
                                           (("sg-a", 0.25), ("sg-b", 0.75)))),
            ),
            batch_b=8,
            microbatch_m=2,
        )

    def test_round_trip(self, tmp_path):
        path = tmp_path / "plan.json"
        plan = self._plan()
        write_plan(plan, path)
        again = read_plan(path)
        assert again.batch_b == plan.batch_b
        assert again.microbatch_m == plan.microbatch_m
        assert [s.fg_id for s in again.stages] == ["fg-0", "fg-1"]
        assert again.stages[1].intra_split.kind is SplitKind.ASYMMETRIC_DP

    def test_dict_has_schema_header(self):
        assert plan_to_dict(self._plan())["schema"] == "plan/v1"


class TestGroupsFile:
    def test_round_trip(self, tmp_path):
        from conftest import clique_topology
        topo = clique_topology([[1.0, 1.0], [2.0, 2.0]], intra=0.01, cross=1.0)
        fgs = group_first_level(topo, 0.3)
        sgs = {fg.id: group_second_level(fg, topo, 0.3) for fg in fgs}
        path = tmp_path / "groups.json"
        write_json(groups_to_dict(fgs, sgs), path)
        fgs2, sgs2 = read_groups(path)
        assert [f.member_device_ids for f in fgs2] == [
            f.member_device_ids for f in fgs]
        assert {k: [s.member_device_ids for s in v] for k, v in sgs2.items()} \
            == {k: [s.member_device_ids for s in v] for k, v in sgs.items()}
