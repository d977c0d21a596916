import pytest

from geopipe import (
    CONSTANT_TRACE,
    NetworkTrace,
    Policy,
    SimConfig,
    effective_bandwidth,
    generate_schedule,
    make_timing,
    simulate_timing,
    validate_schedule,
)
from geopipe.nettrace import transfer_end_time


class TestTraceLookup:
    def test_no_breakpoints_base_bandwidth(self):
        assert effective_bandwidth(100.0, CONSTANT_TRACE, "0-1", 5.0) == 100.0

    def test_step_applies_after_time(self):
        trace = NetworkTrace(breakpoints={"0-1": ((10.0, 0.5),)})
        assert effective_bandwidth(100.0, trace, "0-1", 12.0) == 50.0
        assert effective_bandwidth(100.0, trace, "0-1", 9.0) == 100.0

    def test_piecewise_lookup(self):
        trace = NetworkTrace(breakpoints={"L": ((5.0, 0.4), (9.0, 1.0))})
        assert effective_bandwidth(10.0, trace, "L", 7.0) == pytest.approx(4.0)
        assert effective_bandwidth(10.0, trace, "L", 9.5) == pytest.approx(10.0)

    def test_other_links_unaffected(self):
        trace = NetworkTrace(breakpoints={"0-1": ((1.0, 0.25),)})
        assert effective_bandwidth(8.0, trace, "1-2", 2.0) == 8.0

    def test_transfer_spans_breakpoint(self):
        # 10 bytes at 1 B/s; halfway through, bandwidth halves.
        trace = NetworkTrace(breakpoints={"L": ((5.0, 0.5),)})
        end = transfer_end_time(0.0, 10.0, 1.0, 0.0, trace, "L")
        assert end == pytest.approx(5.0 + 5.0 / 0.5)

    def test_latency_added_at_end(self):
        end = transfer_end_time(2.0, 4.0, 2.0, 0.3, CONSTANT_TRACE, "L")
        assert end == pytest.approx(2.0 + 2.0 + 0.3)


def two_stage_timing(**kw):
    defaults = dict(fwd=[1.0, 1.0], bwd=[1.0, 1.0], wgt=[0.5, 0.5],
                    transfer=[0.8], microbatch=2, micro_count=3)
    defaults.update(kw)
    return make_timing(**defaults)


class TestSimulation:
    @pytest.mark.parametrize("policy", list(Policy))
    def test_constant_trace_matches_static_schedule(self, policy):
        t = two_stage_timing()
        static = generate_schedule(t, policy, iterations=2)
        report = simulate_timing(t, policy, CONSTANT_TRACE,
                                 config=SimConfig(iterations=2))
        assert report.makespan == static.makespan
        assert report.schedule.ops == static.ops

    def test_mid_run_slowdown_stretches_makespan(self):
        t = two_stage_timing()
        base = simulate_timing(t, Policy.ONE_F_ONE_B,
                               config=SimConfig(iterations=2))
        trace = NetworkTrace(breakpoints={"0-1": ((base.makespan / 4, 0.5),)})
        slowed = simulate_timing(t, Policy.ONE_F_ONE_B, trace,
                                 config=SimConfig(iterations=2))
        assert slowed.makespan > base.makespan

    def test_speedup_never_hurts(self):
        t = two_stage_timing()
        trace = NetworkTrace(breakpoints={"0-1": ((1.0, 4.0),)})
        base = simulate_timing(t, Policy.ONE_F_ONE_B,
                               config=SimConfig(iterations=2))
        fast = simulate_timing(t, Policy.ONE_F_ONE_B, trace,
                               config=SimConfig(iterations=2))
        assert fast.makespan <= base.makespan

    def test_throughput_invariant(self):
        t = two_stage_timing()
        rep = simulate_timing(t, Policy.GPIPE, config=SimConfig(iterations=3))
        assert rep.throughput == pytest.approx(
            rep.total_samples / rep.makespan)
        assert rep.total_samples == t.batch * 3

    def test_simulated_schedule_validates_under_trace(self):
        t = two_stage_timing()
        trace = NetworkTrace(breakpoints={"0-1": ((2.0, 0.5),)})
        rep = simulate_timing(t, Policy.ONE_F_ONE_B, trace,
                              config=SimConfig(iterations=2))
        assert validate_schedule(rep.schedule, t) == []

    def test_report_dict_round_trips_through_files(self, tmp_path):
        from geopipe.fileio import read_report, write_json
        t = two_stage_timing()
        rep = simulate_timing(t, Policy.ZB_COMPACT,
                              config=SimConfig(iterations=2))
        path = tmp_path / "report.json"
        write_json(rep.to_dict(), path)
        again = read_report(path)
        assert again["makespan_s"] == rep.makespan
        assert again["policy"] == "zb_compact"

    def test_bit_identical_reruns(self):
        t = two_stage_timing()
        trace = NetworkTrace(breakpoints={"0-1": ((3.0, 0.6),)})
        cfg = SimConfig(iterations=3)
        a = simulate_timing(t, Policy.ONE_F_ONE_B, trace, True, cfg)
        b = simulate_timing(t, Policy.ONE_F_ONE_B, trace, True, cfg)
        assert a.to_dict() == b.to_dict()

    def test_iteration_ends_monotone(self):
        t = two_stage_timing()
        rep = simulate_timing(t, Policy.GPIPE, config=SimConfig(iterations=4))
        ends = rep.iteration_ends
        assert len(ends) == 4
        assert all(a < b for a, b in zip(ends, ends[1:]))
        assert ends[-1] == rep.makespan
