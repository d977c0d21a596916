"""Simulate a mid-run bandwidth drop, with and without the adapter.

All inter-stage links lose half their bandwidth after the first iteration.
The runtime adapter notices the per-sample transfer latency drifting above
its baseline, halves the affected stages' micro-batches (shrinking the
pipeline's fill and drain ramps), and recovers most of the lost throughput.
"""

from geopipe import (
    NetworkTrace,
    Policy,
    SimConfig,
    make_timing,
    simulate_timing,
)


def main():
    timing = make_timing(
        fwd=[0.2] * 4, bwd=[0.2] * 4, wgt=[0.1] * 4,
        transfer=[0.8] * 3,
        microbatch=8, micro_count=8, latency=0.02,
    )
    config = SimConfig(iterations=6)

    calm = simulate_timing(timing, Policy.ONE_F_ONE_B, config=config)
    drop_at = calm.iteration_ends[0]
    trace = NetworkTrace(breakpoints={
        f"{i}-{i + 1}": ((drop_at, 0.5),) for i in range(3)
    })

    off = simulate_timing(timing, Policy.ONE_F_ONE_B, trace,
                          adapter_enabled=False, config=config)
    on = simulate_timing(timing, Policy.ONE_F_ONE_B, trace,
                         adapter_enabled=True, config=config)

    print(f"stable network:              {calm.throughput:8.2f} samples/s")
    print(f"links halved, adapter off:   {off.throughput:8.2f} samples/s")
    print(f"links halved, adapter on:    {on.throughput:8.2f} samples/s")
    print(f"adapter gain under drop:     {on.throughput / off.throughput:.2f}x")
    print()
    print("first adapter actions:")
    for action in on.adapter_actions[:8]:
        print(f"  t={action.t:7.2f}s  stage {action.stage}: "
              f"{action.old_size} -> {action.new_size}  ({action.signal})")
    print(f"  ... {len(on.adapter_actions)} actions total")


if __name__ == "__main__":
    main()
