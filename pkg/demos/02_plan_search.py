"""Search for a parallelization plan and compare it with brute force.

Builds a three-site cluster, runs the beam search over stage orders, layer
cuts, and (batch, micro-batch) choices, then checks the result against
exhaustive enumeration — feasible here because the instance is tiny.
"""

from geopipe import (
    LayerSpec,
    ModelSpec,
    SearchConfig,
    exhaustive_plan,
    search_plan,
)
from geopipe.costmodel import breakdown_table

from _shared import demo_cluster, demo_groups


def main():
    topology = demo_cluster()
    groups = demo_groups(topology)

    layers = tuple(
        LayerSpec(fwd_flops=6e9, bwd_input_flops=6e9, bwd_weight_flops=3e9,
                  activation_out_bytes=2e6, param_bytes=5e7)
        for _ in range(8)
    )
    model = ModelSpec(layers=layers, global_batch_candidates=(16, 32),
                      microbatch_candidates=(4, 8))

    config = SearchConfig(seed=0, beam_width=8, max_iter=20)
    result = search_plan(model, topology, groups, config)

    print("beam search result:")
    print(f"  batch={result.plan.batch_b}  micro-batch={result.plan.microbatch_m}")
    for s, stage in enumerate(result.plan.stages):
        print(f"  stage {s}: {stage.fg_id}  layers "
              f"[{stage.layer_start}, {stage.layer_end})  "
              f"split={stage.intra_split.kind.value}")
    print(f"  plans evaluated: {result.evaluated}")
    print()
    print(breakdown_table(result.breakdown))
    print()

    trace = result.best_cost_trace
    print(f"best-cost trace: starts {trace[0]:.3f}, ends {trace[-1]:.3f} "
          f"({'monotone' if all(a >= b for a, b in zip(trace, trace[1:])) else 'NOT monotone'})")

    oracle = exhaustive_plan(model, topology, groups, config)
    ratio = result.breakdown.plan_cost / oracle.breakdown.plan_cost
    print(f"vs exhaustive optimum: {ratio:.4f}x "
          f"({oracle.evaluated} plans enumerated)")


if __name__ == "__main__":
    main()
