"""Drive the full command-line pipeline end to end in a temp directory.

Writes a cluster file and a model file, then runs:
  group -> plan -> cost -> simulate -> compare -> export-timeline
exactly as a user would from a shell, and prints each command's output.
"""

import itertools
import json
import tempfile
from pathlib import Path

from geopipe.cli import main as cli

SITES = {0: [4.0, 4.0], 1: [2.0, 2.0], 2: [1.0, 1.0]}


def write_inputs(root: Path):
    devices, links, site_of = [], [], {}
    for site, speeds in SITES.items():
        for i, speed in enumerate(speeds):
            did = f"s{site}n{i}"
            site_of[did] = site
            # speed is in teraflops; the probe kernel is one unit of work.
            devices.append({"id": did, "memory_bytes": 24e9,
                            "benchmarks": [{"task": "bench",
                                            "seconds": 1.0 / (speed * 1e12)}]})
    for a, b in itertools.combinations([d["id"] for d in devices], 2):
        local = site_of[a] == site_of[b]
        links.append({"a": a, "b": b,
                      "alpha_s": 0.008 if local else 0.6,
                      "beta_s": 0.002, "payload_bytes": 1e6,
                      "latency_s": 0.0005 if local else 0.03,
                      "bandwidth_Bps": 1.25e9 if local else 2.5e7})
    (root / "cluster.json").write_text(json.dumps(
        {"schema": "cluster/v1", "devices": devices, "links": links}))
    (root / "model.json").write_text(json.dumps({
        "schema": "model/v1",
        "layers": [{"fwd_flops": 6e9, "activation_out_bytes": 2e6,
                    "param_bytes": 5e7} for _ in range(8)],
        "global_batch_candidates": [16],
        "microbatch_candidates": [4, 8],
    }))
    (root / "trace.json").write_text(json.dumps({
        "schema": "trace/v1",
        "events": [{"link": f"{i}-{i + 1}", "t_s": 5.0, "multiplier": 0.5}
                   for i in range(2)],
    }))


def run(argv):
    print(f"$ geopipe {' '.join(argv)}")
    rc = cli(argv)
    assert rc == 0, f"command failed with exit code {rc}"
    print()


def main():
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        write_inputs(root)
        cluster, model = str(root / "cluster.json"), str(root / "model.json")
        plan = str(root / "plan.json")

        run(["group", cluster])
        run(["plan", cluster, model, "--seed", "0", "--out", plan])
        run(["cost", cluster, model, plan])
        run(["simulate", cluster, model, plan, "--policy", "zb_compact",
             "--iterations", "2", "--out", str(root / "report.json")])
        print((root / "report.json").read_text()[:400] + "...\n")
        run(["compare", cluster, model, plan, "--adapter", "--iterations",
             "2", "--trace", str(root / "trace.json")])
        run(["export-timeline", cluster, model, plan, "--iterations", "1",
             "--out", str(root / "timeline.json")])
        print(f"timeline events: "
              f"{len(json.loads((root / 'timeline.json').read_text())['traceEvents'])}")


if __name__ == "__main__":
    main()
