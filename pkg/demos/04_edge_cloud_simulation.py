#!/usr/bin/env python3
"""Full edge/cloud topology in one process.

Six historical edge nodes fit features from their local archives and report
them to the cloud registry; a cold-starting target node queries for the
features, fuses the resulting experts, and predicts its own stream from step
zero. Afterwards we audit the wire: every message is line-delimited JSON
carrying only the three feature parameters plus a small envelope, so raw
observations never leave their node and per-node traffic is independent of
archive size.
"""

import json

from gptdf import FitConfig
from gptdf.edge_sim import NodeSpec, Scenario, run_simulation


def synthetic(n, seed, sigma_l=2.0):
    return {"synthetic": {"sigma_f": 0.8, "sigma_l": sigma_l, "sigma_n": 0.1,
                          "n": n, "seed": seed}}


scenario = Scenario(
    nodes=tuple(NodeSpec(f"edge-{i:02d}", synthetic(150 + 40 * i, seed=10 + i))
                for i in range(6)),
    target=synthetic(120, seed=99),
    tau=40,
    alpha=0.9,
    normalization="online",
    fit=FitConfig(restarts=4, seed=0),
)

result = run_simulation(scenario)
assert result.ok, result.errors

print(f"historical nodes reported {len(result.feature_records)} features:")
for record in result.feature_records:
    f = record.feature
    print(f"  {record.source_id}: sigma_f={f.sigma_f:.3f} sigma_l={f.sigma_l:.3f} "
          f"sigma_n={f.sigma_n:.3f}  (from {record.n_points} points)")

report = result.target_report
print(f"\ntarget fused {len(report.model_ids)} experts; "
      f"metrics: { {k: round(v, 4) for k, v in report.metrics.items()} }")
print(f"delay = {report.metrics['delay']} (a prediction existed at step 0)")

print("\nwire accounting (bytes per node, both directions):")
for node_id, size in sorted(result.bytes_by_node.items()):
    print(f"  {node_id}: {size}")

print("\nsample wire messages:")
for direction, node_id, line in result.traffic[:2]:
    print(f"  [{direction} {node_id}] {line}")

# privacy audit: no raw observation value appears anywhere in the traffic
from gptdf.data_io import resolve_data_spec

wire = "\n".join(line for _, _, line in result.traffic)
leaks = 0
for node in scenario.nodes:
    for value in resolve_data_spec(node.data).values:
        leaks += json.dumps(float(value)) in wire
print(f"\nraw values found in traffic: {leaks} (expected 0)")
