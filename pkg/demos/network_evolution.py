#!/usr/bin/env python3
"""Walk through one edge-change step, then watch a network drift for a year.

The evolution of the dependence graph is driven by two ingredients: how MANY
edges to add/delete (truncated Poisson counts with GARCH-like means) and
WHICH edges move (pair activeness = product of node activeness levels).
This script first replays the canonical five-node single step, then runs the
full generative model for 250 days and prints summary statistics.
"""

import numpy as np

from dynbn import Dag, build_addition_list, build_deletion_list, evolution_trace, network_stats
from dynbn.simulate import demo_params, simulate_dataset

# --- one explicit step -------------------------------------------------------

g = Dag(5, [(0, 2), (1, 2), (2, 3), (3, 4)])
w = [0.1, 0.2, 0.3, 0.4, 0.5]

print("starting network:", sorted((u + 1, v + 1) for u, v in g.edges))
print("\ndeletion list (ascending pair activeness):")
for u, v, w_uv in build_deletion_list(g, w):
    print(f"  {u + 1} -> {v + 1}   w_ij = {w_uv:.3f}")

deleted, added, g_new = evolution_trace(g, a=2, d=1, w=w)
print("\ndeleted:", [(u + 1, v + 1) for u, v in deleted])

print("\naddition candidates after deletion (descending, deleted edge barred):")
for u, v, w_uv in build_addition_list(g.remove(*deleted[0]), w, forbidden=deleted):
    marker = "  <- added" if (u, v) in added else ""
    print(f"  {u + 1} -> {v + 1}   w_ij = {w_uv:.3f}{marker}")

print("\nresulting network:", sorted((u + 1, v + 1) for u, v in g_new.edges))

# --- a year of simulated evolution -------------------------------------------

rng = np.random.default_rng(7)
theta = demo_params(8, rng)
_, truth = simulate_dataset(theta, 250, rng)

print("\n250-day simulated trajectory (8 nodes):")
print("  total additions:", truth.theta.a_counts.sum(),
      " total deletions:", truth.theta.d_counts.sum())
for t in (1, 50, 100, 150, 200, 250):
    stats = network_stats(truth.path.state(t).g)
    print(f"  t={t:3d}  edges={stats.edge_count:2d}  density={stats.density:.3f}"
          f"  clustering={stats.clustering:.3f}")
