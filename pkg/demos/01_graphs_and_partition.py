"""Loading a network, partitioning it by degree, and forging tail views.

Every other capability builds on these three: an immutable undirected
graph, tail / head / super-head labels, and training views where head
nodes impersonate tail nodes.
"""
import numpy as np

from degalign import (
    forge_tail_view,
    generate_synthetic_pair,
    load_edge_list,
    partition_by_degree,
    sample_balanced_edges,
)

# Edge lists are plain text: one edge per line, '#' comments allowed.
text = """# a tiny friendship network
0 1
0 2
0 3
0 4
1 2
1 3
2 3
5 0
"""
g = load_edge_list(text)
print(f"loaded {g.num_nodes} nodes, {g.num_edges} edges")
print("degrees:", dict(enumerate(g.degrees.tolist())))

# Degree classes: tails have <= D neighbors, super heads have > M.
part = partition_by_degree(g, tail_threshold=1, super_threshold=4)
print("classes:", part.counts())

# A realistic long-tailed network; the top 10% by degree become super heads.
g1, _, _ = generate_synthetic_pair(500, power_exponent=2.5, noise_edges_on_top=0.1, seed=7)
part1 = partition_by_degree(g1, tail_threshold=5, super_fraction=0.10)
print(f"\nsynthetic: {g1.num_nodes} nodes, {g1.num_edges} edges")
print(f"degree <= 5 fraction: {np.mean(g1.degrees <= 5):.2f}")
print("classes:", part1.counts(), "| super threshold M =", part1.super_threshold)

# Forged views downsample every head's neighborhood to mimic a tail node.
view = forge_tail_view(g1, part1, rng_seed=0)
forged = np.flatnonzero(view.forged)
print(f"\nforged {forged.size} head nodes; effective degrees now in "
      f"[{view.effective_degrees[forged].min()}, {view.effective_degrees[forged].max()}]")
example = int(forged[0])
print(f"node {example}: true degree {g1.degrees[example]} -> "
      f"forged degree {view.effective_degrees[example]}")

# Balanced edge samples drive the topology loss: all edges + equally many non-edges.
sample = sample_balanced_edges(g1, rng_seed=0)
print(f"\nbalanced sample: {int(sample.is_positive.sum())} positives, "
      f"{int((~sample.is_positive).sum())} negatives")
