"""Dry run of the acceptance-5/7 harness with candidate settings."""
import sys
import time
from dataclasses import replace

import numpy as np

from degalign import (
    RunConfig,
    evaluate,
    generate_synthetic_pair,
    node2vec_features,
    partition_by_degree,
    split_anchors,
    train,
)

DIM = int(sys.argv[1]) if len(sys.argv) > 1 else 48
EPOCHS = int(sys.argv[2]) if len(sys.argv) > 2 else 240
LR = float(sys.argv[3]) if len(sys.argv) > 3 else 4e-3
SEEDS = [int(s) for s in (sys.argv[4].split(",") if len(sys.argv) > 4 else ["0", "1", "2"])]
WALKS = int(sys.argv[5]) if len(sys.argv) > 5 else 8
N2VEP = int(sys.argv[6]) if len(sys.argv) > 6 else 3

base = RunConfig(
    dim=DIM, hidden=64, map_dim=256, epochs=EPOCHS, lr=LR,
    tail_threshold=5, super_fraction=0.10, topo_weight=0.2, constraint_weight=0.01,
    neg_per_anchor=5, selection_cap=256, selection_every=3,
)

results = {a: [] for a in ("full", "no_AP", "no_NR")}
buckets = {a: [] for a in ("full", "no_AP", "no_NR")}
wall = time.perf_counter()
for seed in SEEDS:
    t0 = time.perf_counter()
    g1, g2, anchors = generate_synthetic_pair(1000, 2.5, 0.1, anchor_overlap=1.0, seed=seed)
    part1 = partition_by_degree(g1, 5, 0.10)
    part2 = partition_by_degree(g2, 5, 0.10)
    tr, te = split_anchors(anchors, part1, part2, "tail_based")
    x1 = node2vec_features(g1, dim=DIM, walk_len=80, walks_per_node=WALKS, window=5,
                           epochs=N2VEP, rng_seed=seed).data
    x2 = node2vec_features(g2, dim=DIM, walk_len=80, walks_per_node=WALKS, window=5,
                           epochs=N2VEP, rng_seed=seed + 10_000).data
    x1 -= x1.mean(axis=0)
    x2 -= x2.mean(axis=0)
    t_feat = time.perf_counter() - t0
    line = [f"seed {seed} feats {t_feat:5.1f}s train/test {len(tr)}/{len(te)}"]
    for ablation in ("full", "no_AP", "no_NR"):
        cfg = replace(base, ablation=ablation, seed=seed)
        t0 = time.perf_counter()
        model = train(cfg, (g1, g2), (x1, x2), tr)
        rep = evaluate(model, te)
        results[ablation].append(rep.mrr)
        buckets[ablation].append([b.mrr for b in rep.per_bucket[:2]])
        line.append(f"{ablation} {rep.mrr:.4f} ({time.perf_counter()-t0:4.0f}s)")
    print("  ".join(line), flush=True)

print(f"\ntotal {time.perf_counter()-wall:.0f}s")
for a in results:
    print(f"{a:6s} mean MRR {np.mean(results[a]):.4f}  per-seed {[round(v,4) for v in results[a]]}")
for a in buckets:
    b = np.mean(buckets[a], axis=0)
    print(f"{a:6s} mean bucket MRR (0,2] {b[0]:.4f}  (2,5] {b[1]:.4f}")
