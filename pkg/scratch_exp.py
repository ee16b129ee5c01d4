"""Scratch experiment: timing + ablation ordering on the synthetic pair."""
import sys
import time

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
from degalign.pipeline import PipelineInputs, run
from dataclasses import replace

n = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
epochs = int(sys.argv[2]) if len(sys.argv) > 2 else 30
seed = int(sys.argv[3]) if len(sys.argv) > 3 else 0
mu = float(sys.argv[4]) if len(sys.argv) > 4 else 0.001

t0 = time.perf_counter()
g1, g2, anchors = generate_synthetic_pair(n, 2.5, 0.1, anchor_overlap=0.8, seed=seed)
print(f"gen: {time.perf_counter()-t0:.2f}s  E1={g1.num_edges} E2={g2.num_edges} "
      f"tail1={np.mean(g1.degrees<=5):.2f} tail2={np.mean(g2.degrees<=5):.2f}")

config = RunConfig(
    dim=64, hidden=64, map_dim=256, epochs=epochs, lr=float(sys.argv[5]) if len(sys.argv) > 5 else 1e-2, seed=seed,
    tail_threshold=5, super_fraction=0.10, topo_weight=0.2, constraint_weight=mu,
    neg_per_anchor=5, selection_cap=256,
    node2vec={"walk_len": 40, "walks_per_node": 5, "window": 5, "epochs": 3},
)
part1 = partition_by_degree(g1, 5, 0.10)
part2 = partition_by_degree(g2, 5, 0.10)
print("part1", part1.counts(), "part2", part2.counts())

train_a, test_a = split_anchors(anchors, part1, part2, "tail_based")
print(f"train anchors={len(train_a)} test={len(test_a)}")

t0 = time.perf_counter()
x1c = node2vec_features(g1, dim=64, walk_len=80, walks_per_node=10, window=10, epochs=4,
                       rng_seed=seed).data
x2c = node2vec_features(g2, dim=64, walk_len=80, walks_per_node=10, window=10, epochs=4,
                       rng_seed=seed + 1).data
x1 = x1c - x1c.mean(axis=0)
x2 = x2c - x2c.mean(axis=0)
print(f"node2vec: {time.perf_counter()-t0:.2f}s")

for ablation in ("full", "no_AP", "no_NR"):
    cfg = replace(config, ablation=ablation)
    t0 = time.perf_counter()
    model = train(cfg, (g1, g2), (x1, x2), train_a)
    rep = evaluate(model, test_a)
    dt = time.perf_counter() - t0
    ep = np.mean(model.history.epoch_seconds)
    print(f"{ablation:6s} mrr={rep.mrr:.4f} hits1={rep.hits[1]:.4f} hits10={rep.hits[10]:.4f} "
          f"train={dt:.1f}s ({ep:.2f}s/epoch) best_ep={model.history.best_epoch} "
          f"loss0={model.history.loss[0]:.1f} lossN={model.history.loss[-1]:.1f}")
    buckets = {b.label(): round(b.mrr, 4) for b in rep.per_bucket if b.count}
    print("   buckets:", buckets)
    sel = model.history.selection_mrr
    print("   train-sel:", [round(sel[i], 3) for i in range(0, len(sel), max(1, len(sel)//12))])
