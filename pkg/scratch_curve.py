"""Trace test MRR across training epochs for full vs ablations (one pass)."""
import sys
import time

import numpy as np

from degalign import (
    RunConfig, MessageStructure, evaluate, forge_tail_view, forward_pair,
    generate_synthetic_pair, node2vec_features, partition_by_degree,
    sample_balanced_edges, split_anchors, unforged_view,
)
from degalign import numerics as nm
from degalign.matching import (constraint_loss, matching_loss, ranks_for_anchors,
                               sample_anchor_negatives, topology_loss, total_loss)
from degalign.metrics import mrr
from degalign.pipeline import ModelParams, _derive_seed

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
EPOCHS = int(sys.argv[2]) if len(sys.argv) > 2 else 320
LR = float(sys.argv[3]) if len(sys.argv) > 3 else 4e-3
CHECK = sorted({int(x) for x in np.linspace(20, EPOCHS, 14).astype(int)})

g1, g2, anchors = generate_synthetic_pair(1000, 2.5, 0.1, anchor_overlap=0.8, seed=seed)
part1 = partition_by_degree(g1, 5, 0.10); part2 = partition_by_degree(g2, 5, 0.10)
tr, te = split_anchors(anchors, part1, part2, "tail_based")
x1 = node2vec_features(g1, dim=64, walk_len=80, walks_per_node=10, window=10, epochs=4,
                       rng_seed=seed).data
x2 = node2vec_features(g2, dim=64, walk_len=80, walks_per_node=10, window=10, epochs=4,
                       rng_seed=seed + 10_000).data
x1 -= x1.mean(axis=0); x2 -= x2.mean(axis=0)
print(f"seed {seed} train/test {len(tr)}/{len(te)}  lr {LR}", flush=True)

config = RunConfig(dim=64, hidden=64, map_dim=256, epochs=EPOCHS, lr=LR, seed=seed,
                   tail_threshold=5, super_fraction=0.10, neg_per_anchor=5)

for ablation in ("full", "no_AP", "no_NR"):
    t0 = time.perf_counter()
    params = ModelParams.init(64, config)
    plist = list(params.parameters())
    ev1, ev2 = unforged_view(g1), unforged_view(g2)
    es1, es2 = MessageStructure(ev1, part1), MessageStructure(ev2, part2)
    curve = []
    forging = ablation != "no_AP"
    for epoch in range(EPOCHS):
        if forging:
            v1 = forge_tail_view(g1, part1, _derive_seed(config.seed + epoch, 31, 1))
            v2 = forge_tail_view(g2, part2, _derive_seed(config.seed + epoch, 31, 2))
            structs = None
        else:
            v1, v2, structs = ev1, ev2, (es1, es2)
        e1, e2 = forward_pair(v1, v2, part1, part2, x1, x2, params.encoder,
                              ablation=ablation, structures=structs)
        o1 = params.mapping.f1(e1.embedding); o2 = params.mapping.f2(e2.embedding)
        s1 = sample_balanced_edges(g1, _derive_seed(config.seed, 41, epoch, 1))
        s2 = sample_balanced_edges(g2, _derive_seed(config.seed, 41, epoch, 2))
        negs = sample_anchor_negatives(tr, g2.num_nodes, 5, _derive_seed(config.seed, 42, epoch))
        loss = total_loss(matching_loss(o1, o2, tr, negatives=negs),
                          (topology_loss(e1.embedding, s1), topology_loss(e2.embedding, s2)),
                          (constraint_loss(e1), constraint_loss(e2)),
                          0.2, 0.001)
        nm.backward(loss)
        nm.adam_step(plist, lr=config.lr)
        if (epoch + 1) in CHECK:
            ee1, ee2 = forward_pair(ev1, ev2, part1, part2, x1, x2, params.encoder,
                                    ablation=ablation, structures=(es1, es2))
            m1 = params.mapping.f1(ee1.embedding).data
            m2 = params.mapping.f2(ee2.embedding).data
            excl = {int(t) for t in tr.targets}
            ranks = ranks_for_anchors(m1[te.sources], m2, te.targets, excl)
            curve.append((epoch + 1, round(mrr(ranks), 4)))
    print(f"{ablation:6s} ({time.perf_counter()-t0:4.0f}s):", curve, flush=True)
