"""Synthetic long-tailed graph pairs with known ground-truth alignment.

Graph 1 realizes a power-law degree sequence over latent positions on a
circle: edge probabilities follow expected-degree products damped by
angular distance, mirroring the homophily of real social graphs (without
it, independently embedded copies share no transferable geometry). Graph 2
is a perturbed, relabeled copy: edges survive independent dropout, and
extra noise edges attach preferentially to high-degree nodes, so the copy
exhibits both missing tail neighborhoods and polluted hubs. Anchors map a
sampled subset of nodes to their relabeled counterparts.
"""
from __future__ import annotations

import numpy as np

from .graphs import Graph
from .matching import AnchorSet

_DEGREE_FLOOR = 2.5
_LOCALITY = 0.35  # radians; smaller = tighter communities


def _power_law_degrees(n: int, exponent: float, rng: np.random.Generator) -> np.ndarray:
    """Floor of Pareto draws with tail index exponent-1, capped at n/8."""
    u = rng.random(n)
    x = _DEGREE_FLOOR * u ** (-1.0 / (exponent - 1.0))
    cap = max(int(n / 8), 8)
    return np.minimum(np.floor(x).astype(np.int64), min(cap, n - 1))


def _geometric_expected_degree_graph(
    degrees: np.ndarray, n: int, rng: np.random.Generator
) -> Graph:
    """Bernoulli edges with p proportional to degree product and locality.

    The angular kernel integrates to 1 over uniform positions, so expected
    degrees still track the sampled sequence.
    """
    w = degrees.astype(np.float64)
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    total = w.sum()
    kernel_mean = (_LOCALITY / np.pi) * (1.0 - np.exp(-np.pi / _LOCALITY))
    chunks = []
    block = max(1, min(n, (1 << 22) // max(n, 1)))
    cols = np.arange(n)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        rows = np.arange(lo, hi)
        gap = np.abs(theta[rows][:, None] - theta[cols][None, :])
        gap = np.minimum(gap, 2.0 * np.pi - gap)
        p = (w[rows][:, None] * w[cols][None, :] / total) * np.exp(-gap / _LOCALITY) / kernel_mean
        hit = (rng.random((hi - lo, n)) < p) & (cols[None, :] > rows[:, None])
        a, b = np.nonzero(hit)
        chunks.append(np.stack([rows[a], cols[b]], axis=1))
    edges = np.concatenate(chunks, axis=0)
    return Graph(n, edges)


def _preferential_noise(
    base: Graph, count: int, rng: np.random.Generator, existing: set[tuple[int, int]]
) -> list[tuple[int, int]]:
    """New non-edges between high-degree nodes.

    Both endpoints are drawn with probability proportional to degree
    squared: the pollution concentrates on hubs (where real-world noisy
    follows accumulate) and, hubs being spread across the latent circle,
    each noise edge is typically a long-range, geometry-breaking link.
    Low-degree nodes keep their scarce genuine edges.
    """
    weights = base.degrees.astype(np.float64) ** 2 + 1.0
    cum = np.cumsum(weights / weights.sum())
    chosen: set[tuple[int, int]] = set()
    attempts = 0
    while len(chosen) < count and attempts < 50 * max(count, 1):
        attempts += 1
        u = int(np.searchsorted(cum, rng.random(), side="right"))
        u = min(u, base.num_nodes - 1)
        v = int(np.searchsorted(cum, rng.random(), side="right"))
        v = min(v, base.num_nodes - 1)
        if u == v:
            continue
        key = (min(u, v), max(u, v))
        if key in existing or key in chosen:
            continue
        chosen.add(key)
    return sorted(chosen)


def generate_synthetic_pair(
    n: int,
    power_exponent: float = 2.5,
    noise_edges_on_top: float = 0.1,
    anchor_overlap: float = 0.8,
    seed: int = 0,
    edge_dropout: float = 0.2,
) -> tuple[Graph, Graph, AnchorSet]:
    """Build two alignable networks and their ground-truth anchor pairs.

    Deterministic per seed. With dropout and noise both zero, graph 2 is an
    isomorphic relabeling of graph 1 and the anchors are the identity map
    under that relabeling.
    """
    if n < 20:
        raise ValueError("n must be at least 20")
    if power_exponent <= 2.0:
        raise ValueError("power_exponent must exceed 2 for a finite mean degree")
    if not (0.0 < anchor_overlap <= 1.0):
        raise ValueError("anchor_overlap must lie in (0, 1]")
    if not (0.0 <= edge_dropout < 1.0):
        raise ValueError("edge_dropout must lie in [0, 1)")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x57A7)))

    g1 = None
    for _ in range(10):
        degrees = _power_law_degrees(n, power_exponent, rng)
        g1 = _geometric_expected_degree_graph(degrees, n, rng)
        if g1.num_edges > 0:
            break
        g1 = None
    if g1 is None:
        raise RuntimeError("could not realize a feasible degree sequence in 10 attempts")

    # perturbed copy: dropout, then hub-seeking noise edges
    if edge_dropout > 0.0:
        keep = rng.random(g1.num_edges) >= edge_dropout
        kept_edges = g1.edges[keep]
    else:
        kept_edges = g1.edges
    edge_set = {(int(a), int(b)) for a, b in kept_edges}
    noise_count = int(round(noise_edges_on_top * g1.num_edges))
    if noise_count:
        edge_set.update(_preferential_noise(g1, noise_count, rng, edge_set))
    edges2 = np.array(sorted(edge_set), dtype=np.int64).reshape(-1, 2)
    if edges2.shape[0] == 0:
        raise RuntimeError("perturbation removed every edge; lower edge_dropout")

    # relabel graph 2 and map the anchor subset through the permutation
    perm = rng.permutation(n).astype(np.int64)
    relabeled = perm[edges2]
    g2 = Graph(n, relabeled)
    overlap = max(1, int(round(anchor_overlap * n)))
    subset = np.sort(rng.choice(n, size=overlap, replace=False))
    anchors = AnchorSet(np.stack([subset, perm[subset]], axis=1), role="all")
    return g1, g2, anchors
