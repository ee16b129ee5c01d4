"""Undirected social graphs, degree partitions and forged training views.

Graphs are immutable after construction: adjacency is stored per node as a
sorted int array plus a flat CSR copy for vectorized work. Edge lists use
the common text format (one `src dst [weight]` line per edge, `#` comments
allowed); files are symmetrized on load.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

TAIL, HEAD, SUPER = 0, 1, 2

_CLASS_NAMES = {TAIL: "tail", HEAD: "head", SUPER: "super_head"}


class Graph:
    """Immutable undirected graph over nodes 0..num_nodes-1.

    `edges` is the canonical (E, 2) array with src < dst; `edge_weights`
    aligns with it. `adjacency[i]` is the sorted neighbor array of node i.
    """

    __slots__ = (
        "num_nodes",
        "edges",
        "edge_weights",
        "adjacency",
        "indptr",
        "indices",
        "csr_weights",
        "degrees",
        "_edge_keys",
    )

    def __init__(self, num_nodes: int, edges: np.ndarray, edge_weights: np.ndarray | None = None):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= num_nodes:
                raise ValueError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self-loops are not allowed")
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        order = np.lexsort((hi, lo))
        canon = np.stack([lo[order], hi[order]], axis=1)
        if canon.shape[0] > 1 and np.any(np.all(np.diff(canon, axis=0) == 0, axis=1)):
            raise ValueError("duplicate edges are not allowed")
        self.num_nodes = int(num_nodes)
        self.edges = canon
        if edge_weights is None:
            self.edge_weights = np.ones(canon.shape[0], dtype=np.float64)
        else:
            w = np.asarray(edge_weights, dtype=np.float64)[order]
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("edge weights must be finite and nonnegative")
            self.edge_weights = w

        # CSR over both directions
        src = np.concatenate([canon[:, 0], canon[:, 1]])
        dst = np.concatenate([canon[:, 1], canon[:, 0]])
        perm = np.lexsort((dst, src))
        self.indices = dst[perm]
        self.csr_weights = np.concatenate([self.edge_weights, self.edge_weights])[perm]
        counts = np.bincount(src, minlength=num_nodes)
        self.indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        self.degrees = counts.astype(np.int64)
        self.adjacency = [
            self.indices[self.indptr[i] : self.indptr[i + 1]] for i in range(num_nodes)
        ]
        self._edge_keys = canon[:, 0] * np.int64(num_nodes) + canon[:, 1]

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def neighbors(self, i: int) -> np.ndarray:
        return self.adjacency[i]

    def has_edge(self, i: int, j: int) -> bool:
        row = self.adjacency[i]
        k = np.searchsorted(row, j)
        return bool(k < row.shape[0] and row[k] == j)

    def has_edges(self, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
        """Vectorized adjacency test for arrays of node pairs."""
        lo = np.minimum(src, dst).astype(np.int64)
        hi = np.maximum(src, dst).astype(np.int64)
        keys = lo * np.int64(self.num_nodes) + hi
        pos = np.searchsorted(self._edge_keys, keys)
        pos = np.minimum(pos, max(self._edge_keys.shape[0] - 1, 0))
        if self._edge_keys.shape[0] == 0:
            return np.zeros(keys.shape, dtype=bool)
        return self._edge_keys[pos] == keys

    def to_edge_list_text(self) -> str:
        lines = [f"{a} {b}" for a, b in self.edges]
        return "\n".join(lines) + ("\n" if lines else "")


def load_edge_list(text: str) -> Graph:
    """Parse an edge-list document into a Graph.

    Each non-comment line is `src dst` or `src dst weight` with nonnegative
    integer ids. Reverse duplicates collapse into one undirected edge;
    self-loops are dropped with a warning carrying the count.
    """
    pairs: dict[tuple[int, int], float] = {}
    max_id = -1
    self_loops = 0
    saw_line = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        saw_line = True
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ValueError(f"line {lineno}: expected 'src dst [weight]', got {raw!r}")
        try:
            a, b = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise ValueError(f"line {lineno}: malformed edge {raw!r}") from None
        if a < 0 or b < 0:
            raise ValueError(f"line {lineno}: negative node id in {raw!r}")
        max_id = max(max_id, a, b)
        if a == b:
            self_loops += 1
            continue
        key = (a, b) if a < b else (b, a)
        pairs.setdefault(key, w)
    if not saw_line:
        raise ValueError("empty edge list")
    if self_loops:
        warnings.warn(f"dropped {self_loops} self-loop(s)", stacklevel=2)
    edges = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    weights = np.array([pairs[tuple(e)] for e in edges], dtype=np.float64)
    return Graph(max_id + 1, edges, weights)


def load_anchor_pairs(text: str) -> np.ndarray:
    """Parse an anchor file: column 1 source id, column 2 target id."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'src_id tgt_id', got {raw!r}")
        try:
            rows.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ValueError(f"line {lineno}: malformed anchor {raw!r}") from None
    if not rows:
        raise ValueError("empty anchor list")
    return np.array(rows, dtype=np.int64)


@dataclass(frozen=True)
class DegreePartition:
    """Tail / head / super-head labels with the thresholds that induced them."""

    tail_threshold: int
    super_threshold: int
    class_of: np.ndarray  # (N,) int8 with values TAIL / HEAD / SUPER

    def __post_init__(self):
        if self.tail_threshold >= self.super_threshold:
            raise ValueError(
                f"tail threshold {self.tail_threshold} must be below super threshold"
                f" {self.super_threshold}"
            )

    @property
    def tail_mask(self) -> np.ndarray:
        return self.class_of == TAIL

    @property
    def head_mask(self) -> np.ndarray:
        return self.class_of == HEAD

    @property
    def super_mask(self) -> np.ndarray:
        return self.class_of == SUPER

    def counts(self) -> dict[str, int]:
        return {name: int(np.sum(self.class_of == c)) for c, name in _CLASS_NAMES.items()}


def partition_by_degree(
    g: Graph,
    tail_threshold: int = 5,
    super_fraction: float = 0.10,
    super_threshold: int | None = None,
) -> DegreePartition:
    """Label every node tail (deg <= D), super head (deg > M) or head.

    Without an explicit `super_threshold`, M is the degree of the
    (k+1)-th node in (degree desc, id asc) order for k = ceil(fraction*N),
    so the k highest-degree nodes exceed it unless ties at the cutoff
    shrink the super class.
    """
    if tail_threshold < 0:
        raise ValueError("tail threshold must be nonnegative")
    deg = g.degrees
    if super_threshold is None:
        if not (0.0 < super_fraction < 1.0):
            raise ValueError("super_fraction must lie in (0, 1)")
        k = int(np.ceil(super_fraction * g.num_nodes))
        if k >= g.num_nodes:
            raise ValueError("super_fraction leaves no head nodes")
        order = np.lexsort((np.arange(g.num_nodes), -deg))
        super_threshold = int(deg[order[k]])
        if super_threshold <= tail_threshold:
            raise ValueError(
                f"computed super threshold {super_threshold} <= tail threshold "
                f"{tail_threshold}; pass an explicit super_threshold"
            )
    cls = np.full(g.num_nodes, HEAD, dtype=np.int8)
    cls[deg <= tail_threshold] = TAIL
    cls[deg > super_threshold] = SUPER
    return DegreePartition(int(tail_threshold), int(super_threshold), cls)


@dataclass
class GraphView:
    """A training view of a graph where some head nodes mimic tail nodes.

    Forged nodes keep a random subset (size <= tail threshold) of their true
    neighbors; everyone else keeps their full neighborhood. Only each node's
    own outgoing aggregation is reduced; the base graph is untouched.
    """

    base: Graph
    effective_adjacency: list[np.ndarray]
    forged: np.ndarray  # (N,) bool
    effective_degrees: np.ndarray = field(init=False)
    msg_src: np.ndarray = field(init=False)
    msg_dst: np.ndarray = field(init=False)

    def __post_init__(self):
        self.effective_degrees = np.array(
            [a.shape[0] for a in self.effective_adjacency], dtype=np.int64
        )
        # flat (dst <- src) arrays for vectorized message passing
        self.msg_dst = np.repeat(
            np.arange(self.base.num_nodes, dtype=np.int64), self.effective_degrees
        )
        if self.base.num_nodes:
            self.msg_src = np.concatenate(
                [a for a in self.effective_adjacency if a.size]
                or [np.zeros(0, dtype=np.int64)]
            )
        else:
            self.msg_src = np.zeros(0, dtype=np.int64)

    @property
    def num_nodes(self) -> int:
        return self.base.num_nodes


def unforged_view(g: Graph) -> GraphView:
    """The identity view: every node keeps its full neighborhood."""
    return GraphView(g, list(g.adjacency), np.zeros(g.num_nodes, dtype=bool))


def forge_tail_view(g: Graph, part: DegreePartition, rng_seed: int) -> GraphView:
    """Down-sample every head node's neighborhood to mimic a tail node.

    Each head independently keeps a uniform subset of k neighbors with k
    drawn uniformly from 1..tail_threshold. Deterministic per seed.
    """
    rng = np.random.default_rng(np.random.SeedSequence((int(rng_seed), 0x666F)))
    eff = list(g.adjacency)
    forged = np.zeros(g.num_nodes, dtype=bool)
    d = part.tail_threshold
    if d < 1:
        return GraphView(g, eff, forged)
    for i in np.flatnonzero(part.head_mask):
        neighbors = g.adjacency[i]
        k = int(rng.integers(1, d + 1))
        if k >= neighbors.shape[0]:
            kept = neighbors
        else:
            kept = np.sort(rng.choice(neighbors, size=k, replace=False))
        eff[i] = kept
        forged[i] = True
    return GraphView(g, eff, forged)


@dataclass(frozen=True)
class EdgeSample:
    """Balanced positive / negative node pairs for the topology loss."""

    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray  # a_ij: stored weight for positives, 0 for negatives
    is_positive: np.ndarray

    def __len__(self) -> int:
        return int(self.src.shape[0])

    def __iter__(self):
        lab = np.where(self.is_positive, "pos", "neg")
        return iter(zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist(), lab.tolist()))


def sample_balanced_edges(g: Graph, rng_seed: int) -> EdgeSample:
    """All positive edges plus an equal number of uniform non-edges.

    Negatives are rejection-sampled with replacement (duplicates allowed).
    A complete graph yields zero negatives with a warning.
    """
    if g.num_edges == 0:
        raise ValueError("graph has no edges to sample")
    rng = np.random.default_rng(np.random.SeedSequence((int(rng_seed), 0xED6E)))
    n, m = g.num_nodes, g.num_edges
    if m == n * (n - 1) // 2:
        warnings.warn("complete graph: no negative pairs exist", stacklevel=2)
        neg = np.zeros((0, 2), dtype=np.int64)
    else:
        out = []
        need = m
        while need > 0:
            cand = rng.integers(0, n, size=(max(2 * need, 64), 2))
            cand = cand[cand[:, 0] != cand[:, 1]]
            if cand.size:
                cand = cand[~g.has_edges(cand[:, 0], cand[:, 1])]
            take = cand[:need]
            if take.size:
                out.append(take)
                need -= take.shape[0]
        neg = np.concatenate(out, axis=0)
    src = np.concatenate([g.edges[:, 0], neg[:, 0]])
    dst = np.concatenate([g.edges[:, 1], neg[:, 1]])
    weight = np.concatenate([g.edge_weights, np.zeros(neg.shape[0])])
    is_pos = np.concatenate([np.ones(m, dtype=bool), np.zeros(neg.shape[0], dtype=bool)])
    return EdgeSample(src, dst, weight, is_pos)
