"""Initial node features from biased-random-walk skip-gram embeddings.

The walker follows the usual second-order scheme: return parameter `p`
biases revisiting the previous node, in-out parameter `q` biases moving
away from it. With p = q = 1 on an unweighted graph the walk is first
order and runs on a fast vectorized path; the general case falls back to
per-walk sampling by cumulative-weight binary search.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graphs import Graph

_SIGMOID_CLIP = 35.0


@dataclass
class FeatureMatrix:
    """Dense N x d node features."""

    data: np.ndarray
    epoch_losses: list[float] | None = None

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])

    @property
    def num_nodes(self) -> int:
        return int(self.data.shape[0])


def load_features(text: str) -> FeatureMatrix:
    """Parse a plain-text matrix: one node per line, d decimal columns."""
    rows: list[list[float]] = []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise ValueError(f"line {lineno}: expected {width} columns, got {len(parts)}")
        try:
            rows.append([float(x) for x in parts])
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric entry") from None
    if not rows:
        raise ValueError("empty feature file")
    data = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise ValueError("feature file contains non-finite values")
    return FeatureMatrix(data)


def save_features(matrix: FeatureMatrix) -> str:
    return "\n".join(" ".join(repr(float(x)) for x in row) for row in matrix.data) + "\n"


def _walks_first_order(g: Graph, walk_len: int, walks_per_node: int, seed: int) -> np.ndarray:
    """All walks for an unweighted first-order walker, -1 padded after dead ends."""
    n = g.num_nodes
    walks = np.full((walks_per_node * n, walk_len), -1, dtype=np.int64)
    deg = g.degrees
    for r in range(walks_per_node):
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x3A1C, r)))
        cur = np.arange(n, dtype=np.int64)
        block = walks[r * n : (r + 1) * n]
        block[:, 0] = cur
        alive = deg[cur] > 0
        for t in range(1, walk_len):
            if not alive.any():
                break
            u = rng.random(n)
            act = np.flatnonzero(alive)
            offs = (u[act] * deg[cur[act]]).astype(np.int64)
            nxt = g.indices[g.indptr[cur[act]] + offs]
            cur = cur.copy()
            cur[act] = nxt
            block[act, t] = nxt
            alive = alive & (deg[cur] > 0)
    return walks


def _step_weights(g: Graph, prev: int, cur: int, p: float, q: float) -> np.ndarray:
    nbrs = g.adjacency[cur]
    w = g.csr_weights[g.indptr[cur] : g.indptr[cur + 1]].copy()
    if prev >= 0:
        back = nbrs == prev
        prev_nbrs = g.adjacency[prev]
        pos = np.searchsorted(prev_nbrs, nbrs)
        pos = np.minimum(pos, max(prev_nbrs.shape[0] - 1, 0))
        common = prev_nbrs.shape[0] > 0
        near = (prev_nbrs[pos] == nbrs) if common else np.zeros(nbrs.shape[0], dtype=bool)
        bias = np.where(back, 1.0 / p, np.where(near, 1.0, 1.0 / q))
        w = w * bias
    return w


def _walks_second_order(
    g: Graph, walk_len: int, walks_per_node: int, p: float, q: float, seed: int
) -> np.ndarray:
    n = g.num_nodes
    walks = np.full((walks_per_node * n, walk_len), -1, dtype=np.int64)
    for r in range(walks_per_node):
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x3A1C, r)))
        for start in range(n):
            row = walks[r * n + start]
            row[0] = start
            prev, cur = -1, start
            for t in range(1, walk_len):
                nbrs = g.adjacency[cur]
                if nbrs.shape[0] == 0:
                    break
                w = _step_weights(g, prev, cur, p, q)
                cum = np.cumsum(w)
                j = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
                j = min(j, nbrs.shape[0] - 1)
                prev, cur = cur, int(nbrs[j])
                row[t] = cur
    return walks


def _skipgram_pairs(
    walks: np.ndarray, window: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Center/context pairs with per-center dynamic window.

    Each token draws an effective width uniform in 1..window (the usual
    skip-gram behavior), which also weights nearby contexts more heavily.
    """
    widths = rng.integers(1, window + 1, size=walks.shape)
    centers, contexts = [], []
    for off in range(1, window + 1):
        left = walks[:, :-off]
        right = walks[:, off:]
        ok = (left >= 0) & (right >= 0)
        fwd = ok & (widths[:, :-off] >= off)   # left token as center
        back = ok & (widths[:, off:] >= off)   # right token as center
        centers.append(left[fwd].ravel())
        contexts.append(right[fwd].ravel())
        centers.append(right[back].ravel())
        contexts.append(left[back].ravel())
    return np.concatenate(centers), np.concatenate(contexts)


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, -_SIGMOID_CLIP, _SIGMOID_CLIP)
    return -np.log1p(np.exp(-x))


def node2vec_features(
    g: Graph,
    dim: int = 256,
    walk_len: int = 80,
    walks_per_node: int = 10,
    window: int = 10,
    p: float = 1.0,
    q: float = 1.0,
    negatives: int = 5,
    epochs: int = 5,
    rng_seed: int = 0,
    batch_size: int = 8192,
) -> FeatureMatrix:
    """Train skip-gram embeddings over biased random walks.

    Deterministic per seed (single-threaded). On a graph with no edges the
    result is an all-zero matrix with a warning; isolated nodes in a
    nonempty graph keep their initialization row.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    n = g.num_nodes
    rng = np.random.default_rng(np.random.SeedSequence((int(rng_seed), 0x57F0)))
    if g.num_edges == 0:
        warnings.warn("graph has no edges; returning zero features", stacklevel=2)
        return FeatureMatrix(np.zeros((n, dim)), epoch_losses=[])

    # 32-bit internals: the training loop is memory-bound, and downstream
    # consumers re-cast to 64-bit anyway
    w_in = ((rng.random((n, dim)) - 0.5) / dim).astype(np.float32)
    w_out = np.zeros((n, dim), dtype=np.float32)

    unweighted = bool(np.all(g.edge_weights == 1.0))
    if p == 1.0 and q == 1.0 and unweighted:
        walks = _walks_first_order(g, walk_len, walks_per_node, rng_seed)
    else:
        walks = _walks_second_order(g, walk_len, walks_per_node, p, q, rng_seed)

    centers, contexts = _skipgram_pairs(walks, window, rng)
    if centers.size == 0:
        warnings.warn("walk corpus produced no training pairs", stacklevel=2)
        return FeatureMatrix(w_in.astype(np.float64), epoch_losses=[])

    # unigram^0.75 negative table over corpus frequencies
    freq = np.bincount(walks[walks >= 0], minlength=n).astype(np.float64)
    noise = freq**0.75
    noise_cum = np.cumsum(noise / noise.sum())

    # small corpora need many sequential updates to bootstrap from zero
    batch_size = int(min(batch_size, max(centers.size // 256, 64)))
    total_batches = epochs * ((centers.size + batch_size - 1) // batch_size)
    lr_start, lr_end = 0.025, 0.0001
    batch_idx = 0
    epoch_losses: list[float] = []
    for _ in range(epochs):
        order = rng.permutation(centers.size)
        loss_sum, loss_terms = 0.0, 0
        for lo in range(0, centers.size, batch_size):
            sel = order[lo : lo + batch_size]
            cen, ctx = centers[sel], contexts[sel]
            b = cen.shape[0]
            negs = np.searchsorted(noise_cum, rng.random((b, negatives)), side="right")
            negs = np.minimum(negs, n - 1)

            h = w_in[cen]
            v_pos = w_out[ctx]
            v_neg = w_out[negs]
            pos_dot = np.einsum("bd,bd->b", h, v_pos)
            neg_dot = np.einsum("bd,bkd->bk", h, v_neg)
            loss_sum += float(-np.sum(_log_sigmoid(pos_dot)) - np.sum(_log_sigmoid(-neg_dot)))
            loss_terms += b

            frac = batch_idx / max(total_batches - 1, 1)
            lr = lr_start + (lr_end - lr_start) * frac
            batch_idx += 1

            g_pos = 1.0 / (1.0 + np.exp(-np.clip(pos_dot, -_SIGMOID_CLIP, _SIGMOID_CLIP))) - 1.0
            g_neg = 1.0 / (1.0 + np.exp(-np.clip(neg_dot, -_SIGMOID_CLIP, _SIGMOID_CLIP)))
            grad_h = g_pos[:, None] * v_pos + np.einsum("bk,bkd->bd", g_neg, v_neg)
            _averaged_row_update(w_in, cen, grad_h, lr)
            out_idx = np.concatenate([ctx, negs.ravel()])
            out_grad = np.concatenate(
                [g_pos[:, None] * h, (g_neg[:, :, None] * h[:, None, :]).reshape(-1, dim)]
            )
            _averaged_row_update(w_out, out_idx, out_grad, lr)
        epoch_losses.append(loss_sum / max(loss_terms, 1))
        if not np.all(np.isfinite(w_in)):
            raise FloatingPointError("non-finite embedding values during training")

    return FeatureMatrix(w_in.astype(np.float64), epoch_losses=epoch_losses)


def _averaged_row_update(
    matrix: np.ndarray, idx: np.ndarray, grads: np.ndarray, lr: float
) -> None:
    """Apply the mean gradient per touched row (keeps hub updates bounded).

    Accumulation runs as a sparse one-hot transpose-matmul, much faster
    than scattered adds for these batch sizes.
    """
    b, n = idx.shape[0], matrix.shape[0]
    onehot = sp.csr_matrix(
        (np.ones(b, dtype=matrix.dtype), idx.astype(np.int32), np.arange(b + 1, dtype=np.int32)),
        shape=(b, n),
    )
    sums = onehot.T @ grads
    counts = np.maximum(np.bincount(idx, minlength=n), 1).astype(matrix.dtype)
    matrix -= lr * sums / counts[:, None]
