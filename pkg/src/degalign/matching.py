"""Cross-network mapping, training losses and candidate ranking.

Embeddings of the two graphs live in different coordinate systems until two
separate MLPs project them into one matching space; cosine similarity there
drives both the matching loss and the final ranking.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .encoder import EncoderOutput, MessageStructure, TwoLayerNet
from .graphs import EdgeSample
from .numerics import Tensor


@dataclass(frozen=True)
class AnchorSet:
    """Known same-person account pairs: column 0 source id, column 1 target id."""

    pairs: np.ndarray
    role: str  # "train" or "test"

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "pairs", pairs)
        if pairs.shape[0] and np.unique(pairs[:, 0]).shape[0] != pairs.shape[0]:
            raise ValueError(f"duplicate source ids in {self.role} anchors")

    def __len__(self) -> int:
        return int(self.pairs.shape[0])

    @property
    def sources(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def targets(self) -> np.ndarray:
        return self.pairs[:, 1]

    def validate(self, num_src_nodes: int, num_tgt_nodes: int) -> None:
        if len(self) and (
            self.sources.max() >= num_src_nodes or self.targets.max() >= num_tgt_nodes
        ):
            raise ValueError("anchor id out of range")


@dataclass
class MappingNets:
    """The two per-graph projection MLPs (input d, hidden 2d, output 256)."""

    f1: TwoLayerNet
    f2: TwoLayerNet
    dim_out: int

    @classmethod
    def init(cls, dim_in: int, rng_seed: int, dim_out: int = 256) -> "MappingNets":
        rng = np.random.default_rng(np.random.SeedSequence((int(rng_seed), 0x3A99)))
        return cls(
            f1=TwoLayerNet.init(rng, dim_in, 2 * dim_in, dim_out),
            f2=TwoLayerNet.init(rng, dim_in, 2 * dim_in, dim_out),
            dim_out=dim_out,
        )

    def named_parameters(self):
        yield from self.f1.named_parameters("mapping.f1")
        yield from self.f2.named_parameters("mapping.f2")


def topology_loss(embedding: Tensor, samples: EdgeSample) -> Tensor:
    """Squared gap between stored edge weights and embedding cosines.

    Positives contribute (a_ij - cos)^2, sampled non-edges use a_ij = 0;
    together they realize the balanced reconstruction objective.
    """
    zi = nm.gather_rows(embedding, samples.src)
    zj = nm.gather_rows(embedding, samples.dst)
    sims = nm.cosine_rows(zi, zj)
    return nm.sum_sq(nm.sub(Tensor(samples.weight), sims))


def sample_anchor_negatives(
    anchors: AnchorSet, num_targets: int, negatives_per_anchor: int, rng_seed: int
) -> np.ndarray:
    """Uniform negative targets, distinct and != the true target, per anchor."""
    if num_targets < negatives_per_anchor + 1:
        raise ValueError(
            f"target graph has {num_targets} nodes; need at least {negatives_per_anchor + 1}"
        )
    rng = np.random.default_rng(np.random.SeedSequence((int(rng_seed), 0xA6C4)))
    out = np.empty((len(anchors), negatives_per_anchor), dtype=np.int64)
    for row, true_target in enumerate(anchors.targets):
        chosen: list[int] = []
        while len(chosen) < negatives_per_anchor:
            draw = int(rng.integers(0, num_targets))
            if draw != true_target and draw not in chosen:
                chosen.append(draw)
        out[row] = chosen
    return out


def matching_loss(
    mapped_src: Tensor,
    mapped_tgt: Tensor,
    train_anchors: AnchorSet,
    negatives_per_anchor: int = 5,
    rng_seed: int = 0,
    negatives: np.ndarray | None = None,
) -> Tensor:
    """Pull anchor pairs together, push sampled non-pairs toward orthogonal.

    Each anchor (i, a) contributes (1 - cos(o_i, o_a))^2; each of its
    sampled negatives b adds cos(o_i, o_b)^2 + cos(o_a, o_b)^2.
    """
    if negatives is None:
        negatives = sample_anchor_negatives(
            train_anchors, mapped_tgt.shape[0], negatives_per_anchor, rng_seed
        )
    n, p = negatives.shape
    src = nm.gather_rows(mapped_src, train_anchors.sources)
    tgt = nm.gather_rows(mapped_tgt, train_anchors.targets)
    t_pos = nm.cosine_rows(src, tgt)
    loss = nm.sum_sq(nm.sub(Tensor(np.ones(n)), t_pos))

    src_rep = nm.gather_rows(mapped_src, np.repeat(train_anchors.sources, p))
    tgt_rep = nm.gather_rows(mapped_tgt, np.repeat(train_anchors.targets, p))
    neg = nm.gather_rows(mapped_tgt, negatives.ravel())
    loss = nm.add(loss, nm.sum_sq(nm.cosine_rows(src_rep, neg)))
    loss = nm.add(loss, nm.sum_sq(nm.cosine_rows(tgt_rep, neg)))
    return loss


def constraint_loss(encoded: EncoderOutput) -> Tensor:
    """Keep predicted corrections near zero wherever they should not act.

    Missing-information predictions are penalized on every node that is not
    tail-like (forged heads count as tails), redundancy predictions on every
    node that is not a super head, summed over layers and both stacks.
    """
    struct: MessageStructure = encoded.structure
    not_tail = np.flatnonzero(~struct.tail_like)
    not_super = np.flatnonzero(~struct.super)
    total = Tensor(0.0)
    for missing in encoded.missing_caches:
        if not_tail.size:
            total = nm.add(total, nm.sum_sq(nm.gather_rows(missing, not_tail)))
    for redundant in encoded.redundant_caches:
        if not_super.size:
            total = nm.add(total, nm.sum_sq(nm.gather_rows(redundant, not_super)))
    return total


def total_loss(
    match: Tensor,
    topo: tuple[Tensor, Tensor],
    constraint: tuple[Tensor, Tensor],
    topo_weight: float,
    constraint_weight: float,
) -> Tensor:
    """match + topo_weight * sum(topo) + constraint_weight * sum(constraint)."""
    loss = match
    loss = nm.add(loss, nm.mul(nm.add(topo[0], topo[1]), Tensor(topo_weight)))
    loss = nm.add(loss, nm.mul(nm.add(constraint[0], constraint[1]), Tensor(constraint_weight)))
    return loss


def _normalized(matrix: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.sum(matrix * matrix, axis=1))
    safe = np.where(norms >= nm.NORM_EPS, norms, 1.0)
    out = matrix / safe[:, None]
    out[norms < nm.NORM_EPS] = 0.0
    return out


def rank_candidates(
    source_vec: np.ndarray, target_matrix: np.ndarray, exclude: set[int] | None = None
) -> np.ndarray:
    """Target ids ordered by cosine similarity (desc), ties by ascending id."""
    exclude = exclude or set()
    n = target_matrix.shape[0]
    keep = np.array([i for i in range(n) if i not in exclude], dtype=np.int64)
    if keep.size == 0:
        raise ValueError("empty candidate set")
    sims = _normalized(target_matrix[keep]) @ _normalized(source_vec[None, :])[0]
    order = np.lexsort((keep, -sims))
    return keep[order]


def rank_of_target(
    source_vec: np.ndarray,
    target_matrix: np.ndarray,
    true_target: int,
    exclude: set[int] | None = None,
) -> int:
    """1-based rank of the true target among the non-excluded candidates."""
    ranks = ranks_for_anchors(
        source_vec[None, :], target_matrix, np.array([true_target]), exclude
    )
    return int(ranks[0])


def ranks_for_anchors(
    source_rows: np.ndarray,
    target_matrix: np.ndarray,
    true_targets: np.ndarray,
    exclude: set[int] | None = None,
) -> np.ndarray:
    """1-based rank of each row's true target, sharing one normalized pool.

    Rank ties break by ascending target id, matching rank_candidates. A true
    target missing from the pool is an internal error: the split rules must
    keep every test target rankable.
    """
    exclude = exclude or set()
    n = target_matrix.shape[0]
    if exclude:
        keep = np.setdiff1d(np.arange(n, dtype=np.int64), np.fromiter(exclude, dtype=np.int64))
    else:
        keep = np.arange(n, dtype=np.int64)
    if keep.size == 0:
        raise ValueError("empty candidate set")
    pool = _normalized(target_matrix[keep])
    src = _normalized(np.atleast_2d(source_rows))
    sims = src @ pool.T  # (num_anchors, pool_size)
    pos = np.searchsorted(keep, true_targets)
    if np.any(pos >= keep.size) or np.any(keep[np.minimum(pos, keep.size - 1)] != true_targets):
        raise RuntimeError("a true target was excluded from the candidate pool")
    true_sims = sims[np.arange(sims.shape[0]), pos]
    better = np.sum(sims > true_sims[:, None], axis=1)
    tied_before = np.sum(
        (sims == true_sims[:, None]) & (keep[None, :] < np.asarray(true_targets)[:, None]), axis=1
    )
    return (better + tied_before + 1).astype(np.int64)
