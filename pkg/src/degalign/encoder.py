"""Degree-aware neighborhood encoder shared across both networks.

Two aggregator stacks run side by side: a mean-style convolution that sees
global structure and an attention aggregator that weighs each node's 1-hop
neighborhood. Every layer repairs the aggregation set before pooling: tail
nodes (real or forged) receive a predicted missing-information message,
super-head nodes subtract a predicted redundancy message, head nodes are
left alone. Both stacks use the same parameters for the two input graphs,
and the final embedding concatenates the two stack outputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from .graphs import DegreePartition, GraphView
from .numerics import Parameter, SparsePattern, Tensor

GLOBAL, LOCAL = "global", "local"
FULL, NO_AP, NO_NR = "full", "no_AP", "no_NR"
ABLATIONS = (FULL, NO_AP, NO_NR)

_ATTN_SLOPE = 0.2


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape if shape is not None else (fan_in, fan_out))


@dataclass
class TwoLayerNet:
    """Fully connected net: linear, tanh, linear."""

    w1: Parameter
    b1: Parameter
    w2: Parameter
    b2: Parameter

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        dim_in: int,
        dim_hidden: int,
        dim_out: int,
        zero_output: bool = False,
    ) -> "TwoLayerNet":
        w2 = np.zeros((dim_hidden, dim_out)) if zero_output else _glorot(rng, dim_hidden, dim_out)
        return cls(
            w1=Parameter(_glorot(rng, dim_in, dim_hidden)),
            b1=Parameter(np.zeros(dim_hidden)),
            w2=Parameter(w2),
            b2=Parameter(np.zeros(dim_out)),
        )

    def __call__(self, x: Tensor) -> Tensor:
        hidden = nm.tanh(nm.add(nm.matmul(x, self.w1), self.b1))
        return nm.add(nm.matmul(hidden, self.w2), self.b2)

    def named_parameters(self, prefix: str):
        yield f"{prefix}.w1", self.w1
        yield f"{prefix}.b1", self.b1
        yield f"{prefix}.w2", self.w2
        yield f"{prefix}.b2", self.b2


@dataclass
class LayerParams:
    """One aggregation layer of one stack.

    The correction machinery lives in the layer's input space: the shared
    missing/redundant vectors, the scaling map applied to the local context
    and the two shift nets all produce vectors of size dim_in. The shared
    vectors and the shift nets' output layers start at zero, so a freshly
    initialized encoder reproduces plain aggregation exactly.
    """

    dim_in: int
    dim_out: int
    weight: Parameter
    attn_query: Parameter | None
    attn_key: Parameter | None
    missing_global: Parameter
    redundant_global: Parameter
    scale_weight: Parameter
    shift_missing: TwoLayerNet
    shift_redundant: TwoLayerNet

    @classmethod
    def init(cls, rng: np.random.Generator, dim_in: int, dim_out: int, kind: str) -> "LayerParams":
        attn_q = attn_k = None
        if kind == LOCAL:
            attn_q = Parameter(_glorot(rng, 2 * dim_out, 1, shape=(dim_out,)))
            attn_k = Parameter(_glorot(rng, 2 * dim_out, 1, shape=(dim_out,)))
        # narrow shift nets: the correction signal is low-rank, and a wide
        # hidden layer just hands the few corrected nodes room to overfit
        hidden = max(4, dim_in // 4)
        return cls(
            dim_in=dim_in,
            dim_out=dim_out,
            weight=Parameter(_glorot(rng, dim_in, dim_out)),
            attn_query=attn_q,
            attn_key=attn_k,
            missing_global=Parameter(np.zeros(dim_in)),
            redundant_global=Parameter(np.zeros(dim_in)),
            scale_weight=Parameter(_glorot(rng, 2 * dim_in, dim_in)),
            shift_missing=TwoLayerNet.init(rng, 2 * dim_in, hidden, dim_in, zero_output=True),
            shift_redundant=TwoLayerNet.init(rng, 2 * dim_in, hidden, dim_in, zero_output=True),
        )

    def named_parameters(self, prefix: str):
        yield f"{prefix}.weight", self.weight
        if self.attn_query is not None:
            yield f"{prefix}.attn_query", self.attn_query
            yield f"{prefix}.attn_key", self.attn_key
        yield f"{prefix}.missing_global", self.missing_global
        yield f"{prefix}.redundant_global", self.redundant_global
        yield f"{prefix}.scale_weight", self.scale_weight
        yield from self.shift_missing.named_parameters(f"{prefix}.shift_missing")
        yield from self.shift_redundant.named_parameters(f"{prefix}.shift_redundant")


@dataclass
class EncoderParams:
    """Both aggregator stacks; shared by the two input graphs."""

    dim_in: int
    dim_hidden: int
    dim_out_half: int
    stacks: dict[str, list[LayerParams]]

    @classmethod
    def init(cls, dim_in: int, dim_hidden: int, dim_out_half: int, rng_seed: int) -> "EncoderParams":
        rng = np.random.default_rng(np.random.SeedSequence((int(rng_seed), 0xE6C0)))
        dims = [(dim_in, dim_hidden), (dim_hidden, dim_out_half)]
        stacks = {
            kind: [LayerParams.init(rng, di, do, kind) for di, do in dims]
            for kind in (GLOBAL, LOCAL)
        }
        return cls(dim_in, dim_hidden, dim_out_half, stacks)

    @property
    def output_dim(self) -> int:
        return 2 * self.dim_out_half

    def named_parameters(self):
        for kind in (GLOBAL, LOCAL):
            for idx, layer in enumerate(self.stacks[kind]):
                yield from layer.named_parameters(f"encoder.{kind}.{idx}")


class MessageStructure:
    """Fixed message layout for one (view, partition) pair.

    Every node aggregates its own row, its effective neighbors, and, when
    it is tail-like (tail or forged) or super-head, one correction message
    stored at stacked-row N + i. The same pattern drives both the mean
    convolution and the attention aggregator; a neighbor-only pattern
    provides the local-context mean for the predictors.
    """

    def __init__(self, view: GraphView, part: DegreePartition):
        n = view.num_nodes
        self.num_nodes = n
        self.tail_like = part.tail_mask | view.forged
        self.super = part.super_mask
        present = self.tail_like | self.super
        self.present = present

        corr_nodes = np.flatnonzero(present).astype(np.int64)
        dst = np.concatenate([view.msg_dst, np.arange(n, dtype=np.int64), corr_nodes])
        src = np.concatenate([view.msg_src, np.arange(n, dtype=np.int64), corr_nodes + n])
        order = np.argsort(dst, kind="stable")
        dst, src = dst[order], src[order]

        counts = view.effective_degrees + 1 + present.astype(np.int64)
        indptr = np.concatenate(([0], np.cumsum(counts)))
        self.pattern = SparsePattern(indptr, src, shape=(n, 2 * n))
        self.dst = dst
        self.src = src
        self.set_sizes = counts.astype(np.float64)
        self.inv_sizes = (1.0 / self.set_sizes)[:, None]
        self.sum_matrix = self.pattern.constant_matrix()

        # neighbor-only mean (no self, no correction) for the local context
        nb_counts = view.effective_degrees
        nb_indptr = np.concatenate(([0], np.cumsum(nb_counts)))
        nb_pattern = SparsePattern(nb_indptr, view.msg_src, shape=(n, n))
        self.nb_matrix = nb_pattern.constant_matrix()
        self.nb_inv = (1.0 / np.maximum(nb_counts, 1).astype(np.float64))[:, None]

        self.tail_col = self.tail_like.astype(np.float64)[:, None]
        self.super_col = self.super.astype(np.float64)[:, None]


def neighborhood_mean(h, view: GraphView, node: int) -> np.ndarray:
    """Arithmetic mean of the effective neighbors' rows; zero if none."""
    data = h.data if isinstance(h, Tensor) else np.asarray(h, dtype=np.float64)
    if not (0 <= node < view.num_nodes):
        raise IndexError(f"node {node} out of range")
    nbrs = view.effective_adjacency[node]
    if nbrs.shape[0] == 0:
        return np.zeros(data.shape[1], dtype=np.float64)
    return data[nbrs].mean(axis=0)


def local_context(h: Tensor, struct: MessageStructure) -> Tensor:
    """Per-node concatenation of own row and effective-neighborhood mean."""
    nb_mean = nm.mul(nm.sparse_matmul(struct.nb_matrix, h), struct.nb_inv)
    return nm.concat([h, nb_mean], axis=1)


def predict_missing(context: Tensor, layer: LayerParams, scaled: Tensor | None = None) -> Tensor:
    """Scale-and-shift the shared missing vector by the local context."""
    gamma = scaled if scaled is not None else nm.matmul(context, layer.scale_weight)
    return nm.add(nm.mul(gamma, layer.missing_global), layer.shift_missing(context))


def predict_redundant(context: Tensor, layer: LayerParams, scaled: Tensor | None = None) -> Tensor:
    """Scale-and-shift the shared redundancy vector (same scaling as missing)."""
    gamma = scaled if scaled is not None else nm.matmul(context, layer.scale_weight)
    return nm.add(nm.mul(gamma, layer.redundant_global), layer.shift_redundant(context))


def _corrections(
    h: Tensor, struct: MessageStructure, layer: LayerParams, ablation: str
) -> tuple[Tensor, Tensor, Tensor]:
    """Per-node missing / redundant predictions and the signed message rows."""
    n = struct.num_nodes
    context = gamma = None
    if ablation == NO_AP:
        missing = Tensor(np.zeros((n, layer.dim_in)))
    else:
        context = local_context(h, struct)
        gamma = nm.matmul(context, layer.scale_weight)
        missing = predict_missing(context, layer, scaled=gamma)
    if ablation == NO_NR:
        redundant = Tensor(np.zeros((n, layer.dim_in)))
    else:
        if context is None:
            context = local_context(h, struct)
            gamma = nm.matmul(context, layer.scale_weight)
        redundant = predict_redundant(context, layer, scaled=gamma)
    signed = nm.sub(nm.mul(missing, struct.tail_col), nm.mul(redundant, struct.super_col))
    return missing, redundant, signed


def corrected_aggregate(
    h,
    struct: MessageStructure,
    layer: LayerParams,
    kind: str,
    ablation: str = FULL,
    final: bool = False,
    corrections: tuple[Tensor, Tensor, Tensor] | None = None,
) -> tuple[Tensor, Tensor, Tensor]:
    """One aggregation layer over the corrected neighborhood sets.

    Returns (next activations, missing cache, redundant cache). The signed
    correction message joins each corrected node's aggregation set as one
    extra element: the mean convolution renormalizes by the set size, the
    attention aggregator scores it like any other neighbor.
    """
    h = nm.as_tensor(h)
    if h.shape[0] != struct.num_nodes or h.shape[1] != layer.dim_in:
        raise ValueError(
            f"activations {h.shape} do not match structure/layer "
            f"({struct.num_nodes}, {layer.dim_in})"
        )
    missing, redundant, signed = (
        corrections if corrections is not None else _corrections(h, struct, layer, ablation)
    )
    if kind == GLOBAL:
        stacked = nm.concat([h, signed], axis=0)
        pooled = nm.mul(nm.sparse_matmul(struct.sum_matrix, stacked), struct.inv_sizes)
        out = nm.matmul(pooled, layer.weight)
    elif kind == LOCAL:
        projected = nm.matmul(h, layer.weight)
        projected_corr = nm.matmul(signed, layer.weight)
        stacked = nm.concat([projected, projected_corr], axis=0)
        query = nm.matmul(projected, layer.attn_query)
        key = nm.matmul(stacked, layer.attn_key)
        scores = nm.leaky_relu(
            nm.add(nm.gather_rows(query, struct.dst), nm.gather_rows(key, struct.src)),
            slope=_ATTN_SLOPE,
        )
        attn = nm.neighbor_softmax(scores, struct.dst)
        out = nm.weighted_spmm(attn, struct.pattern, stacked)
    else:
        raise ValueError(f"unknown aggregator kind {kind!r}")
    if not final:
        out = nm.tanh(out)
    return out, missing, redundant


@dataclass
class EncoderOutput:
    """Stacked embedding plus the per-layer correction caches."""

    embedding: Tensor  # (N, 2 * dim_out_half)
    missing_caches: list[Tensor] = field(default_factory=list)
    redundant_caches: list[Tensor] = field(default_factory=list)
    structure: MessageStructure | None = None


def encode(
    view: GraphView,
    part: DegreePartition,
    features,
    params: EncoderParams,
    ablation: str = FULL,
    structure: MessageStructure | None = None,
) -> EncoderOutput:
    """Run both aggregator stacks on one graph view."""
    if ablation not in ABLATIONS:
        raise ValueError(f"unknown ablation {ablation!r}; expected one of {ABLATIONS}")
    x = nm.as_tensor(features)
    if x.shape[0] != view.num_nodes:
        raise ValueError(f"features rows {x.shape[0]} != nodes {view.num_nodes}")
    if x.shape[1] != params.dim_in:
        raise ValueError(f"feature dim {x.shape[1]} != encoder input dim {params.dim_in}")
    struct = structure if structure is not None else MessageStructure(view, part)
    halves = []
    missing_caches: list[Tensor] = []
    redundant_caches: list[Tensor] = []
    for kind in (GLOBAL, LOCAL):
        h = x
        layers = params.stacks[kind]
        for idx, layer in enumerate(layers):
            h, missing, redundant = corrected_aggregate(
                h, struct, layer, kind, ablation=ablation, final=(idx == len(layers) - 1)
            )
            missing_caches.append(missing)
            redundant_caches.append(redundant)
        halves.append(h)
    return EncoderOutput(
        embedding=nm.concat(halves, axis=1),
        missing_caches=missing_caches,
        redundant_caches=redundant_caches,
        structure=struct,
    )


def forward_pair(
    view1: GraphView,
    view2: GraphView,
    part1: DegreePartition,
    part2: DegreePartition,
    features1,
    features2,
    params: EncoderParams,
    ablation: str = FULL,
    structures: tuple[MessageStructure, MessageStructure] | None = None,
) -> tuple[EncoderOutput, EncoderOutput]:
    """Encode both graphs with one shared parameter set."""
    s1, s2 = structures if structures is not None else (None, None)
    enc1 = encode(view1, part1, features1, params, ablation=ablation, structure=s1)
    enc2 = encode(view2, part2, features2, params, ablation=ablation, structure=s2)
    return enc1, enc2
