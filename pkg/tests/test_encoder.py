import numpy as np
import pytest

from degalign import (
    FULL,
    GLOBAL,
    LOCAL,
    NO_AP,
    NO_NR,
    EncoderParams,
    Graph,
    MessageStructure,
    corrected_aggregate,
    encode,
    forward_pair,
    local_context,
    neighborhood_mean,
    partition_by_degree,
    predict_missing,
    predict_redundant,
    unforged_view,
)
from degalign import numerics as nm
from degalign.encoder import LayerParams
from degalign.numerics import Parameter, Tensor

from conftest import assert_grad_close, fd_grads


def _toy_graph():
    """Six nodes: one super head (0), two heads (1, 2), three tails (3, 4, 5)."""
    g = Graph(6, [(0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (1, 2)])
    part = partition_by_degree(g, tail_threshold=1, super_threshold=3)
    assert part.counts() == {"tail": 3, "head": 2, "super_head": 1}
    return g, part


def _layer(rng, dim_in, dim_out, kind):
    return LayerParams.init(rng, dim_in, dim_out, kind)


def _randomize_corrections(rng, layer):
    """Give the correction branch nonzero parameters (init keeps them at 0)."""
    layer.missing_global.data = rng.normal(size=layer.dim_in)
    layer.redundant_global.data = rng.normal(size=layer.dim_in)
    layer.shift_missing.w2.data = rng.normal(size=layer.shift_missing.w2.shape) * 0.3
    layer.shift_missing.b2.data = rng.normal(size=layer.dim_in) * 0.3
    layer.shift_redundant.w2.data = rng.normal(size=layer.shift_redundant.w2.shape) * 0.3
    layer.shift_redundant.b2.data = rng.normal(size=layer.dim_in) * 0.3


def _zero_corrections(layer):
    for p in (layer.missing_global, layer.redundant_global, layer.scale_weight):
        p.data = np.zeros_like(p.data)
    for net in (layer.shift_missing, layer.shift_redundant):
        for q in (net.w1, net.b1, net.w2, net.b2):
            q.data = np.zeros_like(q.data)


# ---------------------------------------------------------------------------
# reference implementation (independent dense oracle)
# ---------------------------------------------------------------------------


def _ref_predictions(h, view, part, layer, ablation=FULL):
    n = h.shape[0]
    hbar = np.zeros_like(h)
    for i in range(n):
        nbrs = view.effective_adjacency[i]
        if nbrs.size:
            hbar[i] = h[nbrs].mean(axis=0)
    ctx = np.concatenate([h, hbar], axis=1)
    gamma = ctx @ layer.scale_weight.data

    def shift(net):
        return np.tanh(ctx @ net.w1.data + net.b1.data) @ net.w2.data + net.b2.data

    missing = gamma * layer.missing_global.data + shift(layer.shift_missing)
    redundant = gamma * layer.redundant_global.data + shift(layer.shift_redundant)
    if ablation == NO_AP:
        missing = np.zeros_like(missing)
    if ablation == NO_NR:
        redundant = np.zeros_like(redundant)
    return missing, redundant


def _ref_layer(h, view, part, layer, kind, ablation=FULL, final=False):
    """Per-node loop over explicit aggregation sets; no library calls."""
    n = h.shape[0]
    missing, redundant = _ref_predictions(h, view, part, layer, ablation)
    tail_like = part.tail_mask | view.forged
    out = np.zeros((n, layer.dim_out))
    w = layer.weight.data
    for i in range(n):
        msgs = [h[i]] + [h[k] for k in view.effective_adjacency[i]]
        if tail_like[i]:
            msgs.append(missing[i])
        elif part.super_mask[i]:
            msgs.append(-redundant[i])
        msgs = np.stack(msgs)
        if kind == GLOBAL:
            out[i] = msgs.mean(axis=0) @ w
        else:
            proj = msgs @ w
            query = (h[i] @ w) @ layer.attn_query.data
            scores = query + proj @ layer.attn_key.data
            scores = np.where(scores > 0, scores, 0.2 * scores)
            e = np.exp(scores - scores.max())
            out[i] = (e / e.sum()) @ proj
    return out if final else np.tanh(out)


# ---------------------------------------------------------------------------
# neighborhood mean and predictors
# ---------------------------------------------------------------------------


def test_neighborhood_mean_two_neighbors():
    g = Graph(3, [(0, 1), (0, 2)])
    view = unforged_view(g)
    h = np.array([[9.0, 9.0], [2.0, 0.0], [0.0, 2.0]])
    np.testing.assert_array_equal(neighborhood_mean(h, view, 0), [1.0, 1.0])


def test_neighborhood_mean_empty_is_zero():
    g = Graph(3, [(0, 1)])
    view = unforged_view(g)
    h = np.ones((3, 4))
    np.testing.assert_array_equal(neighborhood_mean(h, view, 2), np.zeros(4))


def test_neighborhood_mean_matches_bruteforce(rng):
    g = Graph(7, [(0, k) for k in range(1, 6)] + [(1, 6)])
    view = unforged_view(g)
    h = rng.normal(size=(7, 5))
    expected = sum(h[k] for k in range(1, 6)) / 5.0
    np.testing.assert_allclose(neighborhood_mean(h, view, 0), expected, rtol=1e-12)


def test_predict_missing_zero_params_is_zero(rng):
    g, part = _toy_graph()
    layer = _layer(np.random.default_rng(0), 3, 2, GLOBAL)
    _zero_corrections(layer)
    struct = MessageStructure(unforged_view(g), part)
    ctx = local_context(Tensor(rng.normal(size=(6, 3))), struct)
    out = predict_missing(ctx, layer)
    np.testing.assert_array_equal(out.data, np.zeros((6, 3)))


def test_predict_missing_shift_only_path(rng):
    # with the shared vector at zero, the shift net's output passes through;
    # a stand-in net selecting the first block returns each node's own row
    g, part = _toy_graph()
    layer = _layer(np.random.default_rng(0), 3, 2, GLOBAL)
    selector = np.concatenate([np.eye(3), np.zeros((3, 3))], axis=0)
    layer.shift_missing = lambda ctx: nm.matmul(ctx, Tensor(selector))
    struct = MessageStructure(unforged_view(g), part)
    h = rng.normal(size=(6, 3))
    out = predict_missing(local_context(Tensor(h), struct), layer)
    np.testing.assert_allclose(out.data, h, rtol=1e-12)


def test_predictors_match_reference(rng):
    g, part = _toy_graph()
    layer = _layer(np.random.default_rng(7), 3, 2, GLOBAL)
    _randomize_corrections(np.random.default_rng(8), layer)
    view = unforged_view(g)
    struct = MessageStructure(view, part)
    h = rng.normal(size=(6, 3))
    ctx = local_context(Tensor(h), struct)
    missing = predict_missing(ctx, layer)
    redundant = predict_redundant(ctx, layer)
    ref_m, ref_r = _ref_predictions(h, view, part, layer)
    np.testing.assert_allclose(missing.data, ref_m, rtol=1e-10)
    np.testing.assert_allclose(redundant.data, ref_r, rtol=1e-10)


# ---------------------------------------------------------------------------
# corrected aggregation
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("kind", [GLOBAL, LOCAL])
def test_toy_layer_matches_reference(kind, rng):
    g, part = _toy_graph()
    layer = _layer(np.random.default_rng(3), 3, 2, kind)
    _randomize_corrections(np.random.default_rng(4), layer)
    view = unforged_view(g)
    struct = MessageStructure(view, part)
    h = rng.normal(size=(6, 3))
    out, _, _ = corrected_aggregate(h, struct, layer, kind)
    ref = _ref_layer(h, view, part, layer, kind)
    np.testing.assert_allclose(out.data, ref, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("kind", [GLOBAL, LOCAL])
@pytest.mark.parametrize("ablation", [NO_AP, NO_NR])
def test_toy_layer_matches_reference_under_ablation(kind, ablation, rng):
    g, part = _toy_graph()
    layer = _layer(np.random.default_rng(3), 3, 2, kind)
    _randomize_corrections(np.random.default_rng(4), layer)
    view = unforged_view(g)
    struct = MessageStructure(view, part)
    h = rng.normal(size=(6, 3))
    out, _, _ = corrected_aggregate(h, struct, layer, kind, ablation=ablation)
    ref = _ref_layer(h, view, part, layer, kind, ablation=ablation)
    np.testing.assert_allclose(out.data, ref, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("kind", [GLOBAL, LOCAL])
def test_head_nodes_have_no_correction_term(kind, rng):
    """A head node's output equals standard aggregation over self + neighbors."""
    g, part = _toy_graph()
    layer = _layer(np.random.default_rng(5), 3, 2, kind)
    _randomize_corrections(np.random.default_rng(6), layer)
    view = unforged_view(g)
    struct = MessageStructure(view, part)
    h = rng.normal(size=(6, 3))
    out, _, _ = corrected_aggregate(h, struct, layer, kind)
    w = layer.weight.data
    for i in np.flatnonzero(part.head_mask):
        msgs = np.stack([h[i]] + [h[k] for k in g.adjacency[i]])
        if kind == GLOBAL:
            expected = np.tanh(msgs.mean(axis=0) @ w)
        else:
            proj = msgs @ w
            scores = (h[i] @ w) @ layer.attn_query.data + proj @ layer.attn_key.data
            scores = np.where(scores > 0, scores, 0.2 * scores)
            e = np.exp(scores - scores.max())
            expected = np.tanh((e / e.sum()) @ proj)
        np.testing.assert_allclose(out.data[i], expected, rtol=1e-10)


def test_tail_zero_message_keeps_slot(rng):
    """With corrections forced to zero, a tail node aggregates N u {0}."""
    g, part = _toy_graph()
    layer = _layer(np.random.default_rng(5), 3, 2, GLOBAL)
    _zero_corrections(layer)
    view = unforged_view(g)
    struct = MessageStructure(view, part)
    h = rng.normal(size=(6, 3))
    out, _, _ = corrected_aggregate(h, struct, layer, GLOBAL)
    tail = int(np.flatnonzero(part.tail_mask)[0])
    msgs = np.stack([h[tail]] + [h[k] for k in g.adjacency[tail]] + [np.zeros(3)])
    expected = np.tanh(msgs.mean(axis=0) @ layer.weight.data)
    np.testing.assert_allclose(out.data[tail], expected, rtol=1e-12)


@pytest.mark.parametrize("kind", [GLOBAL, LOCAL])
def test_zero_correction_consistency(kind, rng):
    """Zeroed predictors reproduce standard aggregation over the same sets."""
    g, part = _toy_graph()
    layer = _layer(np.random.default_rng(9), 3, 2, kind)
    _zero_corrections(layer)
    view = unforged_view(g)
    struct = MessageStructure(view, part)
    h = rng.normal(size=(6, 3))
    out, _, _ = corrected_aggregate(h, struct, layer, kind)
    ref = _ref_layer(h, view, part, layer, kind)
    np.testing.assert_allclose(out.data, ref, rtol=1e-12)


# ---------------------------------------------------------------------------
# full encoder
# ---------------------------------------------------------------------------


def _encoder_setup(rng, n=10, dim_in=6, hidden=5, half=4):
    edges = set()
    local = np.random.default_rng(42)
    while len(edges) < 18:
        a, b = local.integers(0, n, size=2)
        if a != b:
            edges.add((min(a, b), max(a, b)))
    g = Graph(n, sorted(edges))
    part = partition_by_degree(g, tail_threshold=2, super_threshold=5)
    params = EncoderParams.init(dim_in, hidden, half, rng_seed=17)
    x = rng.normal(size=(n, dim_in))
    return g, part, params, x


def test_identical_inputs_give_identical_embeddings(rng):
    g, part, params, x = _encoder_setup(rng)
    view = unforged_view(g)
    enc1, enc2 = forward_pair(view, view, part, part, x, x, params)
    np.testing.assert_array_equal(enc1.embedding.data, enc2.embedding.data)


def test_swapping_graphs_swaps_outputs(rng):
    g1, part1, params, x1 = _encoder_setup(rng)
    g2, part2, _, x2 = _encoder_setup(rng, n=12)
    v1, v2 = unforged_view(g1), unforged_view(g2)
    a1, a2 = forward_pair(v1, v2, part1, part2, x1, x2, params)
    b2, b1 = forward_pair(v2, v1, part2, part1, x2, x1, params)
    np.testing.assert_array_equal(a1.embedding.data, b1.embedding.data)
    np.testing.assert_array_equal(a2.embedding.data, b2.embedding.data)


def test_embedding_dims_concatenate_both_stacks():
    g = Graph(9, [(i, i + 1) for i in range(8)] + [(0, 4), (2, 6)])
    part = partition_by_degree(g, tail_threshold=1, super_threshold=3)
    params = EncoderParams.init(dim_in=16, dim_hidden=64, dim_out_half=128, rng_seed=0)
    x = np.random.default_rng(0).normal(size=(9, 16))
    out = encode(unforged_view(g), part, x, params)
    assert out.embedding.shape == (9, 256)
    assert len(out.missing_caches) == 4  # 2 stacks x 2 layers
    assert len(out.redundant_caches) == 4


def test_permutation_equivariance(rng):
    g, part, params, x = _encoder_setup(rng)
    perm = np.random.default_rng(5).permutation(g.num_nodes)
    edges_p = np.stack([perm[g.edges[:, 0]], perm[g.edges[:, 1]]], axis=1)
    g_p = Graph(g.num_nodes, edges_p)
    part_p = partition_by_degree(g_p, part.tail_threshold, super_threshold=part.super_threshold)
    x_p = np.empty_like(x)
    x_p[perm] = x
    out = encode(unforged_view(g), part, x, params)
    out_p = encode(unforged_view(g_p), part_p, x_p, params)
    np.testing.assert_allclose(out_p.embedding.data[perm], out.embedding.data, rtol=1e-9)


def test_ablations_do_not_touch_head_nodes_without_forging(rng):
    """Fresh init keeps every correction at zero, so head activations agree
    bit for bit across the full model and both ablations at every layer."""
    g, part, params, x = _encoder_setup(rng, n=16)
    view = unforged_view(g)
    struct = MessageStructure(view, part)
    per_layer = {}
    for ablation in (FULL, NO_AP, NO_NR):
        acts = []
        for kind in (GLOBAL, LOCAL):
            h = Tensor(x)
            layers = params.stacks[kind]
            for idx, layer in enumerate(layers):
                h, _, _ = corrected_aggregate(
                    h, struct, layer, kind, ablation=ablation, final=idx == len(layers) - 1
                )
                acts.append(h.data.copy())
        per_layer[ablation] = acts
    heads = part.head_mask
    for ablation in (NO_AP, NO_NR):
        for full_act, abl_act in zip(per_layer[FULL], per_layer[ablation]):
            np.testing.assert_array_equal(full_act[heads], abl_act[heads])


def test_feature_dim_mismatch_raises(rng):
    g, part, params, x = _encoder_setup(rng)
    with pytest.raises(ValueError, match="dim"):
        encode(unforged_view(g), part, x[:, :3], params)


def test_unknown_ablation_rejected(rng):
    g, part, params, x = _encoder_setup(rng)
    with pytest.raises(ValueError, match="ablation"):
        encode(unforged_view(g), part, x, params, ablation="nope")


# ---------------------------------------------------------------------------
# gradients through the corrected aggregation
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("kind", [GLOBAL, LOCAL])
def test_gradient_through_corrected_aggregate(kind, rng):
    g, part = _toy_graph()
    view = unforged_view(g)
    struct = MessageStructure(view, part)
    layer = _layer(np.random.default_rng(13), 3, 2, kind)
    _randomize_corrections(np.random.default_rng(14), layer)
    x = rng.normal(size=(6, 3))

    named = [(name, p) for name, p in layer.named_parameters("layer")]

    def loss_tensor():
        out, missing, redundant = corrected_aggregate(Tensor(x), struct, layer, kind)
        return nm.add(nm.sum_sq(out), nm.add(nm.sum_sq(missing), nm.sum_sq(redundant)))

    loss = loss_tensor()
    nm.backward(loss)
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for name, p in named}

    for name, p in named:
        def fn(arr, _p=p):
            saved = _p.data
            _p.data = arr
            value = float(loss_tensor().data)
            _p.data = saved
            return value

        numeric = fd_grads(fn, [p.data.copy()])[0]
        assert_grad_close(analytic[name], numeric)
