"""Run configuration, anchor splitting, training loop and evaluation.

A run wires the pieces together: load or synthesize two graphs, produce
initial features, split anchors, train the shared encoder plus mapping
MLPs on re-forged views, then rank test anchors on the un-forged graphs.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import numerics as nm
from .encoder import (
    ABLATIONS,
    FULL,
    NO_AP,
    EncoderParams,
    MessageStructure,
    forward_pair,
)
from .features import load_features, node2vec_features
from .graphs import (
    DegreePartition,
    Graph,
    forge_tail_view,
    load_anchor_pairs,
    load_edge_list,
    partition_by_degree,
    sample_balanced_edges,
    unforged_view,
)
from .matching import (
    AnchorSet,
    MappingNets,
    constraint_loss,
    matching_loss,
    ranks_for_anchors,
    sample_anchor_negatives,
    topology_loss,
    total_loss,
)
from .metrics import DEFAULT_DEGREE_BUCKETS, MetricsReport, build_report, mrr


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(tuple(int(p) for p in parts)).generate_state(1)[0])


@dataclass(frozen=True)
class Node2VecConfig:
    walk_len: int = 80
    walks_per_node: int = 10
    window: int = 10
    p: float = 1.0
    q: float = 1.0
    negatives: int = 5
    epochs: int = 5

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines one training run."""

    edges1: str | None = None
    edges2: str | None = None
    anchors: str | None = None
    features1: str | None = None
    features2: str | None = None
    tail_threshold: int = 5
    super_fraction: float = 0.10
    super_threshold1: int | None = None
    super_threshold2: int | None = None
    topo_weight: float = 0.2
    constraint_weight: float = 0.001
    dim: int = 256
    hidden: int = 64
    map_dim: int = 256
    neg_per_anchor: int = 5
    lr: float = 1e-3
    epochs: int = 100
    seed: int = 0
    split: str = "tail_based"
    train_ratio: float | None = None
    ablation: str = FULL
    node2vec: Node2VecConfig = field(default_factory=Node2VecConfig)
    selection_cap: int = 256
    selection_every: int = 1
    degree_buckets: tuple[int, ...] = DEFAULT_DEGREE_BUCKETS

    def __post_init__(self):
        if isinstance(self.node2vec, dict):
            object.__setattr__(self, "node2vec", Node2VecConfig(**self.node2vec))
        if not isinstance(self.degree_buckets, tuple):
            object.__setattr__(self, "degree_buckets", tuple(self.degree_buckets))
        if self.topo_weight < 0 or self.constraint_weight < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.dim % 2 != 0:
            raise ValueError("dim must be even (two aggregator halves)")
        if self.split == "ratio":
            if self.train_ratio is None or not (0.0 < self.train_ratio < 1.0):
                raise ValueError("ratio split requires 0 < train_ratio < 1")
        elif self.split != "tail_based":
            raise ValueError(f"unknown split mode {self.split!r}")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"unknown ablation {self.ablation!r}")
        if self.neg_per_anchor < 1:
            raise ValueError("neg_per_anchor must be >= 1")
        if self.selection_every < 1:
            raise ValueError("selection_every must be >= 1")

    _JSON_KEYS = {
        "edges1": "edges1",
        "edges2": "edges2",
        "anchors": "anchors",
        "features1": "features1",
        "features2": "features2",
        "tail_threshold": "tail_threshold",
        "super_fraction": "super_fraction",
        "super_threshold1": "super_threshold1",
        "super_threshold2": "super_threshold2",
        "lambda": "topo_weight",
        "mu": "constraint_weight",
        "dim": "dim",
        "hidden": "hidden",
        "map_dim": "map_dim",
        "neg_per_anchor": "neg_per_anchor",
        "lr": "lr",
        "epochs": "epochs",
        "seed": "seed",
        "split": None,  # handled specially
        "ablation": "ablation",
        "node2vec": None,
        "selection_cap": "selection_cap",
        "selection_every": "selection_every",
        "degree_buckets": None,
    }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        unknown = set(raw) - set(cls._JSON_KEYS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in raw.items():
            attr = cls._JSON_KEYS[key]
            if attr is not None:
                kwargs[attr] = value
        if "split" in raw:
            mode = raw["split"]
            if isinstance(mode, str):
                kwargs["split"] = mode
            elif isinstance(mode, dict) and set(mode) == {"ratio"}:
                kwargs["split"] = "ratio"
                kwargs["train_ratio"] = float(mode["ratio"])
            else:
                raise ValueError(f"split must be 'tail_based' or {{'ratio': r}}, got {mode!r}")
        if "node2vec" in raw:
            n2v = raw["node2vec"]
            valid = {f.name for f in fields(Node2VecConfig)}
            bad = set(n2v) - valid
            if bad:
                raise ValueError(f"unknown node2vec keys: {sorted(bad)}")
            kwargs["node2vec"] = Node2VecConfig(**n2v)
        if "degree_buckets" in raw:
            kwargs["degree_buckets"] = tuple(int(x) for x in raw["degree_buckets"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = {
            "edges1": self.edges1,
            "edges2": self.edges2,
            "anchors": self.anchors,
            "features1": self.features1,
            "features2": self.features2,
            "tail_threshold": self.tail_threshold,
            "super_fraction": self.super_fraction,
            "super_threshold1": self.super_threshold1,
            "super_threshold2": self.super_threshold2,
            "lambda": self.topo_weight,
            "mu": self.constraint_weight,
            "dim": self.dim,
            "hidden": self.hidden,
            "map_dim": self.map_dim,
            "neg_per_anchor": self.neg_per_anchor,
            "lr": self.lr,
            "epochs": self.epochs,
            "seed": self.seed,
            "split": self.split if self.split != "ratio" else {"ratio": self.train_ratio},
            "ablation": self.ablation,
            "node2vec": self.node2vec.to_dict(),
            "selection_cap": self.selection_cap,
            "selection_every": self.selection_every,
            "degree_buckets": list(self.degree_buckets),
        }
        return out

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def split_anchors(
    anchors: np.ndarray | AnchorSet,
    part1: DegreePartition,
    part2: DegreePartition,
    mode: str = "tail_based",
    train_ratio: float | None = None,
    rng_seed: int = 0,
) -> tuple[AnchorSet, AnchorSet]:
    """Partition anchors into train and test sets.

    tail_based sends an anchor to test when either endpoint is a tail node
    (the cold-start protocol); ratio shuffles by seed and takes the first
    ceil(ratio * n) pairs for training.
    """
    pairs = anchors.pairs if isinstance(anchors, AnchorSet) else np.asarray(anchors)
    pairs = pairs.reshape(-1, 2)
    if pairs.shape[0] == 0:
        raise ValueError("no anchors to split")
    if mode == "tail_based":
        is_test = part1.tail_mask[pairs[:, 0]] | part2.tail_mask[pairs[:, 1]]
    elif mode == "ratio":
        if train_ratio is None or not (0.0 < train_ratio < 1.0):
            raise ValueError("ratio split requires 0 < train_ratio < 1")
        rng = np.random.default_rng(np.random.SeedSequence((int(rng_seed), 0x5B17)))
        order = rng.permutation(pairs.shape[0])
        n_train = int(np.ceil(train_ratio * pairs.shape[0]))
        is_test = np.ones(pairs.shape[0], dtype=bool)
        is_test[order[:n_train]] = False
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    train = pairs[~is_test]
    test = pairs[is_test]
    if train.shape[0] == 0:
        raise ValueError("anchor split left the training set empty")
    if test.shape[0] == 0:
        raise ValueError("anchor split left the test set empty")
    return AnchorSet(train, "train"), AnchorSet(test, "test")


@dataclass
class ModelParams:
    """All trainables: the shared encoder and the two mapping MLPs."""

    encoder: EncoderParams
    mapping: MappingNets

    @classmethod
    def init(cls, feature_dim: int, config: RunConfig) -> "ModelParams":
        encoder = EncoderParams.init(
            dim_in=feature_dim,
            dim_hidden=config.hidden,
            dim_out_half=config.dim // 2,
            rng_seed=_derive_seed(config.seed, 11),
        )
        mapping = MappingNets.init(
            dim_in=encoder.output_dim,
            rng_seed=_derive_seed(config.seed, 12),
            dim_out=config.map_dim,
        )
        return cls(encoder, mapping)

    def named_parameters(self):
        yield from self.encoder.named_parameters()
        yield from self.mapping.named_parameters()

    def parameters(self):
        for _, p in self.named_parameters():
            yield p

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def restore(self, state: dict[str, np.ndarray]) -> None:
        for name, p in self.named_parameters():
            p.data = state[name].copy()


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    selection_epochs: list[int] = field(default_factory=list)
    selection_mrr: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    best_epoch: int = -1


@dataclass
class TrainedModel:
    params: ModelParams
    config: RunConfig
    graph1: Graph
    graph2: Graph
    part1: DegreePartition
    part2: DegreePartition
    features1: np.ndarray
    features2: np.ndarray
    train_targets: np.ndarray
    history: TrainHistory = field(default_factory=TrainHistory)

    def save(self, path) -> None:
        named = self.params.snapshot()
        named["data.features1"] = self.features1
        named["data.features2"] = self.features2
        named["data.train_targets"] = self.train_targets
        named["data.config_json"] = np.frombuffer(
            self.config.to_json().encode("utf-8"), dtype=np.uint8
        )
        nm.save_arrays(path, named)

    @classmethod
    def load(cls, path, graphs: tuple[Graph, Graph] | None = None) -> "TrainedModel":
        state = nm.load_arrays(path)
        config = RunConfig.from_json(bytes(state.pop("data.config_json")).decode("utf-8"))
        features1 = state.pop("data.features1")
        features2 = state.pop("data.features2")
        train_targets = state.pop("data.train_targets")
        if graphs is None:
            if config.edges1 is None or config.edges2 is None:
                raise ValueError("checkpoint config has no edge paths; pass graphs explicitly")
            with open(config.edges1, encoding="utf-8") as fh:
                g1 = load_edge_list(fh.read())
            with open(config.edges2, encoding="utf-8") as fh:
                g2 = load_edge_list(fh.read())
        else:
            g1, g2 = graphs
        part1, part2 = _partitions(config, g1, g2)
        params = ModelParams.init(features1.shape[1], config)
        params.restore(state)
        return cls(
            params, config, g1, g2, part1, part2, features1, features2, train_targets
        )


def _partitions(config: RunConfig, g1: Graph, g2: Graph):
    part1 = partition_by_degree(
        g1, config.tail_threshold, config.super_fraction, config.super_threshold1
    )
    part2 = partition_by_degree(
        g2, config.tail_threshold, config.super_fraction, config.super_threshold2
    )
    return part1, part2


def _default_features(config: RunConfig, g: Graph, tag: int) -> np.ndarray:
    n2v = config.node2vec
    feats = node2vec_features(
        g,
        dim=config.dim,
        walk_len=n2v.walk_len,
        walks_per_node=n2v.walks_per_node,
        window=n2v.window,
        p=n2v.p,
        q=n2v.q,
        negatives=n2v.negatives,
        epochs=n2v.epochs,
        rng_seed=_derive_seed(config.seed, 21, tag),
    )
    return feats.data


@dataclass
class PipelineInputs:
    graph1: Graph
    graph2: Graph
    part1: DegreePartition
    part2: DegreePartition
    features1: np.ndarray
    features2: np.ndarray
    train_anchors: AnchorSet
    test_anchors: AnchorSet


def prepare_inputs(
    config: RunConfig,
    graphs: tuple[Graph, Graph] | None = None,
    anchors: np.ndarray | AnchorSet | None = None,
    features: tuple[np.ndarray, np.ndarray] | None = None,
) -> PipelineInputs:
    """Load (or accept) graphs, features and anchors, and split the anchors."""
    if graphs is None:
        if config.edges1 is None or config.edges2 is None:
            raise ValueError("config lacks edge paths and no graphs were passed")
        with open(config.edges1, encoding="utf-8") as fh:
            g1 = load_edge_list(fh.read())
        with open(config.edges2, encoding="utf-8") as fh:
            g2 = load_edge_list(fh.read())
    else:
        g1, g2 = graphs
    part1, part2 = _partitions(config, g1, g2)

    if anchors is None:
        if config.anchors is None:
            raise ValueError("config lacks an anchor path and no anchors were passed")
        with open(config.anchors, encoding="utf-8") as fh:
            anchors = load_anchor_pairs(fh.read())
    train, test = split_anchors(
        anchors, part1, part2, config.split, config.train_ratio, rng_seed=config.seed
    )
    train.validate(g1.num_nodes, g2.num_nodes)
    test.validate(g1.num_nodes, g2.num_nodes)

    if features is not None:
        x1, x2 = features
    else:
        x1 = _load_or_compute(config, config.features1, g1, tag=1)
        x2 = _load_or_compute(config, config.features2, g2, tag=2)
    if x1.shape[0] != g1.num_nodes or x2.shape[0] != g2.num_nodes:
        raise ValueError("feature row count does not match graph size")
    if x1.shape[1] != x2.shape[1]:
        raise ValueError("the two graphs need equal feature dims (shared encoder)")
    return PipelineInputs(g1, g2, part1, part2, x1, x2, train, test)


def _load_or_compute(config: RunConfig, path: str | None, g: Graph, tag: int) -> np.ndarray:
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            return load_features(fh.read()).data
    return _default_features(config, g, tag)


def _selection_ranks(model_params, enc1, enc2, anchors: AnchorSet) -> np.ndarray:
    mapped1 = model_params.mapping.f1(enc1.embedding).data
    mapped2 = model_params.mapping.f2(enc2.embedding).data
    return ranks_for_anchors(mapped1[anchors.sources], mapped2, anchors.targets)


def train(
    config: RunConfig,
    graphs: tuple[Graph, Graph],
    features: tuple[np.ndarray, np.ndarray],
    train_anchors: AnchorSet,
) -> TrainedModel:
    """Optimize encoder + mapping nets; keep the best-selection checkpoint.

    Per epoch: fresh forged views (unless the missing-information ablation
    disables forging), one shared-weight forward over both graphs, the
    mapping MLPs, freshly sampled balanced edges and anchor negatives, the
    combined loss, and one adaptive-moment step. Selection re-ranks a
    capped subsample of training anchors on the un-forged graphs.
    """
    g1, g2 = graphs
    x1, x2 = features
    if x1.shape[1] != x2.shape[1]:
        raise ValueError("feature dims differ between graphs")
    part1, part2 = _partitions(config, g1, g2)
    train_anchors.validate(g1.num_nodes, g2.num_nodes)

    params = ModelParams.init(x1.shape[1], config)
    param_list = list(params.parameters())

    eval_view1, eval_view2 = unforged_view(g1), unforged_view(g2)
    eval_struct1 = MessageStructure(eval_view1, part1)
    eval_struct2 = MessageStructure(eval_view2, part2)

    sel_rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x5E1E)))
    cap = min(config.selection_cap, len(train_anchors))
    sel_idx = np.sort(sel_rng.choice(len(train_anchors), size=cap, replace=False))
    sel_anchors = AnchorSet(train_anchors.pairs[sel_idx], "train")

    def selection_value() -> float:
        enc1, enc2 = forward_pair(
            eval_view1, eval_view2, part1, part2, x1, x2, params.encoder,
            ablation=config.ablation, structures=(eval_struct1, eval_struct2),
        )
        return mrr(_selection_ranks(params, enc1, enc2, sel_anchors))

    history = TrainHistory()
    best_state = params.snapshot()
    best_value = selection_value() if config.epochs > 0 else float("-inf")
    history.best_epoch = -1

    forging = config.ablation != NO_AP
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        if forging:
            view1 = forge_tail_view(g1, part1, _derive_seed(config.seed + epoch, 31, 1))
            view2 = forge_tail_view(g2, part2, _derive_seed(config.seed + epoch, 31, 2))
            struct1, struct2 = None, None
        else:
            view1, view2 = eval_view1, eval_view2
            struct1, struct2 = eval_struct1, eval_struct2

        enc1, enc2 = forward_pair(
            view1, view2, part1, part2, x1, x2, params.encoder,
            ablation=config.ablation,
            structures=(struct1, struct2) if struct1 is not None else None,
        )
        mapped1 = params.mapping.f1(enc1.embedding)
        mapped2 = params.mapping.f2(enc2.embedding)

        sample1 = sample_balanced_edges(g1, _derive_seed(config.seed, 41, epoch, 1))
        sample2 = sample_balanced_edges(g2, _derive_seed(config.seed, 41, epoch, 2))
        negatives = sample_anchor_negatives(
            train_anchors, g2.num_nodes, config.neg_per_anchor,
            _derive_seed(config.seed, 42, epoch),
        )

        loss = total_loss(
            matching_loss(mapped1, mapped2, train_anchors, negatives=negatives),
            (topology_loss(enc1.embedding, sample1), topology_loss(enc2.embedding, sample2)),
            (constraint_loss(enc1), constraint_loss(enc2)),
            config.topo_weight,
            config.constraint_weight,
        )
        loss_value = loss.item()
        if not np.isfinite(loss_value):
            raise RuntimeError(f"non-finite loss at epoch {epoch}")
        nm.backward(loss)
        nm.adam_step(param_list, lr=config.lr)

        history.loss.append(loss_value)
        if (epoch + 1) % config.selection_every == 0 or epoch == config.epochs - 1:
            value = selection_value()
            history.selection_epochs.append(epoch)
            history.selection_mrr.append(value)
            if value > best_value:
                best_value = value
                best_state = params.snapshot()
                history.best_epoch = epoch
        history.epoch_seconds.append(time.perf_counter() - t0)

    params.restore(best_state)
    return TrainedModel(
        params=params,
        config=config,
        graph1=g1,
        graph2=g2,
        part1=part1,
        part2=part2,
        features1=np.asarray(x1, dtype=np.float64),
        features2=np.asarray(x2, dtype=np.float64),
        train_targets=train_anchors.targets.copy(),
        history=history,
    )


def evaluate(model: TrainedModel, test_anchors: AnchorSet) -> MetricsReport:
    """Rank every test anchor on the un-forged graphs and summarize."""
    if len(test_anchors) == 0:
        raise ValueError("no test anchors")
    view1 = unforged_view(model.graph1)
    view2 = unforged_view(model.graph2)
    enc1, enc2 = forward_pair(
        view1, view2, model.part1, model.part2,
        model.features1, model.features2, model.params.encoder,
        ablation=model.config.ablation,
    )
    mapped1 = model.params.mapping.f1(enc1.embedding).data
    mapped2 = model.params.mapping.f2(enc2.embedding).data
    exclude = {int(t) for t in model.train_targets}
    ranks = ranks_for_anchors(
        mapped1[test_anchors.sources], mapped2, test_anchors.targets, exclude
    )
    return build_report(
        ranks,
        model.graph1.degrees[test_anchors.sources],
        seed=model.config.seed,
        config=model.config.to_dict(),
        bucket_edges=model.config.degree_buckets,
    )


def evaluate_by_degree(model: TrainedModel, test_anchors: AnchorSet):
    """Per-degree-bucket MRR of the test anchors (source-node degree)."""
    return evaluate(model, test_anchors).per_bucket


def run(config: RunConfig, inputs: PipelineInputs | None = None):
    """Full pipeline: prepare inputs, train, evaluate. Returns (model, report)."""
    if inputs is None:
        inputs = prepare_inputs(config)
    model = train(
        config,
        (inputs.graph1, inputs.graph2),
        (inputs.features1, inputs.features2),
        inputs.train_anchors,
    )
    report = evaluate(model, inputs.test_anchors)
    return model, report


def ablate(config: RunConfig, inputs: PipelineInputs | None = None) -> dict[str, MetricsReport]:
    """Train and evaluate the full model and both ablations on shared inputs."""
    if inputs is None:
        inputs = prepare_inputs(config)
    reports = {}
    for ablation in ABLATIONS:
        _, report = run(replace(config, ablation=ablation), inputs)
        reports[ablation] = report
    return reports
