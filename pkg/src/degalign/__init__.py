"""Degree-aware graph embedding and cross-network user identity linkage.

The library links accounts across two social networks from structure
alone. Node neighborhoods are repaired during aggregation according to
degree class: sparse tail nodes gain predicted missing information, noisy
super-head hubs shed predicted redundancy, and ordinary head nodes train
the predictors. Matching happens by cosine ranking in a shared space
reached through per-network mapping MLPs.
"""

from .graphs import (
    Graph,
    DegreePartition,
    GraphView,
    EdgeSample,
    load_edge_list,
    load_anchor_pairs,
    partition_by_degree,
    forge_tail_view,
    unforged_view,
    sample_balanced_edges,
    TAIL,
    HEAD,
    SUPER,
)
from .features import FeatureMatrix, node2vec_features, load_features, save_features
from .encoder import (
    EncoderParams,
    EncoderOutput,
    LayerParams,
    MessageStructure,
    TwoLayerNet,
    corrected_aggregate,
    encode,
    forward_pair,
    local_context,
    neighborhood_mean,
    predict_missing,
    predict_redundant,
    FULL,
    NO_AP,
    NO_NR,
    ABLATIONS,
    GLOBAL,
    LOCAL,
)
from .matching import (
    AnchorSet,
    MappingNets,
    topology_loss,
    matching_loss,
    constraint_loss,
    total_loss,
    rank_candidates,
    rank_of_target,
    ranks_for_anchors,
    sample_anchor_negatives,
)
from .metrics import (
    MetricsReport,
    DegreeBucket,
    hits_at_k,
    mrr,
    mrr_by_degree,
    build_report,
)
from .pipeline import (
    RunConfig,
    Node2VecConfig,
    PipelineInputs,
    ModelParams,
    TrainedModel,
    split_anchors,
    prepare_inputs,
    train,
    evaluate,
    evaluate_by_degree,
    run,
    ablate,
)
from .synth import generate_synthetic_pair
from . import numerics

__version__ = "0.1.0"
