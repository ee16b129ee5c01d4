"""Ranking metrics: hits-precision, mean reciprocal rank, degree buckets.

Sums accumulate left to right in plain Python floats so results are
reproducible bit for bit against a straightforward reimplementation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DEGREE_BUCKETS = (2, 5, 10, 50, 200)


def hits_at_k(ranks, k: int) -> float:
    """Mean of max(0, k - (rank - 1)) / k over the 1-based ranks.

    A hit at rank 1 scores 1, rank k scores 1/k, anything beyond k scores 0.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ranks = list(ranks)
    if not ranks:
        raise ValueError("empty rank list")
    total = 0.0
    for r in ranks:
        if r < 1:
            raise ValueError(f"ranks are 1-based, got {r}")
        total += max(0, k - (r - 1)) / k
    return total / len(ranks)


def mrr(ranks) -> float:
    """Mean reciprocal rank over 1-based ranks."""
    ranks = list(ranks)
    if not ranks:
        raise ValueError("empty rank list")
    total = 0.0
    for r in ranks:
        if r < 1:
            raise ValueError(f"ranks are 1-based, got {r}")
        total += 1.0 / r
    return total / len(ranks)


@dataclass(frozen=True)
class DegreeBucket:
    low: int  # exclusive, except the first bucket which also admits degree <= low
    high: float  # inclusive; inf for the last bucket
    mrr: float
    count: int

    def label(self) -> str:
        hi = "inf" if np.isinf(self.high) else str(int(self.high))
        return f"({self.low}, {hi}]"


def mrr_by_degree(
    ranks, degrees, edges: tuple[int, ...] = DEFAULT_DEGREE_BUCKETS
) -> list[DegreeBucket]:
    """Per-bucket MRR over source-node degree; counts sum to len(ranks).

    Buckets are (0, e1], (e1, e2], ..., (ek, inf); degree-0 sources fall
    into the first bucket. An empty bucket reports MRR 0.
    """
    ranks = np.asarray(list(ranks), dtype=np.int64)
    degrees = np.asarray(list(degrees), dtype=np.int64)
    if ranks.shape != degrees.shape:
        raise ValueError("ranks and degrees must align")
    edge_arr = np.asarray(edges, dtype=np.int64)
    idx = np.searchsorted(edge_arr, degrees, side="left")
    bounds = [0, *edges, np.inf]
    out = []
    for b in range(len(edges) + 1):
        members = ranks[idx == b]
        value = mrr(members) if members.size else 0.0
        out.append(
            DegreeBucket(low=int(bounds[b]), high=float(bounds[b + 1]), mrr=value,
                         count=int(members.size))
        )
    return out


@dataclass
class MetricsReport:
    """Evaluation summary for one run."""

    hits: dict[int, float]
    mrr: float
    per_bucket: list[DegreeBucket]
    num_anchors: int
    seed: int
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "hits": {str(k): v for k, v in sorted(self.hits.items())},
            "mrr": self.mrr,
            "per_degree_mrr": [
                {"bucket": b.label(), "mrr": b.mrr, "count": b.count} for b in self.per_bucket
            ],
            "num_anchors": self.num_anchors,
            "seed": self.seed,
            "config": self.config,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def build_report(
    ranks,
    source_degrees,
    seed: int,
    config: dict | None = None,
    hits_ks: tuple[int, ...] = (1, 10, 30),
    bucket_edges: tuple[int, ...] = DEFAULT_DEGREE_BUCKETS,
) -> MetricsReport:
    ranks = list(ranks)
    return MetricsReport(
        hits={k: hits_at_k(ranks, k) for k in hits_ks},
        mrr=mrr(ranks),
        per_bucket=mrr_by_degree(ranks, source_degrees, bucket_edges),
        num_anchors=len(ranks),
        seed=seed,
        config=dict(config or {}),
    )
