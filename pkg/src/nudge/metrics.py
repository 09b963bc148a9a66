"""Retrieval evaluation: top-k extraction, recall, and NDCG."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LabelSet, as_matrix, score_all

__all__ = ["MetricReport", "top_k", "recall_at_k", "ndcg_at_k", "evaluate"]


@dataclass(frozen=True)
class MetricReport:
    """Mean retrieval quality over a query set."""

    k: int
    n_queries: int
    recall: float
    ndcg: float
    recall_at_1: float

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "n_queries": self.n_queries,
            "recall": self.recall,
            "ndcg": self.ndcg,
            "recall_at_1": self.recall_at_1,
        }


def top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k best-scoring records per row.

    Ordered by descending score; equal scores break toward the smaller index,
    so results do not depend on sort internals.
    """
    if not 1 <= k <= scores.shape[1]:
        raise ValueError(f"k must be within [1, {scores.shape[1]}], got {k}")
    order = np.argsort(-scores, axis=1, kind="stable")
    return order[:, :k]


def recall_at_k(retrieved: np.ndarray, relevant: np.ndarray, k: int) -> float:
    """Fraction of relevant records found in the first k results.

    The denominator is min(k, number of relevant records), so a query with
    more relevant records than k can still score 1.0.
    """
    if relevant.shape[0] == 0:
        raise ValueError("recall needs at least one relevant record")
    hits = np.isin(retrieved[:k], relevant).sum()
    return float(hits) / float(min(k, relevant.shape[0]))


def ndcg_at_k(retrieved: np.ndarray, relevant: np.ndarray, relevance: np.ndarray, k: int) -> float:
    """Graded ranking quality in [0, 1] against the ideal ordering.

    Gains are the raw relevance values; the discount at 1-based rank r is
    1 / log2(r + 1).
    """
    if relevant.shape[0] == 0:
        raise ValueError("ndcg needs at least one relevant record")
    head = retrieved[:k]
    gains = np.zeros(head.shape[0], dtype=np.float64)
    for pos, rec in enumerate(head):
        match = np.flatnonzero(relevant == rec)
        if match.size:
            gains[pos] = relevance[match[0]]
    discounts = 1.0 / np.log2(np.arange(2, head.shape[0] + 2, dtype=np.float64))
    dcg = float(np.dot(gains, discounts))
    ideal = np.sort(relevance)[::-1][:k]
    idcg = float(np.dot(ideal, discounts[: ideal.shape[0]]))
    return dcg / idcg


def evaluate(
    queries: np.ndarray,
    data: np.ndarray,
    labels: LabelSet,
    k: int = 10,
    threads: int = 1,
) -> MetricReport:
    """Score every query against every record and average the rank metrics."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q = as_matrix(queries, "queries")
    d = as_matrix(data)
    if labels.n_queries != q.shape[0]:
        raise ValueError(
            f"label set covers {labels.n_queries} queries but {q.shape[0]} were given"
        )
    scores = score_all(q, d, threads=threads)
    retrieved = top_k(scores, min(k, d.shape[0]))
    recalls = np.empty(q.shape[0], dtype=np.float64)
    ndcgs = np.empty(q.shape[0], dtype=np.float64)
    top1 = np.empty(q.shape[0], dtype=np.float64)
    for i in range(q.shape[0]):
        relevant, relevance = labels.labels_for(i)
        recalls[i] = recall_at_k(retrieved[i], relevant, k)
        ndcgs[i] = ndcg_at_k(retrieved[i], relevant, relevance, k)
        top1[i] = 1.0 if np.isin(retrieved[i, :1], relevant).any() else 0.0
    return MetricReport(
        k=k,
        n_queries=q.shape[0],
        recall=float(recalls.mean()),
        ndcg=float(ndcgs.mean()),
        recall_at_1=float(top1.mean()),
    )
