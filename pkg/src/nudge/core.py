"""Shared primitives: label sets, gradient aggregation, scoring, correctness.

All numeric work happens in float64 regardless of the storage dtype of the
input embeddings. Retrieval similarity is the inner product; cosine retrieval
is obtained by normalizing rows first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "LabelSet",
    "Aggregates",
    "CorrectnessVector",
    "FineTuneReport",
    "as_matrix",
    "normalize_rows",
    "unit_rows",
    "compute_aggregates",
    "score_all",
    "correctness",
]


def as_matrix(values: np.ndarray, name: str = "embeddings") -> np.ndarray:
    """Validate a 2-D finite embedding matrix and return it as C-contiguous float64."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column, got shape {arr.shape}")
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf values")
    return arr


def normalize_rows(values: np.ndarray) -> np.ndarray:
    """L2-normalize rows; zero rows are left unchanged."""
    arr = as_matrix(values)
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return arr / safe


def unit_rows(values: np.ndarray, norms: np.ndarray | None = None) -> np.ndarray:
    """Rows scaled to unit norm, with zero rows mapped to zero (not an error)."""
    arr = np.asarray(values, dtype=np.float64)
    if norms is None:
        norms = np.linalg.norm(arr, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    return arr / safe[:, None]


@dataclass(frozen=True)
class LabelSet:
    """Relevance labels tying query rows to record rows.

    Entries are stored column-wise (query index, record index, relevance),
    sorted by (query, record). Every query in [0, n_queries) must carry at
    least one label, record indices must be in range, relevances positive,
    and (query, record) pairs unique.
    """

    n_queries: int
    n_records: int
    query_idx: np.ndarray
    record_idx: np.ndarray
    relevance: np.ndarray
    _offsets: np.ndarray = field(repr=False, compare=False, default=None)

    @classmethod
    def from_entries(
        cls,
        n_queries: int,
        n_records: int,
        entries: Iterable[tuple[int, int, float]],
    ) -> "LabelSet":
        rows = list(entries)
        if n_queries < 1:
            raise ValueError("label set needs at least one query")
        if n_records < 1:
            raise ValueError("label set needs at least one record")
        if not rows:
            raise ValueError("every query must be labeled; got an empty label set")
        q = np.asarray([r[0] for r in rows], dtype=np.int64)
        r = np.asarray([r[1] for r in rows], dtype=np.int64)
        w = np.asarray([r[2] for r in rows], dtype=np.float64)
        if q.min() < 0 or q.max() >= n_queries:
            bad = int(q[(q < 0) | (q >= n_queries)][0])
            raise ValueError(f"query index {bad} out of range [0, {n_queries})")
        if r.min() < 0 or r.max() >= n_records:
            bad = int(r[(r < 0) | (r >= n_records)][0])
            raise ValueError(f"record index {bad} out of range [0, {n_records})")
        if not np.isfinite(w).all() or (w <= 0.0).any():
            raise ValueError("relevance values must be finite and positive")
        order = np.lexsort((r, q))
        q, r, w = q[order], r[order], w[order]
        dup = (np.diff(q) == 0) & (np.diff(r) == 0)
        if dup.any():
            i = int(np.flatnonzero(dup)[0])
            raise ValueError(f"duplicate label for query {int(q[i])} and record {int(r[i])}")
        covered = np.zeros(n_queries, dtype=bool)
        covered[q] = True
        if not covered.all():
            missing = int(np.flatnonzero(~covered)[0])
            raise ValueError(f"every query must be labeled; query {missing} has no labels")
        offsets = np.searchsorted(q, np.arange(n_queries + 1))
        obj = cls(n_queries, n_records, q, r, w, offsets)
        return obj

    def __len__(self) -> int:
        return int(self.query_idx.shape[0])

    @property
    def single_label(self) -> bool:
        return len(self) == self.n_queries

    def targets(self) -> np.ndarray:
        """The one labeled record per query; only valid for single-label sets."""
        if not self.single_label:
            raise ValueError("label set has multi-label queries; no unique targets")
        return self.record_idx

    def labels_for(self, query: int) -> tuple[np.ndarray, np.ndarray]:
        """(record indices, relevances) labeled for one query."""
        lo, hi = self._offsets[query], self._offsets[query + 1]
        return self.record_idx[lo:hi], self.relevance[lo:hi]

    def entries(self) -> list[tuple[int, int, float]]:
        return [
            (int(q), int(r), float(w))
            for q, r, w in zip(self.query_idx, self.record_idx, self.relevance)
        ]


@dataclass(frozen=True)
class Aggregates:
    """Per-record sums of the training queries labeled to each record.

    Row i is the (constant) gradient direction along which record i's
    embedding wants to move; the L2 norm of every row is cached.
    """

    values: np.ndarray
    norms: np.ndarray

    @classmethod
    def from_values(cls, values: np.ndarray) -> "Aggregates":
        arr = np.ascontiguousarray(values, dtype=np.float64)
        return cls(arr, np.linalg.norm(arr, axis=1))

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    def unit(self) -> np.ndarray:
        """Unit-norm rows; zero rows stay zero."""
        return unit_rows(self.values, self.norms)


@dataclass(frozen=True)
class CorrectnessVector:
    """Per-query top-1 correctness flags under the strict-tie rule."""

    flags: np.ndarray

    @property
    def count(self) -> int:
        return int(self.flags.sum())

    def __len__(self) -> int:
        return int(self.flags.shape[0])


@dataclass
class FineTuneReport:
    """Outcome summary shared by every fine-tuning method."""

    method: str
    gamma_star: float
    val_correct_before: int
    val_correct_after: int
    n: int
    d: int
    n_train: int
    n_val: int
    config: dict
    timings_ms: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "gamma_star": self.gamma_star,
            "val_correct_before": self.val_correct_before,
            "val_correct_after": self.val_correct_after,
            "n": self.n,
            "d": self.d,
            "n_train": self.n_train,
            "n_val": self.n_val,
            "config": dict(self.config),
            "timings_ms": dict(self.timings_ms),
        }


def compute_aggregates(
    train_queries: np.ndarray,
    train_labels: LabelSet,
    n_records: int | None = None,
    weighted: bool = False,
) -> Aggregates:
    """Sum each record's labeled training queries into its gradient row.

    With ``weighted`` each query contribution is scaled by its relevance;
    otherwise relevance is ignored. Records never referenced by a label get a
    zero row.
    """
    q = as_matrix(train_queries, "train queries")
    if train_labels.n_queries != q.shape[0]:
        raise ValueError(
            f"label set covers {train_labels.n_queries} queries "
            f"but {q.shape[0]} query rows were given"
        )
    if n_records is None:
        n_records = train_labels.n_records
    elif n_records != train_labels.n_records:
        raise ValueError(
            f"label set addresses {train_labels.n_records} records, expected {n_records}"
        )
    contrib = q[train_labels.query_idx]
    if weighted:
        contrib = contrib * train_labels.relevance[:, None]
    out = np.zeros((n_records, q.shape[1]), dtype=np.float64)
    np.add.at(out, train_labels.record_idx, contrib)
    return Aggregates.from_values(out)


def score_all(queries: np.ndarray, data: np.ndarray, threads: int = 1) -> np.ndarray:
    """Inner-product scores of every query against every record, in float64.

    Parallelism splits over fixed-size query chunks so each output row is
    accumulated in one place; the result is bit-identical for any thread count.
    """
    q = np.ascontiguousarray(queries, dtype=np.float64)
    d = np.ascontiguousarray(data, dtype=np.float64)
    if q.ndim != 2 or d.ndim != 2 or q.shape[1] != d.shape[1]:
        raise ValueError(f"shape mismatch: queries {q.shape} vs data {d.shape}")
    if q.shape[0] <= _CHUNK:
        return q @ d.T
    # The chunk layout is fixed so the exact same matmul calls happen no
    # matter how many threads run them; only the scheduling differs.
    out = np.empty((q.shape[0], d.shape[0]), dtype=np.float64)
    spans = [(i, min(i + _CHUNK, q.shape[0])) for i in range(0, q.shape[0], _CHUNK)]

    def fill(span):
        lo, hi = span
        np.matmul(q[lo:hi], d.T, out=out[lo:hi])

    if threads <= 1:
        for span in spans:
            fill(span)
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, spans))
    return out


_CHUNK = 256


def correctness(scores: np.ndarray, labels: LabelSet) -> CorrectnessVector:
    """Strict top-1 correctness of each query given a full score matrix.

    Single-label: the labeled record must strictly beat every other record
    (a tied best score counts as incorrect). Multi-label: for every pair of
    relevance tiers the higher tier's scores must all strictly beat the lower
    tier's, and every labeled record must strictly beat every unlabeled one.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2:
        raise ValueError(f"scores must be 2-D, got shape {s.shape}")
    if s.shape[0] != labels.n_queries or s.shape[1] != labels.n_records:
        raise ValueError(
            f"scores shape {s.shape} does not match labels "
            f"({labels.n_queries} queries x {labels.n_records} records)"
        )
    if labels.single_label:
        return _correctness_single(s, labels.targets())
    return _correctness_tiered(s, labels)


def _correctness_single(scores: np.ndarray, targets: np.ndarray) -> CorrectnessVector:
    rows = np.arange(scores.shape[0])
    own = scores[rows, targets].copy()
    # Mask the target column in place, take the rival max, then restore.
    scores[rows, targets] = -np.inf
    rival = scores.max(axis=1)
    scores[rows, targets] = own
    return CorrectnessVector(own > rival)


def _correctness_tiered(scores: np.ndarray, labels: LabelSet) -> CorrectnessVector:
    flags = np.zeros(labels.n_queries, dtype=bool)
    for i in range(labels.n_queries):
        recs, rels = labels.labels_for(i)
        row = scores[i]
        labeled = row[recs]
        if recs.shape[0] < labels.n_records:
            masked = row.copy()
            masked[recs] = -np.inf
            if labeled.min() <= masked.max():
                continue
        order = np.argsort(-rels, kind="stable")
        rel_sorted = rels[order]
        val_sorted = labeled[order]
        ok = True
        for j in range(1, rel_sorted.shape[0]):
            if rel_sorted[j] < rel_sorted[j - 1]:
                # Tier boundary: everything above must strictly beat everything below.
                if val_sorted[:j].min() <= val_sorted[j:].max():
                    ok = False
                    break
        flags[i] = ok
    return CorrectnessVector(flags)
