"""Shared instance builders for the test suite."""

import numpy as np

from nudge import LabelSet, normalize_rows


def single_labels(targets, n_records):
    """Build a LabelSet mapping query i to targets[i] with relevance 1."""
    entries = [(i, int(t), 1.0) for i, t in enumerate(targets)]
    return LabelSet.from_entries(len(targets), n_records, entries)


def unstructured(rng, n, d, n_train, n_val):
    """Random unit-norm records and queries with random single labels."""
    data = normalize_rows(rng.standard_normal((n, d)))
    train_queries = normalize_rows(rng.standard_normal((n_train, d)))
    val_queries = normalize_rows(rng.standard_normal((n_val, d)))
    return {
        "data": data,
        "train_queries": train_queries,
        "train_labels": single_labels(rng.integers(n, size=n_train), n),
        "val_queries": val_queries,
        "val_labels": single_labels(rng.integers(n, size=n_val), n),
    }


def clustered(rng, n, d, n_train, n_val, query_noise=0.3, record_offset=0.5):
    """Records displaced from cluster centers, queries drawn near the centers.

    The displacement gives fine-tuning something to recover: each record's
    training queries agree on where the record ought to sit.
    """
    centers = normalize_rows(rng.standard_normal((n, d)))
    data = normalize_rows(centers + record_offset * rng.standard_normal((n, d)))

    def draw(idx):
        noise = query_noise * rng.standard_normal((idx.size, d))
        return normalize_rows(centers[idx] + noise)

    train_idx = rng.integers(n, size=n_train)
    val_idx = rng.integers(n, size=n_val)
    return {
        "data": data,
        "train_queries": draw(train_idx),
        "train_labels": single_labels(train_idx, n),
        "val_queries": draw(val_idx),
        "val_labels": single_labels(val_idx, n),
    }
