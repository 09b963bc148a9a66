"""Single-call dispatch over the fine-tuning methods."""

from __future__ import annotations

import numpy as np

from .core import FineTuneReport, LabelSet
from .iterative import IterativeConfig, nudge_im, nudge_in
from .magnitude import nudge_m
from .sphere import nudge_n_exact, nudge_n_grid

__all__ = ["METHODS", "finetune"]

METHODS = ("m", "n", "n-exact", "im", "in")


def finetune(
    method: str,
    data: np.ndarray,
    train_queries: np.ndarray,
    train_labels: LabelSet,
    val_queries: np.ndarray,
    val_labels: LabelSet,
    grid_points: int = 1024,
    iterative: IterativeConfig | None = None,
    weighted: bool = False,
    threads: int = 1,
) -> tuple[np.ndarray, FineTuneReport]:
    """Run one fine-tuning method and return (tuned embeddings, report)."""
    common = dict(
        data=data,
        train_queries=train_queries,
        train_labels=train_labels,
        val_queries=val_queries,
        val_labels=val_labels,
        weighted=weighted,
        threads=threads,
    )
    if method == "m":
        return nudge_m(**common)
    if method == "n":
        return nudge_n_grid(grid_points=grid_points, **common)
    if method == "n-exact":
        return nudge_n_exact(**common)
    if method in ("im", "in"):
        if iterative is None:
            raise ValueError(f"method {method!r} needs iterative settings (alpha, iters)")
        run = nudge_im if method == "im" else nudge_in
        return run(config=iterative, **common)
    raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
