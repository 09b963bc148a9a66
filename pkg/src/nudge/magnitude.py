"""Magnitude-constrained fine-tuning: closed-form moves inside an L2 ball.

Each record moves along its aggregated training-query direction by a shared
radius gamma; the radius is picked by turning every validation query into a
feasibility interval of radii that would rank it correctly, then stabbing the
interval family at the deepest point with a sweep over endpoints.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .core import (
    Aggregates,
    FineTuneReport,
    LabelSet,
    as_matrix,
    compute_aggregates,
    correctness,
    score_all,
)

__all__ = [
    "Interval",
    "SweepResult",
    "magnitude_delta",
    "feasibility_intervals",
    "max_overlap",
    "nudge_m",
]

# Denominators smaller than this are treated as exactly zero when forming
# feasibility ratios.
DENOM_EPS = 1e-12


@dataclass(frozen=True)
class Interval:
    """Open interval (lo, hi) of feasible radii; hi may be +inf."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (self.lo >= 0.0):
            raise ValueError(f"interval lower endpoint must be >= 0, got {self.lo}")
        if not (self.lo < self.hi):
            raise ValueError(f"empty interval ({self.lo}, {self.hi}); represent absence by omission")

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.hi)

    def contains(self, x: float) -> bool:
        return self.lo < x < self.hi


@dataclass(frozen=True)
class SweepResult:
    """Best stabbing point of an interval family, compared against gamma = 0."""

    gamma_star: float
    correct_count: int
    best_region: Interval | None
    count_at_zero: int


def magnitude_delta(aggregates: Aggregates, gamma: float) -> np.ndarray:
    """Per-record move of length gamma along the unit aggregate direction.

    Records with a zero aggregate row do not move.
    """
    if gamma < 0.0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    return gamma * aggregates.unit()


def feasibility_intervals(
    val_queries: np.ndarray,
    val_labels: LabelSet,
    data: np.ndarray,
    aggregates: Aggregates,
    threads: int = 1,
) -> list[Interval]:
    """Per-query open intervals of radii under which the labeled record wins.

    For validation query q with target Y, record j stays beaten whenever
    gamma * (g_Y - g_j) > s_j - s_Y, where s is the static score and g the
    score against the unit aggregate direction. Positive differences give
    lower bounds, negative give upper bounds, zero differences decide
    feasibility outright (a score tie counts as infeasible). Intervals are
    clipped to (0, inf); queries whose intersection is empty are omitted.
    """
    q = as_matrix(val_queries, "validation queries")
    if not val_labels.single_label:
        raise ValueError(
            "feasibility intervals need single-label validation queries; "
            "use the grid-selected sphere method for multi-label validation"
        )
    targets = val_labels.targets()
    s = score_all(q, data, threads=threads)
    g = score_all(q, aggregates.unit(), threads=threads)

    intervals: list[Interval] = []
    n_val = q.shape[0]
    rows = np.arange(n_val)
    den = g[rows, targets][:, None] - g
    num = s - s[rows, targets][:, None]
    for i in range(n_val):
        y = targets[i]
        den_i = den[i]
        num_i = num[i]
        zero = np.abs(den_i) < DENOM_EPS
        zero[y] = False
        if (num_i[zero] >= 0.0).any():
            continue
        pos = den_i >= DENOM_EPS
        neg = den_i <= -DENOM_EPS
        pos[y] = False
        neg[y] = False
        lo = 0.0
        if pos.any():
            lo = max(0.0, float((num_i[pos] / den_i[pos]).max()))
        hi = math.inf
        if neg.any():
            hi = float((num_i[neg] / den_i[neg]).min())
        if hi <= lo:
            continue
        intervals.append(Interval(lo, hi))
    return intervals


def max_overlap(intervals: list[Interval], count_at_zero: int) -> SweepResult:
    """Deepest stabbing point of open intervals, against the gamma = 0 count.

    A single endpoint sweep finds the open region covered by the most
    intervals (ties go to the smallest lower endpoint). gamma* is the
    midpoint of a bounded winning region; an unbounded winner uses its lower
    endpoint plus the median width of the finite input intervals (1 if there
    are none). If gamma = 0 already matches the best region, gamma* is 0.
    """
    if count_at_zero < 0:
        raise ValueError("count_at_zero must be >= 0")
    if not intervals:
        return SweepResult(0.0, count_at_zero, None, count_at_zero)

    events: dict[float, int] = {}
    for iv in intervals:
        events[iv.lo] = events.get(iv.lo, 0) + 1
        if iv.bounded:
            events[iv.hi] = events.get(iv.hi, 0) - 1
    points = sorted(events)
    best_count = 0
    best_lo = 0.0
    best_hi = 0.0
    active = 0
    for idx, x in enumerate(points):
        active += events[x]
        if active > best_count:
            best_count = active
            best_lo = x
            best_hi = points[idx + 1] if idx + 1 < len(points) else math.inf

    if count_at_zero >= best_count:
        return SweepResult(0.0, count_at_zero, None, count_at_zero)

    region = Interval(best_lo, best_hi)
    if region.bounded:
        gamma = 0.5 * (region.lo + region.hi)
    else:
        widths = [iv.hi - iv.lo for iv in intervals if iv.bounded]
        pad = float(np.median(widths)) if widths else 1.0
        gamma = region.lo + pad
    return SweepResult(gamma, best_count, region, count_at_zero)


def nudge_m(
    data: np.ndarray,
    train_queries: np.ndarray,
    train_labels: LabelSet,
    val_queries: np.ndarray,
    val_labels: LabelSet,
    weighted: bool = False,
    threads: int = 1,
) -> tuple[np.ndarray, FineTuneReport]:
    """Full magnitude-variant run: aggregate, build intervals, sweep, apply.

    Returns the fine-tuned embeddings and a report. The validation count of
    the result is re-measured directly and never drops below the count at
    gamma = 0 (on the rare numerical miss the method falls back to gamma = 0).
    """
    t0 = time.perf_counter()
    d = as_matrix(data)
    agg = compute_aggregates(train_queries, train_labels, d.shape[0], weighted=weighted)
    before = correctness(score_all(val_queries, d, threads=threads), val_labels).count
    t1 = time.perf_counter()
    intervals = feasibility_intervals(val_queries, val_labels, d, agg, threads=threads)
    sweep = max_overlap(intervals, before)
    t2 = time.perf_counter()
    tuned = d + magnitude_delta(agg, sweep.gamma_star)
    after = correctness(score_all(val_queries, tuned, threads=threads), val_labels).count
    gamma = sweep.gamma_star
    if after < before:
        tuned = d
        after = before
        gamma = 0.0
    t3 = time.perf_counter()
    report = FineTuneReport(
        method="m",
        gamma_star=gamma,
        val_correct_before=before,
        val_correct_after=after,
        n=d.shape[0],
        d=d.shape[1],
        n_train=np.asarray(train_queries).shape[0],
        n_val=val_labels.n_queries,
        config={"weighted": weighted},
        timings_ms={
            "aggregate": (t1 - t0) * 1e3,
            "solve": (t2 - t1) * 1e3,
            "apply": (t3 - t2) * 1e3,
        },
    )
    return tuned, report
