"""Sphere-constrained fine-tuning: moves stay on the unit sphere.

Records move toward their aggregated training-query direction while keeping
unit norm, with the squared move length capped by gamma in [0, 4]. Small caps
rotate a record inside the spherical cap around its current position; once the
cap is wide enough the record lands exactly on its unit gradient direction.

gamma can be selected two ways: a dense grid scan (the practical default), or
an exact pass that solves, per validation query and rival record, the set of
gamma values keeping the query correct. Each pairwise condition reduces to the
sign of a * sqrt(gamma * (4 - gamma)) + b * gamma + c on (0, 4).
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
from .magnitude import Interval, max_overlap

__all__ = [
    "SphereGeometry",
    "GammaIntervalSet",
    "entry_normalize",
    "prepare_geometry",
    "sphere_delta",
    "solve_sqrt_quadratic",
    "feasible_caps",
    "nudge_n_grid",
    "nudge_n_exact",
]

# Rows whose gradient is this close to parallel with the data row keep a zero
# move (the rotation direction is undefined there).
PARALLEL_EPS = 1e-12

# Interval slivers and gaps below this width are numerical noise.
WIDTH_EPS = 1e-12


@dataclass(frozen=True)
class SphereGeometry:
    """Per-record quantities driving the constrained move.

    ``moving`` marks records that actually rotate: nonzero aggregate, a
    non-negative alignment with the data row, and a well-defined rotation
    plane. Records failing any of those keep a zero move; their ``cap`` is 0
    and their capped direction is the data row itself, so every formula below
    degenerates to the static score for them.
    """

    data: np.ndarray
    grad_norm: np.ndarray
    unit_grad: np.ndarray
    tangent: np.ndarray
    cos_theta: np.ndarray
    cap: np.ndarray
    moving: np.ndarray
    capped_dirs: np.ndarray


def entry_normalize(data: np.ndarray) -> tuple[np.ndarray, bool]:
    """Bring data rows onto the unit sphere; flag whether that changed them.

    The flag is True when any row deviated from unit norm by more than 1e-6;
    it ends up in the run report so callers see their input was adjusted.
    Zero rows have no direction and are rejected.
    """
    d = as_matrix(data)
    norms = np.linalg.norm(d, axis=1)
    if (norms == 0.0).any():
        row = int(np.flatnonzero(norms == 0.0)[0])
        raise ValueError(f"data row {row} has zero norm; sphere methods need nonzero rows")
    changed = bool((np.abs(norms - 1.0) > 1e-6).any())
    return d / norms[:, None], changed


def prepare_geometry(data: np.ndarray, aggregates: Aggregates) -> SphereGeometry:
    """Derive the rotation geometry per record from unit-norm data rows."""
    d = as_matrix(data)
    norms = np.linalg.norm(d, axis=1)
    off = np.abs(norms - 1.0) > 1e-6
    if off.any():
        row = int(np.flatnonzero(off)[0])
        raise ValueError(
            f"data row {row} has norm {norms[row]:.6g}; rows must be unit-norm "
            "(normalize on entry first)"
        )
    d = d / norms[:, None]

    g = aggregates.values
    if g.shape != d.shape:
        raise ValueError(f"aggregate shape {g.shape} does not match data shape {d.shape}")
    gnorm = aggregates.norms
    dots = np.einsum("ij,ij->i", d, g)
    active = (gnorm > 0.0) & (dots >= 0.0)
    effective_norm = np.where(active, gnorm, 0.0)

    unit_grad = np.zeros_like(d)
    unit_grad[active] = g[active] / gnorm[active, None]
    cos = np.ones(d.shape[0], dtype=np.float64)
    cos[active] = np.clip(np.einsum("ij,ij->i", d[active], unit_grad[active]), 0.0, 1.0)

    # Rotation direction: the gradient component orthogonal to the data row.
    proj = unit_grad - cos[:, None] * d
    proj[~active] = 0.0
    proj_norm = np.linalg.norm(proj, axis=1)
    moving = active & (proj_norm > PARALLEL_EPS)
    tangent = np.zeros_like(d)
    tangent[moving] = proj[moving] / proj_norm[moving, None]

    cap = np.zeros(d.shape[0], dtype=np.float64)
    cap[moving] = 2.0 - 2.0 * cos[moving]
    capped_dirs = np.where(moving[:, None], unit_grad, d)
    return SphereGeometry(d, effective_norm, unit_grad, tangent, cos, cap, moving, capped_dirs)


def sphere_delta(geometry: SphereGeometry, gamma: float) -> np.ndarray:
    """Per-record move for a given cap; the result keeps every row unit-norm.

    A moving record whose angle fits inside the cap (cos theta >= 1 - gamma/2)
    lands on its unit gradient direction; otherwise it rotates as far as the
    cap allows. Non-moving records get exactly zero.
    """
    if not (0.0 <= gamma <= 4.0):
        raise ValueError(f"gamma must be within [0, 4], got {gamma}")
    delta = np.zeros_like(geometry.data)
    landed = geometry.moving & (geometry.cap <= gamma)
    partial = geometry.moving & ~landed
    delta[landed] = geometry.unit_grad[landed] - geometry.data[landed]
    if partial.any():
        swing = 0.5 * math.sqrt(gamma * (4.0 - gamma))
        delta[partial] = swing * geometry.tangent[partial] - 0.5 * gamma * geometry.data[partial]
    return delta


def solve_sqrt_quadratic(a: float, b: float, c: float) -> tuple[tuple[float, float], ...]:
    """Open sub-intervals of (0, 4) where a*sqrt(g*(4-g)) + b*g + c > 0.

    Candidate roots come from the squared form
    (a^2 + b^2) g^2 + (2bc - 4a^2) g + c^2 = 0 and are kept only when the
    original expression actually vanishes there (squaring introduces mirror
    roots). Signs between verified roots are read off at midpoints, which also
    handles tangencies.
    """
    roots: list[float] = []
    if a == 0.0 and b == 0.0:
        return ((0.0, 4.0),) if c > 0.0 else ()
    if a == 0.0:
        r = -c / b
        if 0.0 < r < 4.0:
            roots.append(r)
    else:
        qa = a * a + b * b
        qb = 2.0 * b * c - 4.0 * a * a
        qc = c * c
        disc = qb * qb - 4.0 * qa * qc
        candidates: list[float] = []
        if disc >= 0.0:
            sq = math.sqrt(disc)
            q = -0.5 * (qb + sq) if qb >= 0.0 else -0.5 * (qb - sq)
            candidates.append(q / qa)
            if q != 0.0:
                candidates.append(qc / q)
            else:
                candidates.append(0.0)
        scale = max(2.0 * abs(a) + 4.0 * abs(b) + abs(c), 1e-300)
        tol = 1e-9 * scale
        for r in candidates:
            if 0.0 < r < 4.0 and abs(_sqrt_quad(a, b, c, r)) <= tol:
                roots.append(r)
        roots.sort()
        deduped: list[float] = []
        for r in roots:
            if not deduped or r - deduped[-1] > WIDTH_EPS * (1.0 + r):
                deduped.append(r)
        roots = deduped

    bounds = [0.0] + roots + [4.0]
    out: list[tuple[float, float]] = []
    for lo, hi in zip(bounds, bounds[1:]):
        if hi - lo <= 0.0:
            continue
        mid = 0.5 * (lo + hi)
        if _sqrt_quad(a, b, c, mid) > 0.0:
            out.append((lo, hi))
    return tuple(out)


def _sqrt_quad(a: float, b: float, c: float, g: float) -> float:
    return a * math.sqrt(g * (4.0 - g)) + b * g + c


@dataclass(frozen=True)
class GammaIntervalSet:
    """Disjoint, sorted open intervals of feasible caps within (0, 4)."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        prev = -math.inf
        for lo, hi in self.intervals:
            if not (0.0 <= lo < hi <= 4.0):
                raise ValueError(f"interval ({lo}, {hi}) outside the (0, 4) domain")
            if lo < prev:
                raise ValueError("intervals must be sorted and disjoint")
            prev = hi

    @classmethod
    def full(cls) -> "GammaIntervalSet":
        return cls(((0.0, 4.0),))

    @property
    def empty(self) -> bool:
        return not self.intervals

    def contains(self, gamma: float) -> bool:
        return any(lo < gamma < hi for lo, hi in self.intervals)

    def intersect(self, other: "GammaIntervalSet") -> "GammaIntervalSet":
        return GammaIntervalSet(_intersect(self.intervals, other.intervals))


def _intersect(a, b):
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if hi - lo > WIDTH_EPS:
            out.append((lo, hi))
        if a[i][1] <= b[j][1]:
            i += 1
        else:
            j += 1
    return tuple(out)


def _merge_pieces(pieces):
    if not pieces:
        return ()
    pieces = sorted(pieces)
    out = [list(pieces[0])]
    for lo, hi in pieces[1:]:
        if lo - out[-1][1] <= WIDTH_EPS:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return tuple((lo, hi) for lo, hi in out if hi - lo > WIDTH_EPS)


def _clip_solutions(solutions, lo, hi):
    for s_lo, s_hi in solutions:
        c_lo = max(s_lo, lo)
        c_hi = min(s_hi, hi)
        if c_hi - c_lo > WIDTH_EPS:
            yield (c_lo, c_hi)


def _pair_intervals(sy, cy, zy, ty, sj, cj, zj, tj) -> tuple[tuple[float, float], ...]:
    """Caps under which the target record outranks one rival record.

    Below both cap thresholds the two scores follow the rotating form; between
    the thresholds the earlier-capped side turns constant; above both, the
    comparison is a fixed inequality of the capped scores.
    """
    pieces: list[tuple[float, float]] = []
    t_lo, t_hi = (ty, tj) if ty <= tj else (tj, ty)
    if t_lo > 0.0:
        sols = solve_sqrt_quadratic(0.5 * (zy - zj), 0.5 * (sj - sy), sy - sj)
        pieces.extend(_clip_solutions(sols, 0.0, t_lo))
    if t_hi > t_lo:
        if ty <= tj:
            sols = solve_sqrt_quadratic(-0.5 * zj, 0.5 * sj, cy - sj)
        else:
            sols = solve_sqrt_quadratic(0.5 * zy, -0.5 * sy, sy - cj)
        pieces.extend(_clip_solutions(sols, t_lo, t_hi))
    if cy > cj:
        pieces.append((t_hi, 4.0))
    return _merge_pieces(pieces)


def feasible_caps(
    s_row: np.ndarray,
    c_row: np.ndarray,
    z_row: np.ndarray,
    caps: np.ndarray,
    target: int,
) -> GammaIntervalSet:
    """All caps keeping one validation query correct, as an interval set."""
    sy = float(s_row[target])
    cy = float(c_row[target])
    zy = float(z_row[target])
    ty = float(caps[target])
    current = GammaIntervalSet.full()
    for j in range(s_row.shape[0]):
        if j == target:
            continue
        pair = _pair_intervals(
            sy, cy, zy, ty, float(s_row[j]), float(c_row[j]), float(z_row[j]), float(caps[j])
        )
        current = current.intersect(GammaIntervalSet(pair))
        if current.empty:
            break
    return current


def _prepare(data, train_queries, train_labels, weighted):
    d, changed = entry_normalize(data)
    agg = compute_aggregates(train_queries, train_labels, d.shape[0], weighted=weighted)
    return prepare_geometry(d, agg), changed


def _val_scalars(geometry: SphereGeometry, val_queries: np.ndarray, threads: int):
    q = as_matrix(val_queries, "validation queries")
    static = score_all(q, geometry.data, threads=threads)
    capped = score_all(q, geometry.capped_dirs, threads=threads)
    swing = score_all(q, geometry.tangent, threads=threads)
    return static, capped, swing


def _scores_at(static, capped, swing, caps, gamma):
    """Score matrix at one cap value from the precomputed scalar matrices."""
    if gamma == 0.0:
        return static.copy()
    rot = (1.0 - 0.5 * gamma) * static + (0.5 * math.sqrt(gamma * (4.0 - gamma))) * swing
    return np.where(caps[None, :] <= gamma, capped, rot)


def nudge_n_grid(
    data: np.ndarray,
    train_queries: np.ndarray,
    train_labels: LabelSet,
    val_queries: np.ndarray,
    val_labels: LabelSet,
    grid_points: int = 1024,
    weighted: bool = False,
    threads: int = 1,
) -> tuple[np.ndarray, FineTuneReport]:
    """Sphere-constrained run with the cap picked off a dense grid.

    Candidates are 0 plus ``grid_points`` values evenly spaced over (0, 4];
    the smallest candidate wins ties. Per-candidate scoring uses only the
    precomputed scalar matrices, so its cost is independent of the embedding
    dimension. Multi-label validation queries are supported.
    """
    if grid_points < 2:
        raise ValueError(f"grid_points must be >= 2, got {grid_points}")
    t0 = time.perf_counter()
    geometry, renormalized = _prepare(data, train_queries, train_labels, weighted)
    static, capped, swing = _val_scalars(geometry, val_queries, threads)
    before = correctness(static, val_labels).count
    t1 = time.perf_counter()

    gammas = [0.0] + [4.0 * k / grid_points for k in range(1, grid_points + 1)]
    counts = np.zeros(len(gammas), dtype=np.int64)

    def scan(span):
        lo, hi = span
        for k in range(lo, hi):
            scores = _scores_at(static, capped, swing, geometry.cap, gammas[k])
            counts[k] = correctness(scores, val_labels).count

    spans = [(i, min(i + 64, len(gammas))) for i in range(0, len(gammas), 64)]
    if threads > 1 and len(spans) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(scan, spans))
    else:
        for span in spans:
            scan(span)

    best = int(np.argmax(counts))
    gamma = gammas[best]
    t2 = time.perf_counter()
    tuned = geometry.data + sphere_delta(geometry, gamma)
    after = correctness(score_all(val_queries, tuned, threads=threads), val_labels).count
    if after < before:
        tuned = geometry.data
        after = before
        gamma = 0.0
    t3 = time.perf_counter()
    report = FineTuneReport(
        method="n",
        gamma_star=gamma,
        val_correct_before=before,
        val_correct_after=after,
        n=geometry.data.shape[0],
        d=geometry.data.shape[1],
        n_train=np.asarray(train_queries).shape[0],
        n_val=val_labels.n_queries,
        config={
            "grid_points": grid_points,
            "weighted": weighted,
            "renormalized": renormalized,
        },
        timings_ms={
            "aggregate": (t1 - t0) * 1e3,
            "solve": (t2 - t1) * 1e3,
            "apply": (t3 - t2) * 1e3,
        },
    )
    return tuned, report


def nudge_n_exact(
    data: np.ndarray,
    train_queries: np.ndarray,
    train_labels: LabelSet,
    val_queries: np.ndarray,
    val_labels: LabelSet,
    weighted: bool = False,
    threads: int = 1,
) -> tuple[np.ndarray, FineTuneReport]:
    """Sphere-constrained run with the cap picked by exact interval analysis.

    Builds, per validation query, the exact set of caps keeping it correct,
    then stabs the family at the deepest region (midpoint placement, gamma = 0
    compared separately). Requires single-label validation queries.
    """
    if not val_labels.single_label:
        raise ValueError(
            "exact cap selection needs single-label validation queries; "
            "use the grid-selected sphere method for multi-label validation"
        )
    t0 = time.perf_counter()
    geometry, renormalized = _prepare(data, train_queries, train_labels, weighted)
    static, capped, swing = _val_scalars(geometry, val_queries, threads)
    before = correctness(static, val_labels).count
    t1 = time.perf_counter()

    targets = val_labels.targets()
    intervals: list[Interval] = []
    for i in range(val_labels.n_queries):
        caps_i = feasible_caps(static[i], capped[i], swing[i], geometry.cap, int(targets[i]))
        for lo, hi in caps_i.intervals:
            intervals.append(Interval(lo, hi))
    sweep = max_overlap(intervals, before)
    gamma = sweep.gamma_star
    t2 = time.perf_counter()
    tuned = geometry.data + sphere_delta(geometry, gamma)
    after = correctness(score_all(val_queries, tuned, threads=threads), val_labels).count
    if after < before:
        tuned = geometry.data
        after = before
        gamma = 0.0
    t3 = time.perf_counter()
    report = FineTuneReport(
        method="n-exact",
        gamma_star=gamma,
        val_correct_before=before,
        val_correct_after=after,
        n=geometry.data.shape[0],
        d=geometry.data.shape[1],
        n_train=np.asarray(train_queries).shape[0],
        n_val=val_labels.n_queries,
        config={"weighted": weighted, "renormalized": renormalized},
        timings_ms={
            "aggregate": (t1 - t0) * 1e3,
            "solve": (t2 - t1) * 1e3,
            "apply": (t3 - t2) * 1e3,
        },
    )
    return tuned, report
