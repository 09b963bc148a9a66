"""Brute-force references for certifying the closed-form solvers.

Everything here favors obvious math over speed: per-row loops, direct
formula evaluation, and rejection sampling. The functions deliberately avoid
the solver modules so a bug there cannot leak into the reference answers;
only the shared scoring and correctness primitives are reused. Inputs are
capped at desk scale to keep test runtime bounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LabelSet, as_matrix, correctness, score_all

__all__ = ["OracleBudget", "gamma_grid_oracle", "feasible_sampler_oracle"]

MAX_RECORDS = 64
MAX_DIM = 8
MAX_VAL_QUERIES = 20


@dataclass(frozen=True)
class OracleBudget:
    """How much brute force to spend: grid resolution, sample count, seed."""

    grid_points: int = 257
    random_samples: int = 100_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.grid_points < 1:
            raise ValueError(f"grid_points must be positive, got {self.grid_points}")
        if self.random_samples < 1:
            raise ValueError(f"random_samples must be positive, got {self.random_samples}")


def _check_scale(data: np.ndarray, val_queries: np.ndarray) -> None:
    n, d = data.shape
    if n > MAX_RECORDS or d > MAX_DIM or val_queries.shape[0] > MAX_VAL_QUERIES:
        raise ValueError(
            f"oracle inputs exceed desk scale (n <= {MAX_RECORDS}, d <= {MAX_DIM}, "
            f"n_V <= {MAX_VAL_QUERIES}): got n={n}, d={d}, n_V={val_queries.shape[0]}"
        )


def _magnitude_move(data: np.ndarray, gradients: np.ndarray, gamma: float) -> np.ndarray:
    moved = data.copy()
    for i in range(data.shape[0]):
        norm = math.sqrt(float(np.dot(gradients[i], gradients[i])))
        if norm > 0.0:
            moved[i] = data[i] + gamma * gradients[i] / norm
    return moved


def _sphere_move(data: np.ndarray, gradients: np.ndarray, gamma: float) -> np.ndarray:
    moved = data.copy()
    for i in range(data.shape[0]):
        g = gradients[i]
        row = data[i]
        gnorm = math.sqrt(float(np.dot(g, g)))
        if gnorm == 0.0 or float(np.dot(g, row)) < 0.0:
            continue
        unit = g / gnorm
        cos = min(max(float(np.dot(unit, row)), 0.0), 1.0)
        if cos >= 1.0 - 0.5 * gamma:
            moved[i] = unit
            continue
        residual = unit - cos * row
        res_norm = math.sqrt(float(np.dot(residual, residual)))
        if res_norm <= 1e-12:
            continue
        tangent = residual / res_norm
        moved[i] = (
            row
            + 0.5 * math.sqrt(gamma * (4.0 - gamma)) * tangent
            - 0.5 * gamma * row
        )
    return moved


def gamma_grid_oracle(
    data: np.ndarray,
    gradients: np.ndarray,
    val_queries: np.ndarray,
    val_labels: LabelSet,
    candidates,
    constraint: str = "magnitude",
) -> tuple[float, int]:
    """Best (gamma, correct count) over explicit candidates, by enumeration.

    Applies the constrained move at every candidate and counts correct
    validation queries directly. Ties go to the smallest gamma.
    """
    d = as_matrix(data)
    g = as_matrix(gradients, "gradients")
    q = as_matrix(val_queries, "validation queries")
    _check_scale(d, q)
    if constraint == "magnitude":
        move = _magnitude_move
        limit = math.inf
    elif constraint == "sphere":
        move = _sphere_move
        limit = 4.0
    else:
        raise ValueError(f"constraint must be 'magnitude' or 'sphere', got {constraint!r}")
    best_gamma = 0.0
    best_count = -1
    for gamma in sorted(set(float(c) for c in candidates)):
        if not (0.0 <= gamma <= limit):
            raise ValueError(f"candidate gamma {gamma} outside [0, {limit}]")
        count = correctness(score_all(q, move(d, g, gamma)), val_labels).count
        if count > best_count:
            best_gamma = gamma
            best_count = count
    return best_gamma, best_count


def feasible_sampler_oracle(
    data_row: np.ndarray,
    grad_row: np.ndarray,
    gamma: float,
    constraint: str,
    samples: int = 100_000,
    seed: int = 0,
) -> float:
    """Best sampled value of grad . move under one row's constraint.

    The ball constraint bounds the move norm by gamma; the sphere-cap
    constraint requires the moved row to stay unit-norm with squared move
    length at most gamma. The zero move is always feasible, so the result is
    never negative.
    """
    d = np.asarray(data_row, dtype=np.float64).reshape(-1)
    g = np.asarray(grad_row, dtype=np.float64).reshape(-1)
    if d.shape != g.shape:
        raise ValueError(f"row shapes differ: {d.shape} vs {g.shape}")
    if d.shape[0] > MAX_DIM:
        raise ValueError(f"oracle rows are capped at d <= {MAX_DIM}, got {d.shape[0]}")
    if gamma < 0.0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    if gamma == 0.0:
        return 0.0
    rng = np.random.default_rng(seed)
    if constraint == "ball":
        directions = rng.standard_normal((samples, d.shape[0]))
        norms = np.linalg.norm(directions, axis=1)
        norms[norms == 0.0] = 1.0
        radii = gamma * rng.random(samples) ** (1.0 / d.shape[0])
        moves = directions / norms[:, None] * radii[:, None]
        # The optimum sits on the boundary; add pure boundary samples too.
        boundary = directions / norms[:, None] * gamma
        values = np.concatenate([moves @ g, boundary @ g])
    elif constraint == "sphere-cap":
        if gamma > 4.0:
            raise ValueError(f"sphere-cap gamma must be within [0, 4], got {gamma}")
        spread = math.sqrt(gamma)
        perturbed = d[None, :] + spread * rng.standard_normal((samples, d.shape[0]))
        norms = np.linalg.norm(perturbed, axis=1)
        keep = norms > 0.0
        landed = perturbed[keep] / norms[keep, None]
        moves = landed - d[None, :]
        lengths = np.einsum("ij,ij->i", moves, moves)
        moves = moves[lengths <= gamma]
        if moves.shape[0] == 0:
            return 0.0
        values = moves @ g
    else:
        raise ValueError(f"constraint must be 'ball' or 'sphere-cap', got {constraint!r}")
    return max(float(values.max()), 0.0)
