"""Tests for the brute-force reference implementations."""

import numpy as np
import pytest

from helpers import single_labels, unstructured
from nudge import compute_aggregates, nudge_m
from nudge.oracles import OracleBudget, feasible_sampler_oracle, gamma_grid_oracle


class TestOracleBudget:
    def test_defaults(self):
        """The default budget is a 257-point grid with 100k samples."""
        budget = OracleBudget()
        assert (budget.grid_points, budget.random_samples, budget.seed) == (257, 100_000, 0)

    def test_validation(self):
        """Grid and sample counts must be positive."""
        with pytest.raises(ValueError, match="grid_points"):
            OracleBudget(grid_points=0)
        with pytest.raises(ValueError, match="random_samples"):
            OracleBudget(random_samples=0)


class TestGammaGridOracle:
    def test_hand_instance(self):
        """Brute force finds the radius that flips the hand instance."""
        data = np.array([[1.0, 0.0], [0.0, 1.0]])
        gradients = np.array([[0.0, 1.0], [0.0, 0.0]])
        val_q = np.array([[0.0, 1.0]])
        labels = single_labels([0], 2)
        gamma, count = gamma_grid_oracle(
            data, gradients, val_q, labels, candidates=[0.0, 0.5, 2.0, 3.0]
        )
        assert count == 1
        assert gamma == 2.0

    def test_smallest_gamma_wins_ties(self):
        """Equal counts resolve to the smallest candidate."""
        data = np.array([[1.0, 0.0], [-1.0, 0.0]])
        gradients = np.zeros((2, 2))
        val_q = np.array([[1.0, 0.0]])
        labels = single_labels([0], 2)
        gamma, count = gamma_grid_oracle(data, gradients, val_q, labels, [0.0, 1.0, 2.0])
        assert (gamma, count) == (0.0, 1)

    def test_agrees_with_sweep_on_random_instances(self):
        """Enumeration over sweep-derived candidates matches the sweep count."""
        rng = np.random.default_rng(14)
        for _ in range(5):
            inst = unstructured(rng, 12, 4, 10, 6)
            _, report = nudge_m(
                inst["data"],
                inst["train_queries"],
                inst["train_labels"],
                inst["val_queries"],
                inst["val_labels"],
            )
            agg = compute_aggregates(inst["train_queries"], inst["train_labels"], n_records=12)
            candidates = np.linspace(0.0, 6.0, 241)
            _, count = gamma_grid_oracle(
                inst["data"], agg.values, inst["val_queries"], inst["val_labels"], candidates
            )
            assert report.val_correct_after >= count

    def test_sphere_constraint_capped(self):
        """Sphere candidates beyond 4 are rejected."""
        data = np.array([[1.0, 0.0]])
        with pytest.raises(ValueError, match="outside"):
            gamma_grid_oracle(
                data, data, data, single_labels([0], 1), [5.0], constraint="sphere"
            )

    def test_unknown_constraint(self):
        """Constraint names are validated."""
        data = np.array([[1.0, 0.0]])
        with pytest.raises(ValueError, match="constraint"):
            gamma_grid_oracle(data, data, data, single_labels([0], 1), [0.0], constraint="cube")

    def test_desk_scale_enforced(self):
        """Oversized inputs are refused outright."""
        data = np.ones((65, 2))
        with pytest.raises(ValueError, match="desk scale"):
            gamma_grid_oracle(data, data, np.ones((1, 2)), single_labels([0], 65), [0.0])
        wide = np.ones((2, 9))
        with pytest.raises(ValueError, match="desk scale"):
            gamma_grid_oracle(wide, wide, np.ones((1, 9)), single_labels([0], 2), [0.0])


class TestFeasibleSamplerOracle:
    def test_ball_optimum_near_closed_form(self):
        """Sampling the radius-1 ball around G = [3, 4] approaches 5."""
        value = feasible_sampler_oracle(
            np.array([1.0, 0.0]), np.array([3.0, 4.0]), 1.0, "ball", samples=100_000, seed=0
        )
        assert value <= 5.0 + 1e-9
        assert value >= 5.0 - 1e-2

    def test_sphere_cap_orthogonal_gradient(self):
        """A cap of 2 lets an orthogonal gradient reach its full length."""
        value = feasible_sampler_oracle(
            np.array([1.0, 0.0]), np.array([0.0, 2.0]), 2.0, "sphere-cap",
            samples=100_000, seed=0,
        )
        assert value <= 2.0 + 1e-9
        assert value >= 2.0 - 1e-2

    def test_zero_gamma_is_zero(self):
        """No move allowed means the best objective is exactly zero."""
        assert feasible_sampler_oracle(np.array([1.0, 0.0]), np.array([5.0, 1.0]), 0.0, "ball") == 0.0

    def test_never_negative(self):
        """The zero move keeps the sampled best at or above zero."""
        value = feasible_sampler_oracle(
            np.array([1.0, 0.0]), np.array([-3.0, 0.0]), 0.5, "sphere-cap", samples=5000
        )
        assert value >= 0.0

    def test_seed_determinism(self):
        """Equal seeds reproduce the sampled optimum exactly."""
        args = (np.array([0.6, 0.8]), np.array([1.0, -2.0]), 1.5, "ball")
        a = feasible_sampler_oracle(*args, samples=20_000, seed=7)
        b = feasible_sampler_oracle(*args, samples=20_000, seed=7)
        assert a == b

    def test_row_shape_checks(self):
        """Mismatched rows and oversized dimensions are rejected."""
        with pytest.raises(ValueError, match="shapes differ"):
            feasible_sampler_oracle(np.ones(3), np.ones(4), 1.0, "ball")
        with pytest.raises(ValueError, match="capped at d"):
            feasible_sampler_oracle(np.ones(9), np.ones(9), 1.0, "ball")

    def test_unknown_constraint(self):
        """Constraint names are validated."""
        with pytest.raises(ValueError, match="constraint"):
            feasible_sampler_oracle(np.ones(2), np.ones(2), 1.0, "cube")
