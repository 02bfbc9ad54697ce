"""Tests for the ridge knockoff filter."""

import math

import numpy as np
import pytest

from core.checkpoint import load_model, save_model
from core.datagen import generate_dataset, oracle_knockoff_independent
from core.errors import InvalidArgumentError
from core.filter import (
    evaluate_selection,
    fit_ridge,
    knockoff_statistics,
    run_filter,
    select_features,
    selection_threshold,
)
from core.models import (
    CoefficientSpec,
    DatasetSpec,
    ResponseSpec,
    SelectionConfig,
    SelectionResult,
)
from core.seeding import derive_seed


def _brute_force_threshold(w: np.ndarray, q: float) -> float:
    best = math.inf
    for t in np.abs(w[w != 0]):
        ratio = (1 + np.sum(w <= -t)) / max(1, np.sum(w >= t))
        if ratio <= q:
            best = min(best, float(t))
    return best


class TestThreshold:
    """Tests for the knockoff+ threshold."""

    def test_worked_example(self):
        """The smallest qualifying magnitude is chosen."""
        w = np.array([3.0, -1.0, 2.0, 0.5, -0.2, 4.0])
        assert selection_threshold(w, 0.5) == 0.5
        selected, tau = select_features(w, 0.5)
        assert selected == [0, 2, 3, 5]
        assert tau == 0.5

    def test_matches_brute_force(self):
        """The vectorized threshold agrees with a direct search."""
        rng = np.random.default_rng(0)
        for _ in range(20):
            w = rng.normal(0.5, 1.0, size=25)
            for q in (0.1, 0.2, 0.5):
                assert selection_threshold(w, q) == _brute_force_threshold(w, q)

    def test_all_zero(self):
        """No nonzero statistic means nothing is selected."""
        selected, tau = select_features(np.zeros(5), 0.1)
        assert selected == []
        assert math.isinf(tau)

    def test_too_few_positives(self):
        """Knockoff+ cannot select fewer than 1/q features."""
        w = np.array([5.0, 4.0, 3.0])
        assert math.isinf(selection_threshold(w, 0.1))

    def test_invalid_q(self):
        """q must lie in (0, 1]."""
        with pytest.raises(InvalidArgumentError, match="q must"):
            selection_threshold(np.ones(3), 0.0)


class TestStatistics:
    """Tests for ridge fitting and coefficient differences."""

    def test_coefficient_difference(self):
        """w_j = |b_j| - |b_{j+p}|."""
        w = knockoff_statistics(np.array([1.0, -2.0, 0.5, 3.0]))
        np.testing.assert_allclose(w, [0.5, -1.0])

    def test_odd_length(self):
        """An odd coefficient vector has no knockoff half."""
        with pytest.raises(InvalidArgumentError, match="even length"):
            knockoff_statistics(np.ones(3))

    def test_swapping_halves_flips_sign(self):
        """Exchanging X and X~ negates every statistic."""
        rng = np.random.default_rng(1)
        X, X_tilde = rng.normal(size=(50, 4)), rng.normal(size=(50, 4))
        y = X[:, 0] + rng.normal(size=50)
        beta, _ = fit_ridge(np.hstack([X, X_tilde]), y, [1.0])
        beta_swapped, _ = fit_ridge(np.hstack([X_tilde, X]), y, [1.0])
        np.testing.assert_allclose(
            knockoff_statistics(beta), -knockoff_statistics(beta_swapped), atol=1e-8
        )

    def test_single_penalty_skips_cv(self):
        """A one-value grid is used as is."""
        rng = np.random.default_rng(2)
        _, penalty = fit_ridge(rng.normal(size=(20, 4)), rng.normal(size=20), [0.5])
        assert penalty == 0.5

    def test_cv_picks_from_grid(self):
        """Cross-validation returns a grid value."""
        rng = np.random.default_rng(3)
        design = rng.normal(size=(60, 6))
        y = design[:, 0] + rng.normal(size=60)
        grid = [0.01, 1.0, 100.0]
        _, penalty = fit_ridge(design, y, grid, folds=3, seed=0)
        assert penalty in grid

    def test_singular_zero_penalty_falls_back(self):
        """Penalty 0 on duplicated columns uses the smallest positive penalty."""
        rng = np.random.default_rng(4)
        X = rng.normal(size=(30, 3))
        y = rng.normal(size=30)
        _, penalty = fit_ridge(np.hstack([X, X]), y, [0.0])
        assert penalty == 1e-3

    def test_non_finite_rejected(self):
        """NaN in the design is rejected."""
        design = np.ones((5, 2))
        design[0, 0] = np.nan
        with pytest.raises(InvalidArgumentError, match="finite"):
            fit_ridge(design, np.ones(5), [1.0])


class TestEvaluation:
    """Tests for FDP and power."""

    def test_fdp_and_power(self):
        """One false and two true discoveries."""
        fdp, power = evaluate_selection([0, 1, 2], np.array([True, True, False, False]))
        assert fdp == pytest.approx(1 / 3)
        assert power == 1.0

    def test_empty_selection(self):
        """An empty selection has FDP 0 and power 0."""
        assert evaluate_selection([], np.array([True, False])) == (0.0, 0.0)

    def test_no_nonnulls(self):
        """Power is 0 when every feature is null."""
        fdp, power = evaluate_selection([1], np.array([False, False]))
        assert fdp == 1.0
        assert power == 0.0

    def test_run_filter_strong_signal(self):
        """Strong signals with independent knockoffs are all recovered."""
        rng = np.random.default_rng(5)
        n, p, m = 300, 30, 15
        X = rng.normal(size=(n, p))
        X_tilde = rng.normal(size=(n, p))
        mask = np.zeros(p, dtype=bool)
        mask[:m] = True
        y = X[:, :m] @ np.full(m, 2.0) + rng.normal(size=n)
        result = run_filter(X, X_tilde, y, mask, SelectionConfig(q=0.1), seed=0,
                            metadata={"knockoff_source": "test"})
        assert result.power == 1.0
        assert result.fdp < 0.5
        assert len(result.w) == p
        assert result.metadata == {"knockoff_source": "test"}
        assert result.penalty in SelectionConfig().penalty_grid

    def test_run_filter_without_truth(self, tmp_path):
        """No mask leaves FDP and power unset and keeps the digest."""
        rng = np.random.default_rng(6)
        X, X_tilde = rng.normal(size=(80, 6)), rng.normal(size=(80, 6))
        y = 2.0 * X[:, 0] + rng.normal(size=80)
        result = run_filter(X, X_tilde, y, None, SelectionConfig(q=0.2), seed=0,
                            config_digest="abc123")
        assert result.fdp is None
        assert result.power is None
        assert not result.has_ground_truth
        assert "n/a" in result.score_text()
        assert result.config_digest == "abc123"
        save_model(result, tmp_path / "selection.json")
        restored = load_model(SelectionResult, tmp_path / "selection.json")
        assert restored.config_digest == "abc123"
        assert restored.fdp is None


# =============================================================================
# FDR control
# =============================================================================


class TestFdrControl:
    """Statistical check of the filter with exact knockoffs."""

    @pytest.mark.slow
    def test_mean_fdp_within_target(self):
        """Fifty independent-Gaussian draws keep the mean FDP near q."""
        q, draws = 0.1, 50
        coefficients = CoefficientSpec(scale_divisor=2.0, num_nonnull=10)
        fdps, powers = [], []
        for seed in range(draws):
            dataset = generate_dataset(
                DatasetSpec(kind="gaussian"), 400, 40, coefficients, ResponseSpec(), seed=seed
            )
            X_tilde = oracle_knockoff_independent(dataset.X, seed=derive_seed(seed, "oracle"))
            result = run_filter(
                dataset.X, X_tilde, dataset.Y, dataset.truth_mask, SelectionConfig(q=q),
                seed=derive_seed(seed, "filter"),
            )
            fdps.append(result.fdp)
            powers.append(result.power)
        assert np.mean(fdps) <= q + 0.05
        assert np.mean(powers) >= 0.5
