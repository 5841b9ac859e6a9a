"""Tests for the marginal screening baselines."""

import numpy as np
import pytest

from aqfs import baselines, simlab
from aqfs.basis import make_basis, rescale_columns
from aqfs.screening import run_path


def _toy(n=100, p=10, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(n, p))
    y = 3.0 * x[:, 2] + rng.normal(size=n)
    return x, y


class TestQsis:
    def test_top_one_equals_first_forward_pick(self):
        x, y = _toy(seed=1)
        rank = baselines.qsis(y, x, 0.5, keep=4)
        path = run_path(x, y, 0.5, steps=1)
        assert rank.retained[0] == path.steps[0].index

    def test_keep_all_when_few_covariates(self):
        x, y = _toy(p=5, seed=2)
        rank = baselines.qsis(y, x, 0.5, keep=50)
        assert sorted(rank.retained) == list(range(5))

    def test_retained_sorted_by_score_desc_ties_by_index(self):
        x, y = _toy(seed=3)
        x[:, 7] = x[:, 4]  # duplicate column -> tied scores
        rank = baselines.qsis(y, x, 0.5, keep=10)
        scores = rank.scores[list(rank.retained)]
        assert np.all(np.diff(scores) <= 0)
        assert rank.retained.index(4) < rank.retained.index(7)

    def test_monotone_transform_invariance(self):
        x, y = _toy(seed=4)
        a = baselines.qsis(y, x, 0.3, keep=5)
        b = baselines.qsis(y, np.expm1(x) + x**5, 0.3, keep=5)
        assert a.retained == b.retained
        np.testing.assert_array_equal(a.scores, b.scores)

    def test_deterministic(self):
        x, y = _toy(seed=5)
        a = baselines.qsis(y, x, 0.5, keep=6)
        b = baselines.qsis(y, x, 0.5, keep=6)
        assert a.retained == b.retained
        np.testing.assert_array_equal(a.scores, b.scores)


class TestQasis:
    def test_single_covariate_retained(self):
        rng = np.random.default_rng(6)
        x = rng.uniform(size=(60, 1))
        y = x[:, 0] + 0.2 * rng.normal(size=60)
        rank = baselines.qasis(y, x, 0.5, keep=3)
        assert rank.retained == (0,)

    def test_scores_nonnegative_zero_for_constant(self):
        x, y = _toy(seed=7)
        x = x.copy()
        x[:, 5] = 0.5
        rank = baselines.qasis(y, x, 0.5, keep=10)
        assert np.all(rank.scores >= 0.0)
        assert rank.scores[5] == 0.0

    def test_signal_column_ranked_first(self):
        x, y = _toy(seed=8)
        rank = baselines.qasis(y, x, 0.5, keep=3)
        assert rank.retained[0] == 2

    def test_requires_unit_interval(self):
        rng = np.random.default_rng(9)
        with pytest.raises(ValueError):
            baselines.qasis(rng.normal(size=30), rng.normal(size=(30, 3)), 0.5, keep=2)

    def test_deterministic(self):
        x, y = _toy(seed=10)
        a = baselines.qasis(y, x, 0.7, keep=4)
        b = baselines.qasis(y, x, 0.7, keep=4)
        np.testing.assert_array_equal(a.scores, b.scores)
        assert a.retained == b.retained

    def test_null_scores_well_below_active(self):
        # Noise columns score far below a genuinely active smooth covariate.
        basis = make_basis(3)
        null_scores = []
        active_scores = []
        for rep in range(200):
            data = simlab.generate(2, 150, 30, seed=1000 + rep)
            x01, _ = rescale_columns(data.x)
            rank = baselines.qasis(data.y, x01, 0.5, keep=5, basis=basis)
            active_scores.append(rank.scores[14])  # strong linear signal
            null_scores.append(rank.scores[9])     # pure noise column
        assert np.median(active_scores) >= 5.0 * np.median(null_scores)
