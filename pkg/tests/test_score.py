"""Tests for residual signs and importance scores."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aqfs import qrsolve, score
from aqfs.score import (
    ScoreTable,
    SweepPlan,
    qsis_scores,
    score_fast,
    score_naive,
    score_sweep,
    signs,
    ustat_decomposition,
)

WORKED_VALUE = 1.0 / 108.0  # psi=(.5,-.5,.5), x=(0.1,0.2,0.3)


class TestSigns:
    def test_basic(self):
        np.testing.assert_allclose(
            signs([1.0, 3.0], [2.0, 2.0], 0.5), [-0.5, 0.5]
        )

    def test_exact_tie_uses_strict_inequality(self):
        assert signs([2.0], [2.0], 0.3)[0] == pytest.approx(0.3)

    def test_entries_are_tau_or_tau_minus_one(self):
        rng = np.random.default_rng(0)
        y = rng.normal(size=50)
        psi = signs(y, np.zeros(50), 0.25)
        assert set(np.round(np.unique(psi), 12)) <= {0.25, -0.75}

    def test_mean_sign_small_at_intercept_fit(self):
        rng = np.random.default_rng(1)
        for tau in (0.3, 0.5, 0.8):
            y = rng.normal(size=200)
            f = qrsolve.fit(np.ones((200, 1)), y, tau)
            psi = signs(y, f.fitted, tau)
            assert abs(psi.mean()) <= 1.0 / 200 + 1e-9


class TestScoreEvaluators:
    def test_worked_example(self):
        psi = np.array([0.5, -0.5, 0.5])
        x = np.array([0.1, 0.2, 0.3])
        assert score_naive(psi, x) == pytest.approx(WORKED_VALUE, abs=1e-15)
        assert score_fast(psi, x) == pytest.approx(WORKED_VALUE, abs=1e-15)

    def test_zero_signs_give_zero(self):
        assert score_fast(np.zeros(10), np.arange(10.0)) == 0.0
        assert score_naive(np.zeros(10), np.arange(10.0)) == 0.0

    def test_fast_equals_naive_with_ties(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            n = int(rng.integers(3, 120))
            x = rng.integers(0, 8, size=n).astype(float)
            tau = float(rng.uniform(0.05, 0.95))
            psi = np.where(rng.uniform(size=n) < tau, tau, tau - 1.0)
            assert score_fast(psi, x) == pytest.approx(
                score_naive(psi, x), abs=1e-12
            )

    def test_bounds(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(3, 60))
            tau = float(rng.uniform(0.05, 0.95))
            psi = np.where(rng.uniform(size=n) < tau, tau, tau - 1.0)
            val = score_fast(psi, rng.normal(size=n))
            assert 0.0 <= val <= max(tau, 1 - tau) ** 2 + 1e-15

    @settings(max_examples=100, deadline=None)
    @given(
        data=st.lists(
            st.tuples(st.booleans(), st.integers(0, 5)), min_size=3, max_size=25
        ),
        tau=st.floats(0.05, 0.95),
    )
    def test_fast_equals_naive_property(self, data, tau):
        psi = np.array([tau if hit else tau - 1.0 for hit, _ in data])
        x = np.array([float(v) for _, v in data])
        assert score_fast(psi, x) == pytest.approx(score_naive(psi, x), abs=1e-12)


class TestUStatistic:
    def test_worked_example(self):
        psi = np.array([0.5, -0.5, 0.5])
        x = np.array([0.1, 0.2, 0.3])
        d1, d2, rec = ustat_decomposition(psi, x)
        assert d1 == pytest.approx(0.125)
        assert d2 == pytest.approx(-1.0 / 12.0)
        assert rec == pytest.approx(WORKED_VALUE, abs=1e-15)

    def test_zero_signs(self):
        d1, d2, rec = ustat_decomposition(np.zeros(5), np.arange(5.0))
        assert (d1, d2, rec) == (0.0, 0.0, 0.0)

    def test_identity_against_naive(self):
        rng = np.random.default_rng(4)
        for _ in range(300):
            n = int(rng.integers(3, 13))
            tau = float(rng.uniform(0.05, 0.95))
            psi = np.where(rng.uniform(size=n) < tau, tau, tau - 1.0)
            x = rng.integers(0, 5, size=n).astype(float)
            rec = ustat_decomposition(psi, x)[2]
            assert rec == pytest.approx(score_naive(psi, x), abs=1e-10)

    def test_requires_three_observations(self):
        with pytest.raises(ValueError):
            ustat_decomposition(np.array([0.5, -0.5]), np.array([1.0, 2.0]))


class TestSweep:
    def test_single_candidate(self):
        rng = np.random.default_rng(5)
        table = score_sweep(
            np.array([0.5, -0.5, 0.5, -0.5]), x=rng.uniform(size=(4, 1))
        )
        assert table.best == 0

    def test_identical_columns_tie_to_smaller_index(self):
        rng = np.random.default_rng(6)
        col = rng.uniform(size=30)
        x = np.column_stack([col, col, rng.uniform(size=30)])
        psi = np.where(rng.uniform(size=30) < 0.5, 0.5, -0.5)
        table = score_sweep(psi, x=x)
        assert table.scores[0] == table.scores[1]
        if table.scores[0] >= table.scores[2]:
            assert table.best == 0

    def test_excluded_sentinel_never_wins(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(size=(40, 5))
        psi = np.where(rng.uniform(size=40) < 0.5, 0.5, -0.5)
        full = score_sweep(psi, x=x)
        table = score_sweep(psi, x=x, excluded={full.best})
        assert np.isnan(table.scores[full.best])
        assert table.best != full.best

    def test_all_excluded_gives_none(self):
        table = score_sweep(
            np.array([0.5, -0.5, 0.5]), x=np.ones((3, 2)) * [[0.1, 0.2]],
            excluded={0, 1},
        )
        assert table.best is None

    def test_sweep_matches_per_column_fast(self):
        rng = np.random.default_rng(8)
        x = rng.uniform(size=(60, 12))
        x[:, 4] = np.round(x[:, 4], 1)
        psi = np.where(rng.uniform(size=60) < 0.3, 0.3, -0.7)
        got = score_sweep(psi, x=x).scores
        want = np.array([score_fast(psi, x[:, k]) for k in range(12)])
        np.testing.assert_allclose(got, want, atol=1e-15)

    def test_plan_reuse_identical(self):
        rng = np.random.default_rng(9)
        x = rng.uniform(size=(50, 6))
        plan = SweepPlan.from_matrix(x)
        psi = np.where(rng.uniform(size=50) < 0.5, 0.5, -0.5)
        np.testing.assert_array_equal(
            score_sweep(psi, plan=plan).scores, score_sweep(psi, x=x).scores
        )

    def test_argmax_invariant_under_positive_scaling(self):
        rng = np.random.default_rng(10)
        x = rng.uniform(size=(50, 8))
        psi = np.where(rng.uniform(size=50) < 0.4, 0.4, -0.6)
        assert (
            score_sweep(psi, x=x).best == score_sweep(3.7 * psi, x=x).best
        )


class TestQsisScores:
    def test_equals_sweep_of_intercept_fit(self):
        rng = np.random.default_rng(11)
        x = rng.uniform(size=(70, 9))
        y = x[:, 2] + rng.normal(size=70)
        table = qsis_scores(y, x, 0.5)
        f0 = qrsolve.fit(np.ones((70, 1)), y, 0.5)
        direct = score_sweep(signs(y, f0.fitted, 0.5), x=x)
        np.testing.assert_array_equal(table.scores, direct.scores)
        assert table.best == direct.best

    def test_constant_response_is_finite(self):
        rng = np.random.default_rng(12)
        x = rng.uniform(size=(30, 4))
        table = qsis_scores(np.ones(30), x, 0.4)
        assert np.isfinite(table.scores).all()

    def test_invariant_under_monotone_covariate_transform(self):
        rng = np.random.default_rng(13)
        x = rng.uniform(size=(60, 5))
        y = x[:, 1] + rng.normal(size=60)
        base = qsis_scores(y, x, 0.5).scores
        warped = qsis_scores(y, np.exp(x) + x**3, 0.5).scores
        np.testing.assert_array_equal(base, warped)
