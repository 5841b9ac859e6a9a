"""Conditional covariate-importance scores from residual signs.

Given a fitted conditional quantile for a baseline covariate subset, each
observation carries a sign ``psi_i = tau - 1{y_i < fitted_i}``.  A candidate
covariate ``k`` is scored by the empirical squared covariance curve between
the signs and the indicator process ``1{x_k < t}``, evaluated at the sample
points:

    d_k(t) = n^-1 sum_i psi_i 1{x_ik < t},
    score  = n^-1 sum_i d_k(x_ik)^2.

All indicator comparisons are strict, so ties contribute nothing.  The fast
evaluator sorts each column once and reuses prefix sums of the signs; the
naive double-loop version and an exhaustive U-statistic decomposition are
kept as independent oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import qrsolve


def signs(y, fitted, tau: float) -> np.ndarray:
    """Residual sign vector ``tau - 1{y < fitted}`` (strict inequality).

    A check-loss optimum interpolates as many points as it has parameters;
    those residuals are exact zeros in theory and solver noise of either
    sign in practice.  The strict indicator is applied literally: attempts
    to resolve the near-zero signs some "smarter" way (snapping them all to
    tau, or rebalancing them against the dual count) measurably degraded
    downstream screening, so the convention stays as written.
    """
    y = np.asarray(y, dtype=float)
    fitted = np.asarray(fitted, dtype=float)
    if y.shape != fitted.shape:
        raise ValueError("y and fitted lengths differ")
    return tau - (y < fitted)


def score_naive(psi, x) -> float:
    """Literal double-loop evaluation of the importance score (oracle)."""
    psi = np.asarray(psi, dtype=float)
    x = np.asarray(x, dtype=float)
    n = psi.shape[0]
    below = x[None, :] < x[:, None]  # below[i, j] = 1{x_j < x_i}
    d = below @ psi / n
    return float((d @ d) / n)


def score_fast(psi, x) -> float:
    """Sort-and-prefix-sum evaluation; identical value to score_naive."""
    psi = np.asarray(psi, dtype=float)
    x = np.asarray(x, dtype=float)
    n = psi.shape[0]
    order = np.argsort(x, kind="stable")
    v = x[order]
    csum = np.cumsum(psi[order])
    # Prefix sum strictly below each sorted value: index of the last entry
    # of the previous tie group, or "nothing" at the first group.
    pos = np.arange(n)
    is_new = np.empty(n, dtype=bool)
    is_new[0] = True
    is_new[1:] = v[1:] != v[:-1]
    group_start = np.maximum.accumulate(np.where(is_new, pos, 0))
    below = group_start - 1
    d = np.where(below >= 0, csum[np.maximum(below, 0)], 0.0)
    return float((d @ d) / n**3)


@dataclass(frozen=True)
class SweepPlan:
    """Per-column sort tables reused across every sweep over one matrix.

    ``order[i, k]`` is the row index of the i-th smallest entry of column k;
    ``below[i, k]`` is the last sorted position whose value is strictly
    smaller than that entry (-1 when there is none).  Building the plan is
    the only O(n log n * p) step; each subsequent sweep is linear passes.
    """

    order: np.ndarray = field(repr=False)
    below: np.ndarray = field(repr=False)
    degenerate: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.order.shape

    @classmethod
    def from_matrix(cls, x) -> "SweepPlan":
        x = np.asarray(x, dtype=float)
        n, p = x.shape
        order = np.argsort(x, axis=0, kind="stable").astype(np.int32)
        v = np.take_along_axis(x, order, axis=0)
        is_new = np.empty((n, p), dtype=bool)
        is_new[0] = True
        np.not_equal(v[1:], v[:-1], out=is_new[1:])
        pos = np.arange(n, dtype=np.int32)[:, None]
        group_start = np.maximum.accumulate(np.where(is_new, pos, 0), axis=0)
        below = (group_start - 1).astype(np.int32)
        degenerate = v[0] == v[-1]
        return cls(order=order, below=below, degenerate=degenerate)

    def sweep(self, psi) -> np.ndarray:
        """Scores for all columns at once; degenerate columns get 0."""
        psi = np.asarray(psi, dtype=float)
        n, _ = self.order.shape
        csum = np.cumsum(psi[self.order], axis=0)
        d = np.take_along_axis(csum, np.maximum(self.below, 0), axis=0)
        d[self.below < 0] = 0.0
        return np.einsum("ij,ij->j", d, d) / n**3


EXCLUDED = np.nan  # sentinel marking already-selected covariates


@dataclass(frozen=True)
class ScoreTable:
    """Importance scores for one sweep.

    ``scores[k]`` is NaN for excluded covariates; ``best`` is the smallest
    index attaining the maximal score, or None when no candidate remains.
    """

    scores: np.ndarray
    excluded: frozenset
    best: int | None

    @property
    def best_score(self) -> float:
        return float(self.scores[self.best]) if self.best is not None else np.nan


def _argmax_first(scores) -> int | None:
    valid = np.flatnonzero(~np.isnan(scores))
    if valid.size == 0:
        return None
    top = np.nanmax(scores)
    return int(valid[np.flatnonzero(scores[valid] == top)[0]])


def score_sweep(psi, x=None, excluded=(), plan: SweepPlan | None = None) -> ScoreTable:
    """Score every candidate covariate against one sign vector.

    Either ``x`` (an (n, p) matrix) or a prebuilt ``plan`` must be given.
    Covariates in ``excluded`` carry a NaN sentinel rather than a zero so
    they can never win the argmax.
    """
    if plan is None:
        if x is None:
            raise ValueError("score_sweep needs either x or a SweepPlan")
        plan = SweepPlan.from_matrix(x)
    scores = plan.sweep(psi)
    excluded = frozenset(int(j) for j in excluded)
    if excluded:
        scores[list(excluded)] = EXCLUDED
    return ScoreTable(scores=scores, excluded=excluded, best=_argmax_first(scores))


def qsis_scores(y, x, tau: float, tol: float = 1e-8) -> ScoreTable:
    """Unconditional (empty baseline) importance scores.

    Signs come from the intercept-only check-loss fit, i.e. the empirical
    ``tau``-quantile, making this exactly the first forward-screening sweep.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    fit0 = qrsolve.fit(np.ones((y.shape[0], 1)), y, tau, tol=tol)
    return score_sweep(signs(y, fit0.fitted, tau), x=x)


def ustat_decomposition(psi, x) -> tuple[float, float, float]:
    """Exhaustive pair/triple U-statistic split of the score (deep oracle).

    Returns ``(d1, d2, reconstructed)`` where the reconstruction
    ``(n-1)(n-2)/n^2 * [d1/(n-2) + d2]`` equals the importance score.  Only
    sensible for small n; every pair and triple is enumerated.
    """
    psi = np.asarray(psi, dtype=float)
    x = np.asarray(x, dtype=float)
    n = psi.shape[0]
    if n < 3:
        raise ValueError(f"U-statistic split needs n >= 3, got {n}")

    pair_sum = 0.0
    for i, j in combinations(range(n), 2):
        pair_sum += 0.5 * (
            psi[i] ** 2 * (x[i] < x[j]) + psi[j] ** 2 * (x[j] < x[i])
        )
    d1 = 2.0 / (n * (n - 1)) * pair_sum

    triple_sum = 0.0
    for i, j, k in combinations(range(n), 3):
        triple_sum += (
            psi[i] * psi[j] * (x[i] < x[k]) * (x[j] < x[k])
            + psi[j] * psi[k] * (x[j] < x[i]) * (x[k] < x[i])
            + psi[k] * psi[i] * (x[k] < x[j]) * (x[i] < x[j])
        ) / 3.0
    d2 = 6.0 / (n * (n - 1) * (n - 2)) * triple_sum

    reconstructed = (n - 1) * (n - 2) / n**2 * (d1 / (n - 2) + d2)
    return float(d1), float(d2), float(reconstructed)
