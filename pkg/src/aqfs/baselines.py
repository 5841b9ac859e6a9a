"""Marginal screening baselines: sign-based and spline-fit-based rankings.

Both methods score each covariate against the response alone and keep the
top scorers, with no forward conditioning.  They exist as comparison
methods: marginal screens are fast but blind to covariates whose effect
only shows conditionally on others.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import qrsolve, score
from .basis import SplineBasis, make_basis
from .screening import default_basis_size


@dataclass(frozen=True)
class MarginalRanking:
    """Scores for all p covariates plus the retained top slice."""

    method: str
    scores: np.ndarray = field(repr=False)
    retained: tuple[int, ...]

    def keeps(self, j: int) -> bool:
        return j in set(self.retained)


def _top(scores: np.ndarray, keep: int) -> tuple[int, ...]:
    # Descending score, ties broken by smaller index.
    p = scores.shape[0]
    order = np.lexsort((np.arange(p), -scores))
    return tuple(int(j) for j in order[: min(keep, p)])


def qsis(y, x, tau: float, keep: int, tol: float = 1e-8) -> MarginalRanking:
    """Rank covariates by the unconditional sign-based importance score."""
    table = score.qsis_scores(y, x, tau, tol=tol)
    return MarginalRanking(
        method="qsis", scores=table.scores, retained=_top(table.scores, keep)
    )


def qasis(
    y,
    x,
    tau: float,
    keep: int,
    basis: SplineBasis | None = None,
    tol: float = 1e-8,
) -> MarginalRanking:
    """Rank covariates by the size of their marginal spline quantile fit.

    For each covariate a one-covariate additive quantile regression is fit
    and the covariate is scored by the mean squared gap between its fitted
    conditional quantile and the unconditional sample quantile,

        n^-1 sum_i (Qhat(y | x_ik) - Qhat(y))^2,

    whose population version is zero exactly when the covariate carries no
    quantile information.  Centering on the unconditional quantile (rather
    than taking the raw spline-component norm) matters: check-loss optima
    interpolate a handful of points, and for pure noise columns the raw
    component and the intercept take large cancelling values that would
    swamp the ranking.  Covariates whose fit fails get score 0 with a
    warning.  Columns must be rescaled to [0, 1].
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    if x.size and (x.min() < 0.0 or x.max() > 1.0):
        raise ValueError("covariates must be rescaled to [0, 1]")
    if basis is None:
        basis = make_basis(default_basis_size(n))

    q = basis.size
    degenerate = np.all(x == x[0], axis=0)
    # One flattened basis evaluation covers every column at once.
    flat = basis.evaluate(x.T.reshape(-1))  # (p*n, q)
    blocks = flat.reshape(p, n, q)
    blocks[degenerate] = 0.0
    designs = np.concatenate([np.ones((p, n, 1)), blocks], axis=2)

    live = np.flatnonzero(~degenerate)
    theta = np.zeros((p, 1 + q))
    ok = np.zeros(p, dtype=bool)
    if live.size:
        theta[live], ok[live] = qrsolve.fit_blocks(designs[live], y, tau, tol=tol)
    failed = live[~ok[live]]
    if failed.size:
        warnings.warn(
            f"marginal fit failed for {failed.size} covariate(s); scoring them 0",
            RuntimeWarning,
            stacklevel=2,
        )

    marginal_q = qrsolve.fit(np.ones((n, 1)), y, tau, tol=tol).theta[0]
    fitted = np.matmul(designs, theta[:, :, None])[:, :, 0]  # (p, n)
    gap = fitted - marginal_q
    scores = np.einsum("pn,pn->p", gap, gap) / n
    scores[~ok] = 0.0
    return MarginalRanking(method="qasis", scores=scores, retained=_top(scores, keep))
