"""Forward screening: grow a nested covariate path by importance score.

Starting from the empty model, each step fits the additive spline quantile
regression on the current subset, converts residual signs into importance
scores for every remaining candidate, and adds the top scorer.  The result
is a sequence of nested models whose per-step objectives feed best-subset
selection.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import qrsolve, score
from .basis import SplineBasis, make_basis


class ScreeningError(RuntimeError):
    """A refit failed mid-path; ``path`` holds the steps completed so far."""

    def __init__(self, message: str, path: "ScreeningPath"):
        super().__init__(message)
        self.path = path


@dataclass(frozen=True)
class StepRecord:
    """One forward addition: chosen covariate, its winning score, and the
    check-loss objective after refitting with it included."""

    index: int
    score: float
    objective: float


@dataclass(frozen=True)
class ScreeningPath:
    """The nested models produced by one forward-screening run."""

    tau: float
    n: int
    p: int
    basis_size: int
    degree: int
    tol: float
    steps: tuple[StepRecord, ...] = field(repr=False)

    @property
    def selected(self) -> tuple[int, ...]:
        """Covariate indices in selection order (the largest nested model)."""
        return tuple(s.index for s in self.steps)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([s.objective for s in self.steps])

    @property
    def scores(self) -> np.ndarray:
        return np.array([s.score for s in self.steps])

    def __len__(self) -> int:
        return len(self.steps)


def default_steps(n: int, p: int | None = None, basis_size: int | None = None) -> int:
    """Path length ``floor(n / ln n)``, capped to keep the problem solvable.

    The caps: never more steps than candidates (``p``) and never so many
    that the largest design stops satisfying ``n > 1 + basis_size * steps``.
    """
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    k = int(n / math.log(n))
    if p is not None:
        k = min(k, p)
    if basis_size is not None:
        k = min(k, (n - 1) // basis_size - 1)
    return max(k, 1)


def default_basis_size(n: int) -> int:
    """Number of spline functions per covariate, ``floor(n ** 0.2)``."""
    return max(int(n ** 0.2), 1)


def run_path(
    x01,
    y,
    tau: float,
    steps: int | None = None,
    basis: SplineBasis | None = None,
    tol: float = 1e-8,
    min_score: float | None = None,
) -> ScreeningPath:
    """Run the forward-screening loop and return the full path.

    Parameters
    ----------
    x01 : (n, p) covariate matrix already rescaled to [0, 1].
    y : (n,) response.
    tau : quantile level in (0, 1).
    steps : path length; defaults to the capped ``floor(n / ln n)`` rule.
    basis : spline family; default has ``floor(n ** 0.2)`` functions.
    tol : duality-gap tolerance passed to every refit.
    min_score : optional early stop when the winning score drops below it
        (the default is to always run the full number of steps).

    The path is deterministic: ties in the score argmax go to the smallest
    covariate index, and no step depends on execution order.
    """
    x01 = np.asarray(x01, dtype=float)
    y = np.asarray(y, dtype=float)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    n, p = x01.shape
    if y.shape[0] != n:
        raise ValueError("covariate matrix and response lengths differ")
    if x01.size and (x01.min() < 0.0 or x01.max() > 1.0):
        raise ValueError("covariates must be rescaled to [0, 1] before screening")

    if basis is None:
        basis = make_basis(default_basis_size(n))
    cap = default_steps(n, p=p, basis_size=basis.size)
    if steps is None:
        steps = cap
    elif steps > cap:
        warnings.warn(
            f"steps={steps} exceeds the solvable cap {cap}; clipping",
            RuntimeWarning,
            stacklevel=2,
        )
        steps = cap

    plan = score.SweepPlan.from_matrix(x01)
    always_excluded = set(np.flatnonzero(plan.degenerate).tolist())

    records: list[StepRecord] = []
    selected: list[int] = []
    block_cache: dict = {}

    def partial() -> ScreeningPath:
        return ScreeningPath(
            tau=tau, n=n, p=p, basis_size=basis.size, degree=basis.degree,
            tol=tol, steps=tuple(records),
        )

    try:
        current = qrsolve.fit(np.ones((n, 1)), y, tau, tol=tol)
    except qrsolve.QuantileSolverError as err:
        raise ScreeningError(f"intercept-only fit failed: {err}", partial()) from err

    for _ in range(steps):
        psi = score.signs(y, current.fitted, tau)
        table = score.score_sweep(
            psi, plan=plan, excluded=always_excluded.union(selected)
        )
        if table.best is None:
            break  # no candidates left
        if min_score is not None and table.best_score < min_score:
            break
        selected.append(table.best)
        design = qrsolve.build_design(x01, selected, basis, block_cache)
        try:
            current = qrsolve.fit(design, y, tau, tol=tol)
        except qrsolve.QuantileSolverError as err:
            raise ScreeningError(
                f"refit failed at step {len(selected)} "
                f"(covariate {table.best}): {err}",
                partial(),
            ) from err
        records.append(
            StepRecord(
                index=table.best,
                score=table.best_score,
                objective=current.objective,
            )
        )

    return partial()
