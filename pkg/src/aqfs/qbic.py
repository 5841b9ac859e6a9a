"""Best-subset selection along a screening path by penalized check loss.

Each nested model on the path is assigned

    log(sum of check losses) + n_params * log(n) / (2n) * penalty_scale,

and the model minimizing it wins.  Three standard penalty scales are
supported, all driven by the ambient dimension p:

    variant 1: log(log p)        (most stringent)
    variant 2: log(log p^0.75)
    variant 3: log(log p^0.5)    (least stringent)
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .screening import ScreeningPath

VARIANTS = (1, 2, 3)
_EXPONENT = {1: 1.0, 2: 0.75, 3: 0.5}


@dataclass(frozen=True)
class SelectionResult:
    """Chosen prefix of a screening path for one penalty variant."""

    variant: int | str
    c_n: float
    values: np.ndarray = field(repr=False)
    step: int                       # 1-based length of the chosen prefix
    selected: tuple[int, ...]       # covariate indices of the chosen model

    @property
    def size(self) -> int:
        return len(self.selected)


def cn_value(p: int, variant: int) -> float:
    """Penalty scale for the given variant; natural logs throughout."""
    if variant not in _EXPONENT:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if p < 8:
        raise ValueError(f"penalty scale needs p >= 8, got p={p}")
    return math.log(_EXPONENT[variant] * math.log(p))


def qbic_value(objective: float, n: int, n_params: int, c_n: float) -> float:
    """Penalized log check loss for one model (objective is a sum)."""
    if objective < 0.0:
        raise ValueError(f"objective must be nonnegative, got {objective}")
    if objective == 0.0:
        warnings.warn(
            "zero check loss (perfect interpolation); criterion is -inf",
            RuntimeWarning,
            stacklevel=2,
        )
        return -math.inf
    return math.log(objective) + n_params * math.log(n) / (2.0 * n) * c_n


def select(
    path: ScreeningPath,
    p: int,
    variant: int = 1,
    c_n: float | None = None,
) -> SelectionResult:
    """Pick the best nested model on ``path`` for one penalty variant.

    ``p`` is the ambient covariate dimension driving the penalty scale;
    passing an explicit ``c_n`` overrides the variant formula (the variant
    is then reported as "custom").  Ties go to the shortest model.
    """
    if len(path) == 0:
        raise ValueError("cannot select from an empty path")
    if c_n is None:
        label: int | str = variant
        c_n = cn_value(p, variant)
    else:
        label = "custom"
    values = np.array(
        [
            qbic_value(rec.objective, path.n, 1 + path.basis_size * (ell + 1), c_n)
            for ell, rec in enumerate(path.steps)
        ]
    )
    step = int(np.argmin(values)) + 1  # argmin returns the first minimum
    return SelectionResult(
        variant=label,
        c_n=c_n,
        values=values,
        step=step,
        selected=path.selected[:step],
    )


def select_all(path: ScreeningPath, p: int) -> dict[int, SelectionResult]:
    """Selection results for every standard penalty variant."""
    return {v: select(path, p, variant=v) for v in VARIANTS}
