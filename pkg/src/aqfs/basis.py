"""Normalized B-spline bases on [0, 1] and min-max covariate rescaling.

Every nonparametric component is approximated on the unit interval by a
clamped B-spline family with equally spaced interior knots.  The full
clamped family of ``degree + n_interior + 1`` functions forms a partition
of unity; we drop the leading function so that the regression intercept
carries the constant and the design stays full rank.  The retained family
has exactly ``size = n_interior + degree`` functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline


class BasisConfigError(ValueError):
    """Basis parameters are inconsistent (e.g. fewer functions than degree)."""


class DomainError(ValueError):
    """Evaluation point lies outside [0, 1]; rescale covariates first."""


@dataclass(frozen=True)
class SplineBasis:
    """Clamped B-spline family on [0, 1] with the first function dropped.

    Attributes
    ----------
    degree : spline degree (order = degree + 1).
    n_interior : number of equally spaced interior knots.
    size : number of retained basis functions, = n_interior + degree.
    knots : full clamped knot vector (0 and 1 each repeated degree+1 times).
    """

    degree: int
    n_interior: int
    size: int
    knots: np.ndarray = field(repr=False)

    def evaluate(self, t):
        """Evaluate the retained basis functions at ``t``.

        Parameters
        ----------
        t : float or 1-d array with all values in [0, 1].

        Returns
        -------
        ndarray of shape (size,) for scalar ``t`` or (len(t), size) for an
        array, with every entry in [0, 1].
        """
        arr = np.atleast_1d(np.asarray(t, dtype=float))
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise DomainError("evaluation points must lie in [0, 1]")
        full = BSpline.design_matrix(arr, self.knots, self.degree).toarray()
        out = full[:, 1:]
        if np.isscalar(t) or np.ndim(t) == 0:
            return out[0]
        return out


def make_basis(size: int, degree: int | None = None) -> SplineBasis:
    """Build the spline family with ``size`` retained functions.

    ``degree`` defaults to cubic, lowered to ``size`` when ``size`` < 3 so
    the interior-knot count ``size - degree`` stays nonnegative.
    """
    if size < 1:
        raise BasisConfigError(f"need at least one basis function, got size={size}")
    if degree is None:
        degree = min(3, size)
    if degree < 1:
        raise BasisConfigError(f"degree must be >= 1, got {degree}")
    if size < degree:
        raise BasisConfigError(
            f"size={size} < degree={degree}: no valid interior-knot count"
        )
    n_interior = size - degree
    interior = np.arange(1, n_interior + 1) / (n_interior + 1)
    knots = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
    return SplineBasis(degree=degree, n_interior=n_interior, size=size, knots=knots)


@dataclass(frozen=True)
class RescaleMap:
    """Affine map sending a training column onto [0, 1].

    A constant column cannot be mapped; it is flagged ``degenerate`` and
    callers must exclude it from screening scores and spline designs.
    """

    lo: float
    hi: float
    degenerate: bool = False

    def apply(self, values) -> np.ndarray:
        """Map ``values`` into [0, 1], clipping out-of-range entries."""
        arr = np.asarray(values, dtype=float)
        if self.degenerate:
            return np.zeros_like(arr)
        return np.clip((arr - self.lo) / (self.hi - self.lo), 0.0, 1.0)


def rescale(column) -> tuple[np.ndarray, RescaleMap]:
    """Min-max rescale one covariate column onto [0, 1]."""
    arr = np.asarray(column, dtype=float)
    if arr.size == 0:
        raise ValueError("cannot rescale an empty column")
    lo, hi = float(arr.min()), float(arr.max())
    if lo == hi:
        m = RescaleMap(lo=lo, hi=hi, degenerate=True)
        return np.zeros_like(arr), m
    m = RescaleMap(lo=lo, hi=hi)
    return (arr - lo) / (hi - lo), m


def rescale_columns(x) -> tuple[np.ndarray, list[RescaleMap]]:
    """Rescale every column of an (n, p) matrix; returns (scaled, maps)."""
    x = np.asarray(x, dtype=float)
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    span = hi - lo
    degenerate = span == 0.0
    safe = np.where(degenerate, 1.0, span)
    scaled = (x - lo) / safe
    scaled[:, degenerate] = 0.0
    maps = [
        RescaleMap(lo=float(lo[j]), hi=float(hi[j]), degenerate=bool(degenerate[j]))
        for j in range(x.shape[1])
    ]
    return scaled, maps
