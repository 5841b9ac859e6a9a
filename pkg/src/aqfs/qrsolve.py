"""Check-loss minimization over spline designs by interior-point LP.

The estimator minimizes ``sum_i rho_tau(y_i - z_i' theta)`` where ``rho_tau``
is the quantile check function.  Splitting residuals into positive and
negative parts turns this into a linear program whose dual is the bounded
problem

    max  y'd   subject to   Z'd = (1 - tau) Z'1,   0 <= d <= 1,

solved here with a Mehrotra predictor-corrector primal-dual interior-point
iteration on dense normal equations (the Frisch-Newton approach).  The
independent-problem batch mode runs many small fits in lockstep, which is
what makes marginal screening over thousands of covariates cheap.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .basis import SplineBasis

MAX_ITER = 200
STEP_DAMPING = 0.9995


class QuantileSolverError(RuntimeError):
    """Interior point did not reach the duality-gap tolerance.

    Carries the best iterate found so far in ``best`` (a QuantileFit) so
    callers can report partial context.
    """

    def __init__(self, message: str, best: "QuantileFit | None" = None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class Design:
    """Dense design: intercept column followed by per-covariate spline blocks.

    ``subset`` lists the covariate column indices (0-based) in insertion
    order; block ``j`` occupies columns ``1 + k*basis_size`` through
    ``1 + (k+1)*basis_size - 1`` where ``k`` is the position of ``j`` in
    ``subset``.
    """

    matrix: np.ndarray
    subset: tuple[int, ...]
    basis_size: int

    @property
    def n_params(self) -> int:
        return self.matrix.shape[1]


def build_design(
    x01: np.ndarray,
    subset,
    basis: SplineBasis,
    block_cache: dict | None = None,
) -> Design:
    """Assemble the design for the given covariate subset.

    ``x01`` must already be rescaled to [0, 1].  ``block_cache`` maps a
    covariate index to its precomputed (n, basis.size) spline block and is
    filled in as a side effect, so forward-screening refits never evaluate
    the same block twice.
    """
    subset = tuple(int(j) for j in subset)
    n = x01.shape[0]
    cols = [np.ones((n, 1))]
    for j in subset:
        if block_cache is not None and j in block_cache:
            block = block_cache[j]
        else:
            block = basis.evaluate(x01[:, j])
            if block_cache is not None:
                block_cache[j] = block
        cols.append(block)
    return Design(matrix=np.hstack(cols), subset=subset, basis_size=basis.size)


@dataclass(frozen=True)
class QuantileFit:
    """Solution of one check-loss minimization.

    ``theta`` has the intercept first; ``objective`` is the sum (not mean)
    of check losses recomputed at ``theta``.  ``dropped`` lists design
    columns removed for rank deficiency (their coefficients are zero).
    """

    tau: float
    theta: np.ndarray
    objective: float
    fitted: np.ndarray
    n_iter: int
    gap: float
    dropped: tuple[int, ...] = ()


def check_loss(u, tau: float):
    """Quantile check function ``u * (tau - 1{u < 0})``, elementwise."""
    u = np.asarray(u, dtype=float)
    return u * (tau - (u < 0.0))


def _matvec(z, v):
    # z: (n, m) or (B, n, m); v: (m,) or (B, m) -> (n,) or (B, n)
    if z.ndim == 2:
        return z @ v
    return np.matmul(z, v[:, :, None])[:, :, 0]


def _rmatvec(z, v):
    # z' v with v: (n,) or (B, n) -> (m,) or (B, m)
    if z.ndim == 2:
        return z.T @ v
    return np.matmul(v[:, None, :], z)[:, 0, :]


def _normal_matrix(z, d):
    # z' diag(d) z -> (m, m) or (B, m, m)
    if z.ndim == 2:
        return (z * d[:, None]).T @ z
    return np.matmul(z.transpose(0, 2, 1), z * d[:, :, None])


def _solve_normal(m_mat, rhs):
    """Solve the (possibly batched) SPD normal system, with a ridge retry."""
    try:
        sol = np.linalg.solve(m_mat, rhs[..., None])[..., 0]
        if np.all(np.isfinite(sol)):
            return sol
    except np.linalg.LinAlgError:
        pass
    k = m_mat.shape[-1]
    trace = np.einsum("...ii->...", m_mat)
    ridge = (np.maximum(trace, 1.0) / k * 1e-12)[..., None]
    m_reg = m_mat + ridge[..., None] * np.eye(k)
    try:
        return np.linalg.solve(m_reg, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        if m_mat.ndim == 2:
            return np.linalg.lstsq(m_mat, rhs, rcond=None)[0]
        out = np.empty_like(rhs)
        for i in range(m_mat.shape[0]):
            try:
                out[i] = np.linalg.solve(m_reg[i], rhs[i])
            except np.linalg.LinAlgError:
                out[i] = np.linalg.lstsq(m_mat[i], rhs[i], rcond=None)[0]
        return out


def _step_length(v1, dv1, v2, dv2):
    """Largest alpha in (0, 1] keeping both pairs nonnegative, before damping."""
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(dv1 < 0.0, v1 / -dv1, np.inf).min(axis=-1)
        r2 = np.where(dv2 < 0.0, v2 / -dv2, np.inf).min(axis=-1)
    return np.minimum(np.minimum(r1, r2), 1.0)


def _frisch_newton(z, y, tau, tol, max_iter):
    """Lockstep interior-point solve of B problems sharing the response.

    z : (B, n, m) designs; y : (n,) response; returns
    (theta (B, m), converged (B,) bool, iterations (B,), gap (B,)).
    """
    batch, n, m = z.shape
    c = np.broadcast_to(-y, (batch, n)).copy()
    b = (1.0 - tau) * z.sum(axis=1)

    x = np.full((batch, n), 1.0 - tau)
    s = np.full((batch, n), tau)
    gram = _normal_matrix(z, np.ones((batch, n)))
    lam = _solve_normal(gram, _rmatvec(z, c))
    r = c - _matvec(z, lam)
    delta = 0.01 * np.maximum(np.abs(r).mean(axis=1, keepdims=True), 1.0)
    zdual = np.maximum(r, 0.0) + delta
    wdual = np.maximum(-r, 0.0) + delta

    theta_out = np.zeros((batch, m))
    conv_out = np.zeros(batch, dtype=bool)
    iter_out = np.full(batch, max_iter, dtype=int)
    gap_out = np.full(batch, np.inf)
    active = np.arange(batch)

    for it in range(max_iter + 1):
        r_p = b - _rmatvec(z, x)
        r_d = c - _matvec(z, lam) - zdual + wdual
        cx = np.einsum("bn,bn->b", c, x)
        dual_obj = np.einsum("bm,bm->b", b, lam) - wdual.sum(axis=1)
        dgap = cx - dual_obj
        rel_gap = dgap / (1.0 + np.abs(cx))
        feas = np.abs(r_p).max(axis=1) <= 1e-6 * (1.0 + np.abs(b).max(axis=1))
        done = (rel_gap <= tol) & feas

        if done.any():
            theta_out[active[done]] = -lam[done]
            conv_out[active[done]] = True
            iter_out[active[done]] = it
            gap_out[active[done]] = rel_gap[done]
            keep = ~done
            if not keep.any():
                break
            active = active[keep]
            z, c, b = z[keep], c[keep], b[keep]
            x, s, lam = x[keep], s[keep], lam[keep]
            zdual, wdual = zdual[keep], wdual[keep]
            r_p, r_d = r_p[keep], r_d[keep]
            rel_gap = rel_gap[keep]
        if it == max_iter:
            theta_out[active] = -lam
            gap_out[active] = rel_gap
            break

        gap = np.einsum("bn,bn->b", x, zdual) + np.einsum("bn,bn->b", s, wdual)
        mu = gap / (2.0 * n)
        d = 1.0 / (zdual / x + wdual / s)
        m_mat = _normal_matrix(z, d)

        # Affine (predictor) direction.
        vec = r_d + zdual - wdual
        dlam = _solve_normal(m_mat, r_p + _rmatvec(z, d * vec))
        dx = d * (_matvec(z, dlam) - vec)
        dz = -zdual - (zdual / x) * dx
        dw = -wdual + (wdual / s) * dx
        a_p = _step_length(x, dx, s, -dx)
        a_d = _step_length(zdual, dz, wdual, dw)
        gap_aff = (
            np.einsum("bn,bn->b", x + a_p[:, None] * dx, zdual + a_d[:, None] * dz)
            + np.einsum("bn,bn->b", s - a_p[:, None] * dx, wdual + a_d[:, None] * dw)
        )
        sigma = np.clip(gap_aff / gap, 0.0, 1.0) ** 3

        # Corrected direction.
        target = (sigma * mu)[:, None]
        rxz_x = target / x - dx * dz / x
        rsw_s = target / s + dx * dw / s
        vec = r_d + zdual - wdual - rxz_x + rsw_s
        dlam = _solve_normal(m_mat, r_p + _rmatvec(z, d * vec))
        dx = d * (_matvec(z, dlam) - vec)
        dz = -zdual + rxz_x - (zdual / x) * dx
        dw = -wdual + rsw_s + (wdual / s) * dx

        a_p = np.minimum(STEP_DAMPING * _step_length(x, dx, s, -dx), 1.0)[:, None]
        a_d = np.minimum(
            STEP_DAMPING * _step_length(zdual, dz, wdual, dw), 1.0
        )[:, None]

        x = np.maximum(x + a_p * dx, 1e-14)
        s = np.maximum(s - a_p * dx, 1e-14)
        lam = lam + a_d * dlam
        zdual = np.maximum(zdual + a_d * dz, 1e-14)
        wdual = np.maximum(wdual + a_d * dw, 1e-14)

    return theta_out, conv_out, iter_out, gap_out


def _independent_columns(z):
    """Column indices keeping a full-rank subset, via pivoted QR."""
    n, m = z.shape
    r, piv = scipy.linalg.qr(z, mode="r", pivoting=True)[0:2]
    diag = np.abs(np.diag(r[:m]))
    if diag.size == 0 or diag[0] == 0.0:
        return np.array([], dtype=int)
    rank = int((diag > max(n, m) * np.finfo(float).eps * diag[0]).sum())
    return np.sort(piv[:rank])


def fit(
    design,
    y,
    tau: float,
    tol: float = 1e-8,
    max_iter: int = MAX_ITER,
) -> QuantileFit:
    """Minimize the empirical check loss over one design.

    Parameters
    ----------
    design : Design or (n, N) ndarray with the intercept column included.
    y : (n,) response.
    tau : quantile level in (0, 1).
    tol : relative duality-gap tolerance for the interior point.

    Rank-deficient designs are reduced to an independent column subset
    (dropped indices recorded on the fit) before solving.  Raises
    QuantileSolverError, carrying the best iterate, if the gap tolerance
    is not reached within ``max_iter`` iterations.
    """
    z = design.matrix if isinstance(design, Design) else np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    n, m = z.shape
    if n != y.shape[0]:
        raise ValueError("design and response lengths differ")
    if n <= m:
        raise ValueError(f"need more observations than parameters (n={n}, N={m})")

    keep = _independent_columns(z)
    dropped = tuple(sorted(set(range(m)) - set(keep.tolist())))
    z_use = z[:, keep] if dropped else z

    theta_r, conv, n_iter, gap = _frisch_newton(
        z_use[None, :, :], y, tau, tol, max_iter
    )
    theta = np.zeros(m)
    theta[keep] = theta_r[0]
    fitted = z @ theta
    objective = float(check_loss(y - fitted, tau).sum())
    result = QuantileFit(
        tau=tau,
        theta=theta,
        objective=objective,
        fitted=fitted,
        n_iter=int(n_iter[0]),
        gap=float(gap[0]),
        dropped=dropped,
    )
    if not conv[0]:
        raise QuantileSolverError(
            f"interior point stopped at relative gap {gap[0]:.3e} "
            f"after {max_iter} iterations (tol {tol:.1e})",
            best=result,
        )
    return result


_BATCH_CHUNK = 512  # keeps the per-chunk working set cache-resident


def fit_blocks(designs, y, tau, tol=1e-8, max_iter=MAX_ITER):
    """Fit many independent designs sharing one response, in lockstep.

    designs : (B, n, m) stack of dense designs (intercept included).
    Returns (theta (B, m), ok (B,) bool).  Members that fail to converge
    or hit non-finite arithmetic come back with ok=False and zero
    coefficients; callers decide how to degrade.  Every member's iteration
    is independent of its batch-mates, so results do not depend on how the
    batch is chunked internally.
    """
    designs = np.asarray(designs, dtype=float)
    y = np.asarray(y, dtype=float)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    batch, _, m = designs.shape
    theta = np.empty((batch, m))
    conv = np.empty(batch, dtype=bool)
    with np.errstate(all="ignore"):
        for start in range(0, batch, _BATCH_CHUNK):
            stop = min(start + _BATCH_CHUNK, batch)
            theta[start:stop], conv[start:stop], _, _ = _frisch_newton(
                designs[start:stop], y, tau, tol, max_iter
            )
    finite = np.isfinite(theta).all(axis=1)
    ok = conv & finite
    if not ok.all():
        warnings.warn(
            f"{int((~ok).sum())} of {batch} batched quantile fits "
            "did not converge",
            RuntimeWarning,
            stacklevel=2,
        )
        theta = np.where(ok[:, None], theta, 0.0)
    return theta, ok
