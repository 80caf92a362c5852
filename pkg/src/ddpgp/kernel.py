"""Squared-exponential GP covariance over the observed covariate rows.

The covariance depends only on the covariates, so it is built and factorized
once per fit and shared read-only by every iteration (and both endpoints).
"""
from dataclasses import dataclass

import numpy as np
from scipy import linalg

DEFAULT_EPSILON = 0.1


def sq_exp(xa, xb):
    """exp(-||xa_l - xb_m||^2) for every pair of rows."""
    xa = np.atleast_2d(np.asarray(xa, dtype=float))
    xb = np.atleast_2d(np.asarray(xb, dtype=float))
    d2 = (
        np.sum(xa * xa, axis=1)[:, None]
        + np.sum(xb * xb, axis=1)[None, :]
        - 2.0 * xa @ xb.T
    )
    return np.exp(-np.maximum(d2, 0.0))


@dataclass(frozen=True)
class KernelCache:
    """Covariance ``r`` with its lower Cholesky factor ``chol``.

    ``x`` is the matrix the kernel was built on. Both endpoints use the same
    formula, so :meth:`endpoint` hands out the same object for j = 1, 2.
    """

    x: np.ndarray
    r: np.ndarray
    chol: np.ndarray
    epsilon: float

    @property
    def n(self):
        return self.r.shape[0]

    def endpoint(self, j):
        if j not in (1, 2):
            raise ValueError("endpoint must be 1 or 2")
        return self

    def cross(self, x_new):
        """Kernel between new rows and the stored rows (no nugget)."""
        return sq_exp(x_new, self.x)


def build_kernel(x_matrix, epsilon=DEFAULT_EPSILON):
    x = np.atleast_2d(np.asarray(x_matrix, dtype=float))
    if x.shape[0] < 1:
        raise ValueError("need at least one row")
    if not np.all(np.isfinite(x)):
        raise np.linalg.LinAlgError("non-finite covariates; cannot factor kernel")
    r = sq_exp(x, x)
    r[np.diag_indices_from(r)] = 1.0 + epsilon**2
    chol = np.linalg.cholesky(r)
    for a in (x, r, chol):
        a.setflags(write=False)
    return KernelCache(x, r, chol, float(epsilon))


def solve_with_kernel(cache, rhs):
    """R^{-1} rhs through the cached factor."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != cache.n:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, kernel has {cache.n}")
    return linalg.cho_solve((cache.chol, True), rhs, check_finite=False)


def gp_predict(cache, theta_star, beta, x_new, x_matrix):
    """Kriging mean at ``x_new``: x_new' beta + k' R^{-1} (theta* - X beta).

    ``x_new`` may be a single row or a matrix of rows. ``x_matrix`` is the mean
    design at the observed rows; the kernel is evaluated on ``cache.x``.
    """
    x_new = np.asarray(x_new, dtype=float)
    single = x_new.ndim == 1
    x_new = np.atleast_2d(x_new)
    resid = np.asarray(theta_star, dtype=float) - np.asarray(x_matrix) @ beta
    out = x_new @ beta + cache.cross(x_new) @ solve_with_kernel(cache, resid)
    return float(out[0]) if single else out


def kriging_matrix(cache, x_new):
    """Matrix M with gp_predict = x_new beta + M (theta* - X beta)."""
    return solve_with_kernel(cache, cache.cross(x_new).T).T
