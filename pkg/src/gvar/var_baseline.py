"""Linear VAR(K) baseline: least squares fit, Granger F-tests and BH control.

Matrices returned by :func:`test_gc` are indexed ``[source, target]`` like the
rest of the package; the fitted coefficient matrices keep the usual VAR layout
``coefs[k-1][target, source]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from gvar.data import as_array
from gvar.errors import InsufficientDataError, SingularityError, UndefinedTestError


@dataclass
class VarModel:
    intercept: np.ndarray      # (p,)
    coefs: np.ndarray          # (K, p, p), [lag-1, target, source]
    sigma_u: np.ndarray        # (p, p) residual covariance
    rss: np.ndarray            # (p,) residual sum of squares per equation
    K: int
    n_obs: int                 # usable rows, T - K

    @property
    def p(self):
        return self.intercept.size

    def predict(self, series):
        """One-step forecasts for ``t = K+1 .. T``."""
        x = as_array(series)
        Z = lagged_design(x, self.K)
        B = np.vstack([self.intercept[None], *[c.T for c in self.coefs]])
        return Z @ B


@dataclass
class GcTestResult:
    F: np.ndarray              # (p, p) [source, target]; NaN on the diagonal
    pvalues: np.ndarray        # (p, p) [source, target]; NaN on the diagonal
    adjacency: np.ndarray      # BH decisions on off-diagonal pairs
    q: float
    df: tuple

    @property
    def scores(self):
        """``1 - p`` off the diagonal, usable as an edge score."""
        s = 1.0 - self.pvalues
        np.fill_diagonal(s, 0.0)
        return s


def lagged_design(x, K):
    """Regressors ``[1, x_{t-1}, ..., x_{t-K}]`` for ``t = K+1 .. T``."""
    T, p = x.shape
    cols = [np.ones((T - K, 1))]
    for k in range(1, K + 1):
        cols.append(x[K - k:T - k])
    return np.hstack(cols)


def _lstsq(Z, Y):
    if np.linalg.matrix_rank(Z) < Z.shape[1]:
        raise SingularityError("regressor matrix is rank deficient")
    B, *_ = np.linalg.lstsq(Z, Y, rcond=None)
    resid = Y - Z @ B
    return B, resid


def fit_var(series, K=1):
    """Per-equation OLS with intercept on the ``T - K`` usable rows.

    Raises:
        InsufficientDataError: unless ``T - K > K p + 1``.
        SingularityError: if the lagged regressors are collinear.
    """
    x = as_array(series)
    T, p = x.shape
    if K < 1:
        raise InsufficientDataError(f"K must be >= 1, got {K}")
    if T - K <= K * p + 1:
        raise InsufficientDataError(f"need T - K > K*p + 1, got T={T}, K={K}, p={p}")
    Z = lagged_design(x, K)
    B, resid = _lstsq(Z, x[K:])
    n = T - K
    coefs = np.stack([B[1 + (k - 1) * p:1 + k * p].T for k in range(1, K + 1)])
    dof = n - Z.shape[1]
    sigma_u = resid.T @ resid / dof
    return VarModel(B[0].copy(), coefs, sigma_u, np.sum(resid ** 2, axis=0), K, n)


def benjamini_hochberg(pvalues, q=0.05):
    """Boolean rejections of the step-up procedure at FDR level ``q``."""
    pv = np.asarray(pvalues, dtype=float).ravel()
    m = pv.size
    if m == 0:
        return np.zeros(0, dtype=bool)
    order = np.argsort(pv, kind="mergesort")
    passed = pv[order] <= q * np.arange(1, m + 1) / m
    reject = np.zeros(m, dtype=bool)
    if passed.any():
        last = np.nonzero(passed)[0].max()
        reject[order[:last + 1]] = True
    return reject


def test_gc(model, series, q=0.05):
    """F-test every ``source -> target`` pair, then BH over the off-diagonal p-values.

    For target ``i`` and source ``j`` the full equation is compared with the one
    that drops all ``K`` lags of ``x^j``; the statistic follows
    ``F(K, T - K - K p - 1)`` under the null.

    Raises:
        UndefinedTestError: a full-model residual sum of squares is zero.
    """
    x = as_array(series)
    T, p = x.shape
    K = model.K
    Z = lagged_design(x, K)
    Y = x[K:]
    n = T - K
    df1, df2 = K, n - K * p - 1
    F = np.full((p, p), np.nan)
    pv = np.full((p, p), np.nan)
    for target in range(p):
        rss_full = model.rss[target]
        if not rss_full > 1e-12 * max(1.0, float(np.sum(Y[:, target] ** 2))):
            raise UndefinedTestError(f"zero residual variance for variable {target}")
        for source in range(p):
            if source == target:
                continue
            keep = np.ones(Z.shape[1], dtype=bool)
            keep[1 + source + p * np.arange(K)] = False
            _, resid = _lstsq(Z[:, keep], Y[:, target])
            rss_r = float(resid @ resid)
            f = max((rss_r - rss_full) / df1 / (rss_full / df2), 0.0)
            F[source, target] = f
            pv[source, target] = stats.f.sf(f, df1, df2)
    off = ~np.eye(p, dtype=bool)
    adjacency = np.zeros((p, p), dtype=int)
    adjacency[off] = benjamini_hochberg(pv[off], q).astype(int)
    return GcTestResult(F, pv, adjacency, q, (df1, df2))


def var_signs(model):
    """Sign of the largest-magnitude lag coefficient per ``[source, target]`` pair."""
    k_star = np.argmax(np.abs(model.coefs), axis=0)
    coef = np.take_along_axis(model.coefs, k_star[None], axis=0)[0]
    return np.sign(coef).astype(int).T


# keep pytest from collecting the function when a test module imports it
test_gc.__test__ = False
