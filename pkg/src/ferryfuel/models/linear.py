"""Least squares, ridge, lasso and the degree-2 polynomial expansion."""
from __future__ import annotations

from dataclasses import dataclass

import warnings

import numpy as np
import scipy.linalg

from ..errors import DimensionMismatch

@dataclass(frozen=True)
class LinearWeights:
    w0: float
    w: np.ndarray

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.w.shape[0]:
            raise DimensionMismatch(f"expected {self.w.shape[0]} features, got {X.shape[1]}")
        return self.w0 + X @ self.w


def _solve_spd(A, b):
    """Solve a symmetric positive (semi)definite system.

    Raises ``LinAlgError`` when the system is singular or too ill-conditioned
    to trust, so callers can fall back to a rank-revealing solver.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            return scipy.linalg.solve(A, b, assume_a="pos")
        except scipy.linalg.LinAlgWarning as e:
            raise np.linalg.LinAlgError(str(e)) from None


def _least_squares(A, y):
    """Normal equations when well conditioned, else the minimum-norm solution."""
    try:
        return _solve_spd(A.T @ A, A.T @ y)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        return scipy.linalg.lstsq(A, y)[0]


def _soft_threshold(z, t):
    return np.sign(z) * max(abs(z) - t, 0.0)


def _coordinate_descent(Xc, yc, l1, l2, tol, max_iter):
    """Minimise (1/2N)|yc - Xc w|^2 + l1 |w|_1 + (l2/2N) |w|^2 on centred data.

    Works on the Gram matrix, so each sweep costs O(d^2) whatever N is.
    """
    n, d = Xc.shape
    G = Xc.T @ Xc / n
    c = Xc.T @ yc / n
    w = np.zeros(d)
    z = np.diag(G) + l2 / n
    Gw = np.zeros(d)
    for _ in range(max_iter):
        max_step = 0.0
        for j in range(d):
            if z[j] == 0.0:
                continue
            old = w[j]
            rho = c[j] - Gw[j] + G[j, j] * old
            new = _soft_threshold(rho, l1) / z[j]
            if new != old:
                Gw += G[:, j] * (new - old)
                w[j] = new
                max_step = max(max_step, abs(new - old))
        if max_step < tol:
            break
    return w


def fit_linear(X, y, ridge: float = 0.0, lasso: float = 0.0, *, tol: float = 1e-8,
               max_iter: int = 10_000) -> LinearWeights:
    """Fit ``y ~ w0 + X w`` with optional L2 (``ridge``) and L1 (``lasso``) penalties.

    Plain least squares goes through the normal equations, falling back to
    the minimum-norm solution when the design is rank deficient. The ridge
    objective is ``|y - w0 - Xw|^2 + ridge*|w|^2``. Any L1 term switches to
    cyclic coordinate descent on ``(1/2N)|y - w0 - Xw|^2 + lasso*|w|_1``
    (the scaling the ``alpha`` of common lasso tooling uses), stopping once
    the largest coefficient update falls below ``tol``. The intercept is
    never penalised.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"X {X.shape} incompatible with y {y.shape}")
    if ridge < 0 or lasso < 0:
        raise ValueError("penalties must be non-negative")
    n, d = X.shape

    if lasso == 0.0 and ridge == 0.0:
        A = np.hstack([np.ones((n, 1)), X])
        coef = _least_squares(A, y)
        return LinearWeights(float(coef[0]), coef[1:])

    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean
    if lasso == 0.0:
        w = _least_squares(np.vstack([Xc, np.sqrt(ridge) * np.eye(d)]),
                           np.concatenate([yc, np.zeros(d)]))
    else:
        w = _coordinate_descent(Xc, yc, lasso, ridge, tol, max_iter)
    return LinearWeights(float(y_mean - x_mean @ w), w)


def poly2_terms(n_features: int):
    """Index pairs (i, j), i <= j, of the degree-2 terms in expansion order."""
    return [(i, j) for i in range(n_features) for j in range(i, n_features)]


def expand_poly2(X) -> np.ndarray:
    """``[x_1..x_D, x_1^2, x_1 x_2, ..., x_D^2]``; D + D(D+1)/2 columns."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    d = X.shape[1]
    pairs = poly2_terms(d)
    out = np.empty((X.shape[0], d + len(pairs)))
    out[:, :d] = X
    for k, (i, j) in enumerate(pairs):
        out[:, d + k] = X[:, i] * X[:, j]
    return out


def poly2_param_count(n_features: int) -> int:
    return 1 + n_features + n_features * (n_features + 1) // 2
