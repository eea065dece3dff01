"""Least-squares fit helpers used by the estimator reports."""

from __future__ import annotations

import numpy as np

from .errors import InsufficientDataError


def linear_fit(x, y):
    """y ~ slope * x + intercept.  Returns (slope, intercept, r2, slope_se)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise InsufficientDataError("need at least two points for a line fit")
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    yhat = A @ coef
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    dof = max(len(x) - 2, 1)
    sigma2 = ss_res / dof
    sxx = float(np.sum((x - x.mean()) ** 2))
    slope_se = np.sqrt(sigma2 / sxx) if sxx > 0 else np.inf
    return float(coef[0]), float(coef[1]), r2, float(slope_se)


def plane_fit(x1, x2, y):
    """y ~ p*x1 + q*x2 + c.  Returns (p, q, c, p_se, q_se)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) < 3:
        raise InsufficientDataError("need at least three points for a plane fit")
    A = np.stack([x1, x2, np.ones_like(x1)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(len(y) - 3, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.pinv(A.T @ A)
    return (float(coef[0]), float(coef[1]), float(coef[2]),
            float(np.sqrt(cov[0, 0])), float(np.sqrt(cov[1, 1])))


def binomial_ci(successes, n, z=1.96):
    """Normal-approximation confidence interval for a proportion."""
    if n == 0:
        return 0.0, 0.0, 1.0
    p = successes / n
    se = np.sqrt(max(p * (1 - p), 0.0) / n)
    return p, max(0.0, p - z * se), min(1.0, p + z * se)
