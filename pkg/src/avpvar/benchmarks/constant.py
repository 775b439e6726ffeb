"""Closed-form constant-parameter VAR and the recursive activity factor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from ..data import build_design
from ..errors import DomainError, InsufficientDataError
from ..forecasting import ForecastBundle


@dataclass
class OlsVarFit:
    coeffs: np.ndarray   # (n, k)
    omega: np.ndarray    # (n, n) residual covariance, divided by T
    lags: int


def fit_ols_var(panel_values: np.ndarray, lags: int) -> OlsVarFit:
    """Least-squares VAR(p): B = (X'X)^-1 X'Y, Omega = SSR / T."""
    y = np.atleast_2d(np.asarray(panel_values, dtype=float))
    targets, design = build_design(y, lags)
    t_len, k = design.shape
    if t_len <= k:
        raise InsufficientDataError("not enough rows to fit the least-squares system")
    b = np.linalg.solve(design.T @ design, design.T @ targets)
    resid = targets - design @ b
    omega = resid.T @ resid / t_len
    return OlsVarFit(coeffs=b.T, omega=omega, lags=lags)


def ols_forecast_bundle(
    fit: OlsVarFit, tail: np.ndarray, paths_per_draw: int = 1, n_report=None
) -> ForecastBundle:
    n = fit.coeffs.shape[0]
    omega = 0.5 * (fit.omega + fit.omega.T) + 1e-12 * np.eye(n)
    chol = np.linalg.cholesky(omega)
    return ForecastBundle(
        fit.coeffs[None, :, :].copy(),
        chol[None, :, :],
        np.asarray(tail, dtype=float),
        n if n_report is None else n_report,
        paths_per_draw=paths_per_draw,
    )


def activity_factor(driver_values: np.ndarray, min_rows: int = 8) -> np.ndarray:
    """First principal component of the drivers, recursively re-estimated.

    The value at row t uses only rows 0..t: those rows are standardized and
    the top eigenvector of their correlation matrix scores row t. Signs are
    chained so the series does not flip between adjacent rows; rows before
    min_rows are zero.

    Parameters
    ----------
    driver_values : ndarray, shape (T, m)
        Driver panel, one column per series.
    min_rows : int
        Smallest sample on which a correlation matrix is attempted.

    Returns
    -------
    ndarray, shape (T,)
    """
    z = np.atleast_2d(np.asarray(driver_values, dtype=float))
    t_len, m = z.shape
    if m == 0:
        raise DomainError("at least one driver column is required")
    scores = np.zeros(t_len)
    prev = None
    s1 = np.zeros(m)
    s2 = np.zeros((m, m))
    for t in range(t_len):
        s1 += z[t]
        s2 += np.outer(z[t], z[t])
        count = t + 1
        if count < min_rows:
            continue
        mean = s1 / count
        cov = (s2 - count * np.outer(mean, mean)) / (count - 1)
        sd = np.sqrt(np.diag(cov))
        if np.any(sd <= 0) or not np.all(np.isfinite(sd)):
            raise DomainError(
                "driver matrix is rank deficient through row %d: constant column" % t
            )
        corr = cov / np.outer(sd, sd)
        _, vec = sla.eigh(corr, subset_by_index=[m - 1, m - 1], check_finite=False)
        v = vec[:, 0]
        if prev is None:
            if v[np.argmax(np.abs(v))] < 0:
                v = -v
        elif v @ prev < 0:
            v = -v
        prev = v
        scores[t] = ((z[t] - mean) / sd) @ v
    return scores


def augment_with_factor(panel_values: np.ndarray, factor: np.ndarray) -> np.ndarray:
    """Append the factor as the last endogenous column."""
    y = np.atleast_2d(np.asarray(panel_values, dtype=float))
    f = np.asarray(factor, dtype=float).reshape(-1)
    if f.shape[0] != y.shape[0]:
        raise DomainError("factor and panel must cover the same rows")
    return np.column_stack([y, f])
