"""Shared forecast simulation: one recursion used by every model.

Each fitted model reduces to per-draw constant coefficient matrices and error
covariance factors at the forecast origin; iterated multi-step forecasts then
simulate the same VAR recursion regardless of how the draws were produced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import SeededStream, _as_generator

FLAG_THRESHOLD = 1e6


@dataclass
class ForecastBundle:
    """Everything the simulation recursion needs at a forecast origin.

    coeff_mats: (D, n_sys, k) per-draw coefficient matrices with design rows
    [1, y_{t-1}', ..., y_{t-p}']; chol_omega: (D, n_sys, n_sys) lower factors
    of the per-draw error covariance; tail: (p, n_sys) most recent
    observations, oldest first; n_report: how many leading system variables
    are observables to score (a factor-augmented system simulates all
    variables but reports only the originals).
    """

    coeff_mats: np.ndarray
    chol_omega: np.ndarray
    tail: np.ndarray
    n_report: int
    paths_per_draw: int = 1

    @property
    def n_system(self) -> int:
        return self.coeff_mats.shape[1]


def simulate_paths(bundle: ForecastBundle, horizons: int, stream) -> np.ndarray:
    """Simulate (total paths, horizons, n_report) future trajectories.

    Every path iterates y_{t+h} = B [1, lags]' + chol * z with its draw's
    coefficients and covariance held fixed across horizons.
    """
    gen = stream.generator if isinstance(stream, SeededStream) else _as_generator(stream)
    coeffs = np.repeat(bundle.coeff_mats, bundle.paths_per_draw, axis=0)
    chol = np.repeat(bundle.chol_omega, bundle.paths_per_draw, axis=0)
    n_paths, n_sys, k = coeffs.shape
    lags = bundle.tail.shape[0]

    lag_state = np.broadcast_to(bundle.tail, (n_paths, lags, n_sys)).copy()
    out = np.empty((n_paths, horizons, bundle.n_report))
    x_rows = np.empty((n_paths, k))
    x_rows[:, 0] = 1.0
    for h in range(horizons):
        for ell in range(1, lags + 1):
            x_rows[:, 1 + (ell - 1) * n_sys: 1 + ell * n_sys] = lag_state[:, lags - ell, :]
        mean = np.einsum("dnk,dk->dn", coeffs, x_rows)
        shocks = np.einsum("dij,dj->di", chol, gen.standard_normal((n_paths, n_sys)))
        y_new = mean + shocks
        out[:, h, :] = y_new[:, : bundle.n_report]
        lag_state = np.roll(lag_state, -1, axis=1)
        lag_state[:, -1, :] = y_new
    return out


def count_flagged(paths: np.ndarray, threshold: float = FLAG_THRESHOLD) -> int:
    """Number of simulated paths that ever exceed the explosion threshold."""
    return int(np.any(np.abs(paths) > threshold, axis=(1, 2)).sum())
