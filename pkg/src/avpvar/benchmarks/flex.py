"""Random-walk time-varying VAR estimated in first differences.

One engine covers the full-Bayes benchmark family: coefficient paths and
loading paths evolve as random walks whose innovation variances carry a
per-coefficient local scale and a per-equation global scale (both
half-Cauchy), drawn jointly through block-banded precision sampling of the
stacked path. Switching either block to constant gives the constant-parameter
variants; switching volatility off gives the homoskedastic one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import horseshoe
from ..errors import DomainError
from ..forecasting import ForecastBundle
from ..kernels import (
    GaussianPosteriorSpec,
    SeededStream,
    draw_mvn_from_precision,
)
from ..model import McmcSettings, draw_factors
from ..statespace import sample_scalar_obs_rw_path
from ..volatility import SvState, sv_cycle


@dataclass
class FlexSpec:
    """Which blocks vary over time, plus prior constants."""

    lags: int = 2
    n_factors: int = 1
    tvp_coeffs: bool = True
    tvp_loadings: bool = True
    stochastic_vol: bool = True
    level_prior_var: float = 10.0
    sv_init_var: float = 1.0
    sv_a0: float = 1.0
    sv_b0: float = 0.01
    sigma_prior_shape: float = 0.01
    sigma_prior_scale: float = 0.01


@dataclass
class FlexPosterior:
    """Posterior-mean paths plus end-of-sample draws for forecasting."""

    coeff_path_mean: np.ndarray    # (n, T, k)
    loading_path_mean: np.ndarray  # (n, T, r)
    coeff_last: np.ndarray         # (D, n, k)
    loading_last: np.ndarray       # (D, n, r)
    log_vol_last: np.ndarray       # (D, n)
    sigma_sq: np.ndarray           # (D, n)
    stochastic_vol: bool
    coeff_paths: np.ndarray = None  # (D, n, T, k) only when keep_paths

    @property
    def n_draws(self) -> int:
        return self.coeff_last.shape[0]


def _draw_const_block(design, target, weights, hs_state, rng):
    xw = design * weights[:, None]
    precision = xw.T @ design
    precision[np.diag_indices_from(precision)] += 1.0 / horseshoe.prior_variances(hs_state)
    return draw_mvn_from_precision(GaussianPosteriorSpec(precision, xw.T @ target), rng)


def run_flex_gibbs(
    targets: np.ndarray,
    base_design: np.ndarray,
    spec: FlexSpec,
    settings: McmcSettings,
    stream: SeededStream,
    keep_paths: bool = False,
) -> FlexPosterior:
    """Gibbs sampler for the flexible benchmark family.

    targets: (T, n); base_design: (T, k) rows x_t'. Equation blocks own
    separate streams so update order cannot change the draws.
    """
    y = np.atleast_2d(np.asarray(targets, dtype=float))
    x = np.atleast_2d(np.asarray(base_design, dtype=float))
    t_len, n = y.shape
    k = x.shape[1]
    r = spec.n_factors
    if x.shape[0] != t_len:
        raise DomainError("targets and design must share rows")

    eq_streams = [
        {
            "coeff": stream.child(1, i).generator,
            "load": stream.child(2, i).generator,
            "vol": stream.child(4, i).generator,
            "scale": stream.child(5, i).generator,
        }
        for i in range(n)
    ]
    factor_rng = stream.child(3).generator

    ridge = x.T @ x + 1e-6 * np.eye(k)
    b_ols = np.linalg.solve(ridge, x.T @ y).T
    resid0 = y - x @ b_ols.T

    # Coefficient state: (T, k) paths when varying, flat (k,) otherwise.
    coeff_paths = np.repeat(b_ols[:, None, :], t_len, axis=1)  # (n, T, k)
    hs_coeff = [
        horseshoe.HorseshoeState.unit(k) for _ in range(n)
    ]  # grouped increments when tvp, elementwise otherwise

    sv_states = [
        SvState.from_residuals(resid0[:, i], init_var=spec.sv_init_var) for i in range(n)
    ]
    sigma_sq = np.maximum(resid0.var(axis=0, ddof=1), 1e-8)

    if r:
        _, _, vt = np.linalg.svd(resid0 - resid0.mean(axis=0), full_matrices=False)
        factors = resid0 @ vt[:r].T
        factors /= np.maximum(factors.std(axis=0, ddof=1), 1e-12)
        lam0 = np.linalg.lstsq(factors, resid0, rcond=None)[0].T
        loading_paths = np.repeat(lam0[:, None, :], t_len, axis=1)  # (n, T, r)
        hs_load = [horseshoe.HorseshoeState.unit(r) for _ in range(n)]
    else:
        factors = np.zeros((t_len, 0))
        loading_paths = np.zeros((n, t_len, 0))
        hs_load = None

    n_keep = settings.n_retained
    out = FlexPosterior(
        coeff_path_mean=np.zeros((n, t_len, k)),
        loading_path_mean=np.zeros((n, t_len, r)),
        coeff_last=np.empty((n_keep, n, k)),
        loading_last=np.empty((n_keep, n, r)),
        log_vol_last=np.empty((n_keep, n)),
        sigma_sq=np.empty((n_keep, n)),
        stochastic_vol=spec.stochastic_vol,
        coeff_paths=np.empty((n_keep, n, t_len, k)) if keep_paths else None,
    )

    keep = 0
    for it in range(settings.iterations):
        if spec.stochastic_vol:
            precisions = np.stack([sv_states[i].precisions() for i in range(n)], axis=1)
        else:
            precisions = np.broadcast_to(1.0 / sigma_sq, (t_len, n)).copy()

        factor_part = np.einsum("ntr,tr->tn", loading_paths, factors) if r else 0.0

        for i in range(n):
            rngs = eq_streams[i]
            target_i = y[:, i] - (factor_part[:, i] if r else 0.0)
            if spec.tvp_coeffs:
                inc_var = horseshoe.prior_variances(hs_coeff[i])
                path = sample_scalar_obs_rw_path(
                    x, target_i, precisions[:, i],
                    1.0 / inc_var, 1.0 / spec.level_prior_var, 0.0, rngs["coeff"],
                )
                coeff_paths[i] = path
                horseshoe.update_grouped(hs_coeff[i], np.diff(path, axis=0), rngs["scale"])
            else:
                flat = _draw_const_block(x, target_i, precisions[:, i], hs_coeff[i], rngs["coeff"])
                coeff_paths[i] = flat
                horseshoe.update(hs_coeff[i], flat, rngs["scale"])

        fitted = np.einsum("ntk,tk->tn", coeff_paths, x)

        if r:
            for i in range(n):
                rngs = eq_streams[i]
                target_i = y[:, i] - fitted[:, i]
                if spec.tvp_loadings:
                    inc_var = horseshoe.prior_variances(hs_load[i])
                    path = sample_scalar_obs_rw_path(
                        factors, target_i, precisions[:, i],
                        1.0 / inc_var, 1.0 / spec.level_prior_var, 0.0, rngs["load"],
                    )
                    loading_paths[i] = path
                    horseshoe.update_grouped(hs_load[i], np.diff(path, axis=0), rngs["scale"])
                else:
                    flat = _draw_const_block(
                        factors, target_i, precisions[:, i], hs_load[i], rngs["load"]
                    )
                    loading_paths[i] = flat
                    horseshoe.update(hs_load[i], flat, rngs["scale"])
            factors = draw_factors(
                y - fitted, loading_paths.transpose(1, 0, 2), precisions, factor_rng
            )
            resid = y - fitted - np.einsum("ntr,tr->tn", loading_paths, factors)
        else:
            resid = y - fitted

        for i in range(n):
            rngs = eq_streams[i]
            if spec.stochastic_vol:
                sv_cycle(resid[:, i], sv_states[i], rngs["vol"], a0=spec.sv_a0, b0=spec.sv_b0)
            else:
                ssq = float(resid[:, i] @ resid[:, i])
                shape = spec.sigma_prior_shape + 0.5 * t_len
                scale = spec.sigma_prior_scale + 0.5 * ssq
                sigma_sq[i] = 1.0 / rngs["vol"].gamma(shape, 1.0 / scale)

        if it >= settings.burnin and (it - settings.burnin) % settings.thin == 0:
            out.coeff_path_mean += coeff_paths
            out.loading_path_mean += loading_paths
            out.coeff_last[keep] = coeff_paths[:, -1, :]
            out.loading_last[keep] = loading_paths[:, -1, :]
            for i in range(n):
                out.log_vol_last[keep, i] = sv_states[i].log_vol[-1]
            out.sigma_sq[keep] = sigma_sq
            if keep_paths:
                out.coeff_paths[keep] = coeff_paths
            keep += 1

    out.coeff_path_mean /= max(keep, 1)
    out.loading_path_mean /= max(keep, 1)
    return out


def flex_forecast_bundle(posterior: FlexPosterior, tail: np.ndarray) -> ForecastBundle:
    """End-of-sample draws mapped onto the shared simulation contract."""
    n_draws, n, _ = posterior.coeff_last.shape
    lam = posterior.loading_last
    if posterior.stochastic_vol:
        idio = np.exp(posterior.log_vol_last)
    else:
        idio = posterior.sigma_sq
    omega = lam @ lam.swapaxes(1, 2)
    omega[:, np.arange(n), np.arange(n)] += idio
    chol = np.linalg.cholesky(omega)
    return ForecastBundle(posterior.coeff_last.copy(), chol, np.asarray(tail, dtype=float), n)
