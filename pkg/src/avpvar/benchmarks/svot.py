"""Constant-coefficient VAR with stochastic volatility and outlier states.

Triangular identification u_t = A^-1 nu_t with nu_it ~ N(0, exp(h_it) k_it^2);
the integer outlier scale k_it stretches the variance in isolated periods.
Minnesota shrinkage on the coefficients, diffuse priors on the impact rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..forecasting import ForecastBundle
from ..kernels import (
    GaussianPosteriorSpec,
    SeededStream,
    draw_inverse_gamma,
    draw_mvn_from_precision,
)
from ..model import McmcSettings
from ..volatility import (
    LOG_SQUARE_OFFSET,
    MIXTURE_VARIANCES,
    _COMPONENT_MEANS,
    draw_log_vol_path,
    draw_mixture_indicators,
)
from .eb import _compose_a


@dataclass
class SvotSpec:
    lags: int = 2
    training_obs: int = 40
    lambda1: float = 0.05
    lambda2: float = 0.5
    lambda3: float = 2.0
    intercept_var_scale: float = 100.0
    a_prior_var: float = 1e6
    s_max: int = 20
    h_init_var: float = 100.0


@dataclass
class SvotPosterior:
    coeff_mean: np.ndarray      # (n, k)
    coeff_last: np.ndarray      # (D, n, k)
    a_last: np.ndarray          # (D, n(n-1)/2)
    log_vol_last: np.ndarray    # (D, n)
    phi_sq: np.ndarray          # (D, n)
    outlier_prob: np.ndarray    # (D, n)
    kappa_draws: np.ndarray = None  # (D, n, T) int8, kept on request

    @property
    def n_draws(self) -> int:
        return self.coeff_last.shape[0]


def ar_residual_variances(
    targets: np.ndarray, base_design: np.ndarray, lags: int, training_obs: int
) -> np.ndarray:
    """Residual variance of a univariate AR(p) per series, training rows only."""
    y = np.atleast_2d(np.asarray(targets, dtype=float))
    x = np.atleast_2d(np.asarray(base_design, dtype=float))
    t_len, n = y.shape
    t_train = min(training_obs, t_len)
    out = np.empty(n)
    for i in range(n):
        cols = [0] + [1 + lag * n + i for lag in range(lags)]
        xi = x[:t_train, cols]
        yi = y[:t_train, i]
        coef, *_ = np.linalg.lstsq(xi, yi, rcond=None)
        resid = yi - xi @ coef
        dof = max(t_train - len(cols), 1)
        out[i] = max(float(resid @ resid) / dof, 1e-8)
    return out


def minnesota_variances(spec: SvotSpec, n: int, s_sq: np.ndarray) -> np.ndarray:
    """Per-equation diagonal prior variances over [intercept, lag blocks]."""
    k = 1 + n * spec.lags
    v = np.empty((n, k))
    for i in range(n):
        v[i, 0] = spec.intercept_var_scale * s_sq[i]
        for lag in range(1, spec.lags + 1):
            shrink = spec.lambda1 / lag ** spec.lambda3
            for j in range(n):
                col = 1 + (lag - 1) * n + j
                if j == i:
                    v[i, col] = shrink
                else:
                    v[i, col] = shrink * spec.lambda2 * s_sq[i] / s_sq[j]
    return v


def _draw_weighted(design, target, weights, prior_var, rng):
    xw = design * weights[:, None]
    precision = xw.T @ design
    precision[np.diag_indices_from(precision)] += 1.0 / prior_var
    return draw_mvn_from_precision(GaussianPosteriorSpec(precision, xw.T @ target), rng)


def run_svot_gibbs(
    targets: np.ndarray,
    base_design: np.ndarray,
    spec: SvotSpec,
    settings: McmcSettings,
    stream: SeededStream,
    keep_outliers: bool = False,
) -> SvotPosterior:
    """Seven-block cycle: B, A rows, mixture states, outlier scales, outlier
    probabilities, log-volatility paths, innovation variances."""
    y = np.atleast_2d(np.asarray(targets, dtype=float))
    x = np.atleast_2d(np.asarray(base_design, dtype=float))
    t_len, n = y.shape
    k = x.shape[1]
    n_a = n * (n - 1) // 2
    if k != 1 + n * spec.lags:
        raise DomainError("design must hold an intercept plus full lag blocks")

    n_lag_coeffs = n * spec.lags
    d_phi = n + 3
    s_phi = 0.15 * 12.0 / (n * spec.lags)
    alpha_pi = 10.0 * n_lag_coeffs / 4.0
    beta_pi = 10.0 * n_lag_coeffs - alpha_pi

    s_sq = ar_residual_variances(y, x, spec.lags, spec.training_obs)
    prior_v = minnesota_variances(spec, n, s_sq)

    coeff_rng = [stream.child(1, i).generator for i in range(n)]
    a_rng = [stream.child(2, i).generator for i in range(n)]
    vol_rng = [stream.child(4, i).generator for i in range(n)]
    phi_rng = [stream.child(5, i).generator for i in range(n)]
    out_rng = [stream.child(6, i).generator for i in range(n)]

    ridge = x.T @ x + 1e-6 * np.eye(k)
    b = np.linalg.solve(ridge, x.T @ y).T       # (n, k)
    u = y - x @ b.T
    a_vec = np.zeros(n_a)
    h = np.repeat(np.log(s_sq)[None, :], t_len, axis=0)
    phi_sq = np.full(n, s_phi)
    kappa = np.ones((t_len, n), dtype=int)
    pi = np.full(n, alpha_pi / (alpha_pi + beta_pi))

    grid = np.arange(1, spec.s_max + 1)
    log_grid_sq = 2.0 * np.log(grid)

    n_keep = settings.n_retained
    out = SvotPosterior(
        coeff_mean=np.zeros((n, k)),
        coeff_last=np.empty((n_keep, n, k)),
        a_last=np.empty((n_keep, n_a)),
        log_vol_last=np.empty((n_keep, n)),
        phi_sq=np.empty((n_keep, n)),
        outlier_prob=np.empty((n_keep, n)),
        kappa_draws=np.empty((n_keep, n, t_len), dtype=np.int8) if keep_outliers else None,
    )

    keep = 0
    for it in range(settings.iterations):
        inv_sigma = np.exp(-h) / (kappa.astype(float) ** 2)

        # Step 1: coefficients, equation by equation through the triangle.
        a_mat = _compose_a(a_vec, n)
        for i in range(n):
            w_target = y[:, i] + u[:, :i] @ a_mat[i, :i]
            b[i] = _draw_weighted(x, w_target, inv_sigma[:, i], prior_v[i], coeff_rng[i])
            u[:, i] = y[:, i] - x @ b[i]

        # Step 2: impact rows on current reduced-form shocks.
        col = 0
        for i in range(1, n):
            a_vec[col: col + i] = _draw_weighted(
                -u[:, :i], u[:, i], inv_sigma[:, i],
                np.full(i, spec.a_prior_var), a_rng[i],
            )
            col += i
        a_mat = _compose_a(a_vec, n)

        nu = u @ a_mat.T
        trans0 = np.log(nu * nu + LOG_SQUARE_OFFSET)

        for i in range(n):
            obs = trans0[:, i] - 2.0 * np.log(kappa[:, i].astype(float))
            indicators = draw_mixture_indicators(obs, h[:, i], vol_rng[i])
            comp = indicators - 1

            # Step 4: integer outlier scale on a fixed grid.
            z = trans0[:, i, None] - h[:, i, None] - log_grid_sq[None, :]
            z = (z - _COMPONENT_MEANS[comp, None]) ** 2 / (2.0 * MIXTURE_VARIANCES[comp, None])
            logp = -z
            logp[:, 0] += np.log1p(-pi[i])
            logp[:, 1:] += np.log(pi[i] / (spec.s_max - 1))
            logp -= logp.max(axis=1, keepdims=True)
            probs = np.exp(logp)
            probs /= probs.sum(axis=1, keepdims=True)
            cum = np.cumsum(probs, axis=1)
            draws_u = out_rng[i].random(t_len)
            kappa[:, i] = 1 + (draws_u[:, None] > cum).sum(axis=1)

            # Step 5: outlier probability.
            n_out = int((kappa[:, i] > 1).sum())
            pi[i] = out_rng[i].beta(alpha_pi + n_out, beta_pi + (t_len - n_out))

            # Step 6: volatility path under the updated scales.
            obs = trans0[:, i] - 2.0 * np.log(kappa[:, i].astype(float))
            h[:, i] = draw_log_vol_path(
                obs, indicators, phi_sq[i], spec.h_init_var, vol_rng[i],
                init_mean=float(np.log(s_sq[i])),
            )

            # Step 7: innovation variance, shape d_phi + T/2 as displayed.
            dh = np.diff(h[:, i])
            phi_sq[i] = draw_inverse_gamma(
                d_phi + 0.5 * t_len, s_phi + 0.5 * float(dh @ dh), phi_rng[i]
            )

        if it >= settings.burnin and (it - settings.burnin) % settings.thin == 0:
            out.coeff_mean += b
            out.coeff_last[keep] = b
            out.a_last[keep] = a_vec
            out.log_vol_last[keep] = h[-1]
            out.phi_sq[keep] = phi_sq
            out.outlier_prob[keep] = pi
            if keep_outliers:
                out.kappa_draws[keep] = kappa.T
            keep += 1

    out.coeff_mean /= max(keep, 1)
    return out


def svot_forecast_bundle(posterior: SvotPosterior, tail: np.ndarray) -> ForecastBundle:
    """Forecast covariance at the origin volatility with the outlier scale at 1."""
    n_draws, n, _ = posterior.coeff_last.shape
    chol = np.empty((n_draws, n, n))
    eye_n = np.eye(n)
    for d in range(n_draws):
        a_inv = np.linalg.solve(_compose_a(posterior.a_last[d], n), eye_n)
        omega = (a_inv * np.exp(posterior.log_vol_last[d])) @ a_inv.T
        chol[d] = np.linalg.cholesky(0.5 * (omega + omega.T) + 1e-12 * eye_n)
    return ForecastBundle(posterior.coeff_last.copy(), chol, np.asarray(tail, dtype=float), n)
