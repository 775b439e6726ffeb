"""Time-varying VAR with empirical-Bayes priors and triangular covariances.

States (coefficients, contemporaneous relations, log-volatilities) follow
random walks with inverse-Wishart innovation covariances; paths are drawn by
the square-root Carter-Kohn smoother. Initial states are calibrated on a
least-squares training sample, so results depend on the variable ordering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sstats

from ..errors import DomainError
from ..forecasting import ForecastBundle
from ..kernels import SeededStream
from ..model import McmcSettings
from ..statespace import carter_kohn
from ..volatility import (
    LOG_SQUARE_OFFSET,
    MIXTURE_VARIANCES,
    _COMPONENT_MEANS,
    draw_mixture_indicators,
)


@dataclass
class EbSpec:
    lags: int = 2
    training_obs: int = 40
    state_scale: float = 0.01    # S_Q, S_Phi, S_Omega diagonal value
    init_cov_factor: float = 4.0  # inflation of training-sample OLS covariances


@dataclass
class EbPosterior:
    coeff_path_mean: np.ndarray   # (n, T, k)
    coeff_last: np.ndarray        # (D, n, k)
    a_last: np.ndarray            # (D, n(n-1)/2)
    log_vol_last: np.ndarray      # (D, n)


def _a_design(resid: np.ndarray) -> np.ndarray:
    """Per-period design mapping vech(A) states to equations 2..n."""
    t_len, n = resid.shape
    n_a = n * (n - 1) // 2
    design = np.zeros((t_len, n - 1, n_a))
    col = 0
    for i in range(1, n):
        design[:, i - 1, col: col + i] = -resid[:, :i]
        col += i
    return design


def _compose_a(a_vec: np.ndarray, n: int) -> np.ndarray:
    """Lower unitriangular matrix from stacked rows (a_21, a_31, a_32, ...)."""
    a_mat = np.eye(n)
    col = 0
    for i in range(1, n):
        a_mat[i, :i] = a_vec[col: col + i]
        col += i
    return a_mat


def run_eb_gibbs(
    targets: np.ndarray,
    base_design: np.ndarray,
    spec: EbSpec,
    settings: McmcSettings,
    stream: SeededStream,
) -> EbPosterior:
    y = np.atleast_2d(np.asarray(targets, dtype=float))
    x = np.atleast_2d(np.asarray(base_design, dtype=float))
    t_len, n = y.shape
    k = x.shape[1]
    big_k = n * k
    n_a = n * (n - 1) // 2
    if t_len < 2 * k:
        raise DomainError("window too short for the time-varying benchmark")

    rng_beta = stream.child(1).generator
    rng_a = stream.child(2).generator
    rng_h = stream.child(3).generator
    rng_cov = stream.child(4).generator

    # Training-sample least squares pins down the initial-state priors.
    t_train = min(spec.training_obs, t_len)
    xt, yt = x[:t_train], y[:t_train]
    gram = xt.T @ xt + 1e-8 * np.eye(k)
    b_train = np.linalg.solve(gram, xt.T @ yt)          # (k, n)
    resid_train = yt - xt @ b_train
    beta0_mean = b_train.T.reshape(big_k)               # equation blocks stacked
    beta0_cov = np.zeros((big_k, big_k))
    gram_inv = np.linalg.inv(gram)
    for i in range(n):
        s2 = max(float(resid_train[:, i] @ resid_train[:, i]) / max(t_train - k, 1), 1e-8)
        beta0_cov[i * k:(i + 1) * k, i * k:(i + 1) * k] = spec.init_cov_factor * s2 * gram_inv

    a0_mean = np.zeros(n_a)
    a0_cov = np.eye(max(n_a, 1))
    rotated = resid_train.copy()
    col = 0
    for i in range(1, n):
        lhs = resid_train[:, i]
        rhs = -resid_train[:, :i]
        coef, *_ = np.linalg.lstsq(rhs, lhs, rcond=None)
        a0_mean[col: col + i] = coef
        fit_resid = lhs - rhs @ coef
        s2 = max(float(fit_resid @ fit_resid) / max(t_train - i, 1), 1e-8)
        cov_i = s2 * np.linalg.inv(rhs.T @ rhs + 1e-8 * np.eye(i))
        a0_cov[col: col + i, col: col + i] = spec.init_cov_factor * cov_i
        rotated[:, i] = fit_resid
        col += i
    h0_mean = np.log(np.maximum(rotated.var(axis=0, ddof=1), 1e-8))

    nu_q, s_q = big_k + 2, spec.state_scale * np.eye(big_k)
    nu_phi, s_phi = n + 2, spec.state_scale * np.eye(max(n_a, 1))
    nu_om, s_om = n + 2, spec.state_scale * np.eye(n)
    q_mat = s_q / 1.0
    phi_mat = s_phi / 1.0
    om_mat = s_om / 1.0

    design_beta = np.zeros((t_len, n, big_k))
    for i in range(n):
        design_beta[:, i, i * k:(i + 1) * k] = x

    beta_paths = np.repeat(beta0_mean[None, :], t_len, axis=0)
    a_paths = np.repeat(a0_mean[None, :], t_len, axis=0)
    h_paths = np.repeat(h0_mean[None, :], t_len, axis=0)

    n_keep = settings.n_retained
    out = EbPosterior(
        coeff_path_mean=np.zeros((n, t_len, k)),
        coeff_last=np.empty((n_keep, n, k)),
        a_last=np.empty((n_keep, n_a)),
        log_vol_last=np.empty((n_keep, n)),
    )

    keep = 0
    eye_n = np.eye(n)
    for it in range(settings.iterations):
        # Error covariances R_t = A_t^-1 H_t A_t^-T.
        r_all = np.empty((t_len, n, n))
        for t in range(t_len):
            a_inv = np.linalg.solve(_compose_a(a_paths[t], n), eye_n)
            r_all[t] = (a_inv * np.exp(h_paths[t])) @ a_inv.T
        beta_paths = carter_kohn(
            y, design_beta, r_all, q_mat, beta0_mean, beta0_cov, rng_beta
        ).path

        dbeta = np.diff(beta_paths, axis=0)
        q_mat = sstats.invwishart.rvs(
            df=nu_q + t_len, scale=s_q + dbeta.T @ dbeta, random_state=rng_cov
        )

        resid = y - np.einsum("tnk,tk->tn", design_beta, beta_paths)
        if n_a:
            h_var = np.exp(h_paths[:, 1:])
            obs_cov = np.zeros((t_len, n - 1, n - 1))
            obs_cov[:, np.arange(n - 1), np.arange(n - 1)] = h_var
            a_paths = carter_kohn(
                resid[:, 1:], _a_design(resid), obs_cov, phi_mat, a0_mean, a0_cov, rng_a
            ).path
            da = np.diff(a_paths, axis=0)
            phi_mat = sstats.invwishart.rvs(
                df=nu_phi + t_len, scale=s_phi + da.T @ da, random_state=rng_cov
            )

        u = np.empty_like(resid)
        for t in range(t_len):
            u[t] = _compose_a(a_paths[t], n) @ resid[t]
        ystar = np.log(u * u + LOG_SQUARE_OFFSET)
        obs_h = np.empty_like(ystar)
        var_h = np.empty_like(ystar)
        for i in range(n):
            s = draw_mixture_indicators(ystar[:, i], h_paths[:, i], rng_h) - 1
            obs_h[:, i] = ystar[:, i] - _COMPONENT_MEANS[s]
            var_h[:, i] = MIXTURE_VARIANCES[s]
        obs_cov_h = np.zeros((t_len, n, n))
        obs_cov_h[:, np.arange(n), np.arange(n)] = var_h
        design_h = np.broadcast_to(eye_n, (t_len, n, n))
        h_paths = carter_kohn(
            obs_h, design_h, obs_cov_h, om_mat, h0_mean, np.eye(n), rng_h
        ).path
        dh = np.diff(h_paths, axis=0)
        om_mat = sstats.invwishart.rvs(
            df=nu_om + t_len, scale=s_om + dh.T @ dh, random_state=rng_cov
        )

        if it >= settings.burnin and (it - settings.burnin) % settings.thin == 0:
            out.coeff_path_mean += beta_paths.reshape(t_len, n, k).transpose(1, 0, 2)
            out.coeff_last[keep] = beta_paths[-1].reshape(n, k)
            out.a_last[keep] = a_paths[-1]
            out.log_vol_last[keep] = h_paths[-1]
            keep += 1

    out.coeff_path_mean /= max(keep, 1)
    return out


def eb_forecast_bundle(posterior: EbPosterior, tail: np.ndarray) -> ForecastBundle:
    n_draws, n, _ = posterior.coeff_last.shape
    chol = np.empty((n_draws, n, n))
    eye_n = np.eye(n)
    for d in range(n_draws):
        a_inv = np.linalg.solve(_compose_a(posterior.a_last[d], n), eye_n)
        omega = (a_inv * np.exp(posterior.log_vol_last[d])) @ a_inv.T
        chol[d] = np.linalg.cholesky(0.5 * (omega + omega.T) + 1e-12 * eye_n)
    return ForecastBundle(posterior.coeff_last.copy(), chol, np.asarray(tail, dtype=float), n)
