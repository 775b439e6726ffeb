"""Univariate local level with stochastic volatility in level and noise.

y_t = tau_t + exp(h_eps_t / 2) eps_t, tau a random walk whose innovation
variance exp(h_eta_t) is itself stochastic. Both log-sd paths move with
standard-normal steps, so on the log-variance scale the step variance is 4;
the scales are fixed there by default and learned only on request.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..forecasting import ForecastBundle
from ..kernels import SeededStream
from ..model import McmcSettings
from ..statespace import sample_rw_path
from ..volatility import (
    LOG_SQUARE_OFFSET,
    draw_log_vol_path,
    draw_mixture_indicators,
    update_omega2,
)

# Unit-variance steps on log sigma translate to variance 2^2 on log sigma^2.
LOG_VARIANCE_STEP = 4.0


@dataclass
class UcsvSpec:
    tau_init_mean: float = 0.0
    tau_init_var: float = 100.0
    h_eps_init_mean: float = 0.0
    h_eps_init_var: float = 10.0
    h_eta_init_mean: float = 0.0
    h_eta_init_var: float = 10.0
    learn_scales: bool = False
    sv_a0: float = 1.0
    sv_b0: float = 0.01
    log_square_offset: float = LOG_SQUARE_OFFSET


@dataclass
class UcsvPosterior:
    tau_path_mean: np.ndarray   # (T,)
    tau_last: np.ndarray        # (D,)
    h_eps_last: np.ndarray      # (D,)
    eps_scale_sq: np.ndarray    # (D,) innovation variance of h_eps
    eta_scale_sq: np.ndarray    # (D,)
    tau_paths: np.ndarray = None  # (D, T) kept on request

    @property
    def n_draws(self) -> int:
        return self.tau_last.shape[0]


def run_ucsv_gibbs(
    series: np.ndarray,
    spec: UcsvSpec,
    settings: McmcSettings,
    stream: SeededStream,
    keep_paths: bool = False,
) -> UcsvPosterior:
    """Three-block cycle: level path, measurement volatility, level volatility."""
    y = np.asarray(series, dtype=float).reshape(-1)
    t_len = y.shape[0]
    if t_len < 3:
        raise DomainError("series too short for a local-level fit")

    tau_rng = stream.child(1).generator
    eps_rng = stream.child(2).generator
    eta_rng = stream.child(3).generator
    scale_rng = stream.child(5).generator

    tau = y.copy()
    h_eps = np.full(t_len, np.log(max(np.var(np.diff(y)), 1e-8)))
    h_eta = np.full(t_len - 1, h_eps[0] - np.log(2.0))
    eps_scale_sq = LOG_VARIANCE_STEP
    eta_scale_sq = LOG_VARIANCE_STEP

    n_keep = settings.n_retained
    out = UcsvPosterior(
        tau_path_mean=np.zeros(t_len),
        tau_last=np.empty(n_keep),
        h_eps_last=np.empty(n_keep),
        eps_scale_sq=np.empty(n_keep),
        eta_scale_sq=np.empty(n_keep),
        tau_paths=np.empty((n_keep, t_len)) if keep_paths else None,
    )

    keep = 0
    for it in range(settings.iterations):
        tau = sample_rw_path(
            y,
            np.exp(-h_eps),
            np.exp(-h_eta),
            1.0 / spec.tau_init_var,
            spec.tau_init_mean,
            tau_rng,
        )

        resid = y - tau
        trans = np.log(resid * resid + spec.log_square_offset)
        ind = draw_mixture_indicators(trans, h_eps, eps_rng)
        h_eps = draw_log_vol_path(
            trans, ind, eps_scale_sq, spec.h_eps_init_var, eps_rng,
            init_mean=spec.h_eps_init_mean,
        )

        steps = np.diff(tau)
        trans = np.log(steps * steps + spec.log_square_offset)
        ind = draw_mixture_indicators(trans, h_eta, eta_rng)
        h_eta = draw_log_vol_path(
            trans, ind, eta_scale_sq, spec.h_eta_init_var, eta_rng,
            init_mean=spec.h_eta_init_mean,
        )

        if spec.learn_scales:
            eps_scale_sq = update_omega2(h_eps, scale_rng, a0=spec.sv_a0, b0=spec.sv_b0)
            eta_scale_sq = update_omega2(h_eta, scale_rng, a0=spec.sv_a0, b0=spec.sv_b0)

        if it >= settings.burnin and (it - settings.burnin) % settings.thin == 0:
            out.tau_path_mean += tau
            out.tau_last[keep] = tau[-1]
            out.h_eps_last[keep] = h_eps[-1]
            out.eps_scale_sq[keep] = eps_scale_sq
            out.eta_scale_sq[keep] = eta_scale_sq
            if keep_paths:
                out.tau_paths[keep] = tau
            keep += 1

    out.tau_path_mean /= max(keep, 1)
    return out


def ucsv_forecast_bundle(posterior: UcsvPosterior, last_obs: float) -> ForecastBundle:
    """Level held at the origin; mean = tau_T, variance = exp(h_eps_T)."""
    n_draws = posterior.n_draws
    coeff = np.zeros((n_draws, 1, 2))
    coeff[:, 0, 0] = posterior.tau_last
    chol = np.exp(0.5 * posterior.h_eps_last).reshape(n_draws, 1, 1)
    tail = np.array([[float(last_obs)]])
    return ForecastBundle(coeff, chol, tail, 1)
