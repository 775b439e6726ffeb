"""Driver-augmented VAR: coefficients drift with cumulated observable drivers.

The coefficient path of each equation is theta_t = theta + Gamma C_t with
C_t the prefix sum of lagged drivers, so the state equation collapses into
the measurement equation and estimation reduces to weighted regressions on
augmented designs [x_t', (x_t kron C_t)']. Equations are updated one at a
time; a factor structure with time-varying loadings plus per-equation
stochastic volatility gives the time-varying error covariance
Omega_t = Lambda_t Lambda_t' + Sigma_t.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg as sla

from . import horseshoe
from .data import build_design, cumulative_drivers
from .errors import DomainError
from .forecasting import ForecastBundle, simulate_paths
from .kernels import (
    VARIANCE_FLOOR,
    GaussianPosteriorSpec,
    SeededStream,
    _as_generator,
    draw_mvn_from_precision,
    factor_spd,
)
from .volatility import SvState, sv_cycle


@dataclass
class McmcSettings:
    """Chain length controls: total sweeps, burn-in, thinning stride."""

    iterations: int = 11_000
    burnin: int = 1_000
    thin: int = 10

    def __post_init__(self):
        if self.burnin >= self.iterations:
            raise DomainError("burn-in must be smaller than total iterations")
        if self.thin < 1:
            raise DomainError("thinning stride must be >= 1")

    @property
    def n_retained(self) -> int:
        return (self.iterations - self.burnin + self.thin - 1) // self.thin


PRESETS = {
    "mc": McmcSettings(11_000, 1_000, 10),
    "insample": McmcSettings(100_000, 5_000, 5),
}


@dataclass
class AvpModelSpec:
    """Structural choices for the augmented sampler."""

    lags: int = 2
    n_factors: int = 1
    stochastic_vol: bool = True
    sv_init_var: float = 1.0
    sv_a0: float = 1.0
    sv_b0: float = 0.01
    # With stochastic_vol off, equation variances are constant with a diffuse
    # inverse-gamma prior.
    sigma_prior_shape: float = 0.01
    sigma_prior_scale: float = 0.01
    # When set, baseline coefficients act as a free initial condition with a
    # fixed N(0, level_prior_var) prior and only the drift loadings are
    # shrunk; by default both blocks carry horseshoe priors.
    level_prior_var: Optional[float] = None


def augment_regressors(base: np.ndarray, cumulative: np.ndarray) -> np.ndarray:
    """Rows [x_t', (x_t kron C_t)'] with column-major coefficient stacking.

    Element k*j + i of the interaction block is x_t[i] * C_t[j], matching
    vec(Gamma) read column by column, so x_t' Gamma C_t = interactions' vec(Gamma).
    """
    base = np.atleast_2d(np.asarray(base, dtype=float))
    cumulative = np.atleast_2d(np.asarray(cumulative, dtype=float))
    t_len, k = base.shape
    m = cumulative.shape[1]
    if cumulative.shape[0] != t_len:
        raise DomainError("base design and cumulative drivers must have equal rows")
    if m == 0:
        return base.copy()
    inter = np.einsum("tj,ti->tji", cumulative, base).reshape(t_len, k * m)
    return np.hstack([base, inter])


def split_augmented(coeffs: np.ndarray, k: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Baseline vector and (k, m) drift-loading matrix from stacked coefficients."""
    coeffs = np.asarray(coeffs, dtype=float)
    base = coeffs[:k]
    gamma = coeffs[k:].reshape((k, m), order="F") if m else np.zeros((k, 0))
    return base, gamma


def recover_time_paths(coeffs: np.ndarray, cumulative: np.ndarray) -> np.ndarray:
    """Coefficient path theta_t = theta + Gamma C_t for one equation, (T, k)."""
    cumulative = np.atleast_2d(np.asarray(cumulative, dtype=float))
    k = coeffs.shape[0] // (1 + cumulative.shape[1]) if cumulative.shape[1] else coeffs.shape[0]
    base, gamma = split_augmented(coeffs, k, cumulative.shape[1])
    return base[None, :] + cumulative @ gamma.T


def _standardize_columns(c: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center and scale cumulative-driver columns for sampling.

    Cumulated drivers grow with t, so their raw columns dwarf the baseline
    regressors and a unit-scale shrinkage prior would price a path level
    bought through gamma far below the same level in theta. Sampling on
    centered unit-sd columns makes the prior charge by path movement and
    pins the average level on theta; draws are mapped back to the raw
    parameterization before being stored.
    """
    mean = c.mean(axis=0)
    sd = c.std(axis=0)
    # Dead columns (constant C) keep scale 1 so the remap stays bounded.
    scale = np.where(sd > 1e-8, sd, 1.0)
    return (c - mean) / scale, mean, scale


def _raw_parameterization(coeffs, base_dim, c_mean, c_scale) -> np.ndarray:
    """Map standardized-column draws back to the theta + Gamma C_t form."""
    out = np.array(coeffs, dtype=float)
    m = c_mean.shape[0]
    if m == 0 or base_dim == 0:
        return out
    gamma = out[:, base_dim:].reshape(out.shape[0], m, base_dim)
    gamma /= c_scale[:, None]
    out[:, :base_dim] -= np.einsum("lmk,m->lk", gamma, c_mean)
    return out


def equation_posterior_spec(
    design: np.ndarray,
    target: np.ndarray,
    weights: np.ndarray,
    prior_var: np.ndarray,
) -> GaussianPosteriorSpec:
    """Precision-form conditional for one equation's coefficient block."""
    xw = design * weights[:, None]
    precision = xw.T @ design
    precision[np.diag_indices_from(precision)] += 1.0 / prior_var
    return GaussianPosteriorSpec(precision, xw.T @ target)


def _block_horseshoes(base_dim: int, total_dim: int, level_var=None) -> list:
    # Static columns and drift columns shrink against separate global scales;
    # under a shared scale the crowd of null drift terms drags the global down
    # and taxes the baseline coefficients toward zero, which misallocates
    # levels whenever the base regressors are strongly correlated. With a
    # fixed level variance the static block leaves the hierarchy entirely.
    states = [] if level_var is not None else [horseshoe.HorseshoeState.unit(base_dim)]
    if total_dim > base_dim:
        states.append(horseshoe.HorseshoeState.unit(total_dim - base_dim))
    return states


def _block_prior_var(states, base_dim: int, level_var=None) -> np.ndarray:
    parts = [] if level_var is None else [np.full(base_dim, float(level_var))]
    parts += [horseshoe.prior_variances(s) for s in states]
    return parts[0] if len(parts) == 1 else np.concatenate(parts)


def _update_block_scales(states, values, split, rng, level_var=None):
    # Drift globals are slice-sampled against the marginal likelihood inside
    # the equation loop, so only their local scales refresh here.
    drift = states
    if level_var is None:
        horseshoe.update(states[0], values[:split], rng)
        drift = states[1:]
    if drift:
        horseshoe.update_locals(drift[0], values[split:], rng)


def _draw_block(design, target, weights, states, split, rng_scale, rng_coeff,
                level_var=None, gram=None):
    # One equation-block cycle: slice the drift global scale against the
    # collapsed evidence, then draw all coefficients given the fresh scale.
    # Collapsing is what makes the scale move: the usual conditional only ever
    # sees the last coefficient draw, which the scale itself produced.
    # `gram` short-circuits design.T @ W @ design when the weights are flat.
    if gram is not None:
        w0 = float(weights[0])
        a_mat = gram * w0
        b_vec = (design.T @ target) * w0
    else:
        xw = design * weights[:, None]
        a_mat = xw.T @ design
        b_vec = xw.T @ target
    if design.shape[1] > split:
        state = states[-1]
        static_var = (
            np.full(split, float(level_var))
            if level_var is not None
            else horseshoe.prior_variances(states[0])
        )
        ev, proj = _drift_evidence(
            design, target, weights, a_mat, b_vec, static_var, state.local_sq, split
        )
        horseshoe.update_global_collapsed(state, ev, proj, rng_scale)
    a_mat[np.diag_indices_from(a_mat)] += 1.0 / _block_prior_var(states, split, level_var)
    return draw_mvn_from_precision(GaussianPosteriorSpec(a_mat, b_vec), rng_coeff)


def _drift_evidence(design, target, weights, a_mat, b_vec, static_var, local_sq, split):
    """Eigen summary (ev, proj) of the drift block's marginal likelihood.

    With prior variance tau^2 * local_sq on the drift columns and the static
    columns integrated out under `static_var`, the evidence satisfies
    log p(y | tau^2) - log p(y | 0)
        = 0.5 sum proj^2 tau^2/(1 + tau^2 ev) - 0.5 sum log(1 + tau^2 ev).
    Computed in whichever space is smaller: drift columns (via the static
    block's Schur complement) or observations (via the weighted design with
    the statics projected out), which keeps wide blocks at O(T^2) per sweep.
    """
    scale = np.sqrt(np.maximum(np.asarray(local_sq, dtype=float), VARIANCE_FLOOR))
    t_len, total = design.shape
    if total - split <= t_len:
        a_dd = a_mat[split:, split:]
        b_d = b_vec[split:]
        if split:
            a_ss = a_mat[:split, :split] + np.diag(1.0 / np.asarray(static_var, dtype=float))
            a_sd = a_mat[:split, split:]
            chol, _ = factor_spd(a_ss)
            a_dd = a_dd - a_sd.T @ sla.cho_solve((chol, True), a_sd, check_finite=False)
            b_d = b_d - a_sd.T @ sla.cho_solve((chol, True), b_vec[:split], check_finite=False)
        schur = a_dd * np.outer(scale, scale)
        eigenvalues, rotation = np.linalg.eigh(0.5 * (schur + schur.T))
        return eigenvalues, rotation.T @ (scale * b_d)

    sw = np.sqrt(np.asarray(weights, dtype=float))
    x_d = design[:, split:] * sw[:, None] * scale[None, :]
    y_w = np.asarray(target, dtype=float) * sw
    if split:
        # Project the statics out at matrix-square-root level: with
        # U U' = Xs P^-1 Xs' (rank `split`), the root of I - U U' is a same
        # rank correction, so no T x T factorization is needed.
        x_s = design[:, :split] * sw[:, None]
        p_mat = x_s.T @ x_s + np.diag(1.0 / np.asarray(static_var, dtype=float))
        chol, _ = factor_spd(p_mat)
        u = sla.solve_triangular(chol, x_s.T, lower=True, check_finite=False).T
        d, rot = np.linalg.eigh(u.T @ u)
        d = np.clip(d, 0.0, 1.0)
        keep = d > 1e-14
        basis = (u @ rot[:, keep]) / np.sqrt(d[keep])
        damp = 1.0 - np.sqrt(1.0 - d[keep])
        x_d = x_d - basis @ (damp[:, None] * (basis.T @ x_d))
        y_w = y_w - basis @ (damp * (basis.T @ y_w))
    gram_dual = x_d @ x_d.T
    eigenvalues, rotation = np.linalg.eigh(0.5 * (gram_dual + gram_dual.T))
    eigenvalues = np.maximum(eigenvalues, 0.0)
    lifted = rotation.T @ (x_d @ (x_d.T @ y_w))
    positive = eigenvalues > eigenvalues[-1] * 1e-12 if eigenvalues.size else eigenvalues > 0
    proj = np.where(positive, lifted / np.sqrt(np.where(positive, eigenvalues, 1.0)), 0.0)
    return eigenvalues, proj


def draw_factors(
    resid: np.ndarray,
    loadings: np.ndarray,
    precisions: np.ndarray,
    rng,
    noise=None,
) -> np.ndarray:
    """Draw f_t ~ N(G_t Lambda_t' Sigma_t^-1 resid_t, G_t) for every period.

    resid: (T, n) measurement residuals net of the regression part;
    loadings: (T, n, r); precisions: (T, n) idiosyncratic 1/sigma_it^2.
    """
    gen = _as_generator(rng)
    t_len, n, r = loadings.shape
    lw = loadings * precisions[:, :, None]
    g_inv = np.einsum("tnr,tns->trs", loadings, lw)
    g_inv[:, np.arange(r), np.arange(r)] += 1.0
    linear = np.einsum("tnr,tn->tr", lw, resid)
    if noise is None:
        noise = gen.standard_normal((t_len, r))
    if r == 1:
        prec = g_inv[:, 0, 0]
        return (linear[:, 0] / prec + noise[:, 0] / np.sqrt(prec))[:, None]
    chol = np.linalg.cholesky(g_inv)
    mean = np.linalg.solve(g_inv, linear[:, :, None])[:, :, 0]
    # L^-T z has covariance G; solve each small triangular system.
    draws = np.empty((t_len, r))
    for t in range(t_len):
        draws[t] = mean[t] + sla.solve_triangular(
            chol[t], noise[t], trans="T", lower=True, check_finite=False
        )
    return draws


@dataclass
class AvpPosterior:
    """Retained draws plus the alignment info needed to forecast."""

    coeffs: np.ndarray            # (D, n, k(1+m)) regression blocks
    loadings: np.ndarray          # (D, n, r(1+m)) loading blocks
    factors: np.ndarray           # (D, T, r)
    log_vol: np.ndarray           # (D, n, T)
    sv_omega_sq: np.ndarray       # (D, n)
    sigma_sq: np.ndarray          # (D, n) constant variances when SV is off
    k: int
    m: int
    r: int
    cumulative: np.ndarray        # (T, m) cumulative drivers aligned to targets
    spec: AvpModelSpec = None
    settings: McmcSettings = None

    @property
    def n_draws(self) -> int:
        return self.coeffs.shape[0]

    @property
    def n_series(self) -> int:
        return self.coeffs.shape[1]

    def coefficient_path_mean(self, equation: int = 0) -> np.ndarray:
        """Posterior-mean coefficient path for one equation, (T, k)."""
        mean_coeffs = self.coeffs.mean(axis=0)[equation]
        return recover_time_paths(mean_coeffs, self.cumulative)


def run_gibbs(
    targets: np.ndarray,
    base_design: np.ndarray,
    cumulative: np.ndarray,
    spec: AvpModelSpec,
    settings: McmcSettings,
    stream: SeededStream,
) -> AvpPosterior:
    """Gibbs sampler over coefficients, loadings, factors, volatilities, scales.

    targets: (T, n) left-hand variables; base_design: (T, k) rows x_t';
    cumulative: (T, m) C_t aligned with the target rows. Each equation owns
    horseshoe states for its regression and loading blocks (static and drift
    columns separately) and its own random stream, so equation updates commute.
    """
    y = np.atleast_2d(np.asarray(targets, dtype=float))
    x = np.atleast_2d(np.asarray(base_design, dtype=float))
    c = np.atleast_2d(np.asarray(cumulative, dtype=float))
    t_len, n = y.shape
    k = x.shape[1]
    m = c.shape[1]
    r = spec.n_factors
    if x.shape[0] != t_len or c.shape[0] != t_len:
        raise DomainError("targets, design, and cumulative drivers must share rows")

    if m:
        c_std, c_mean, c_scale = _standardize_columns(c)
    else:
        c_std, c_mean, c_scale = c, np.zeros(0), np.ones(0)

    x_aug = augment_regressors(x, c_std)
    q_b = x_aug.shape[1]
    q_l = r * (1 + m)

    # Equation-level streams: one per (equation, block) so update order and
    # parallel scheduling cannot change the draws.
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

    # Least-squares warm start on the base design; augmented blocks start at 0.
    coeffs = np.zeros((n, q_b))
    ridge = x.T @ x + 1e-6 * np.eye(k)
    coeffs[:, :k] = np.linalg.solve(ridge, x.T @ y).T
    resid0 = y - x @ coeffs[:, :k].T

    sv_states = [
        SvState.from_residuals(resid0[:, i], init_var=spec.sv_init_var) for i in range(n)
    ]
    sigma_sq = np.maximum(resid0.var(axis=0, ddof=1), 1e-8) if n else np.ones(0)

    if r:
        # Principal components of the warm-start residuals, scaled to unit sd.
        _, _, vt = np.linalg.svd(resid0 - resid0.mean(axis=0), full_matrices=False)
        factors = resid0 @ vt[:r].T
        factors /= np.maximum(factors.std(axis=0, ddof=1), 1e-12)
        loadings = np.zeros((n, q_l))
        loadings[:, :r] = np.linalg.lstsq(factors, resid0, rcond=None)[0].T
    else:
        factors = np.zeros((t_len, 0))
        loadings = np.zeros((n, 0))

    level_var = spec.level_prior_var
    hs_beta = [_block_horseshoes(k, q_b, level_var) for _ in range(n)]
    hs_lam = [_block_horseshoes(r, q_l) for _ in range(n)] if r else None

    n_keep = settings.n_retained
    out = AvpPosterior(
        coeffs=np.empty((n_keep, n, q_b)),
        loadings=np.empty((n_keep, n, q_l)),
        factors=np.empty((n_keep, t_len, r)),
        log_vol=np.empty((n_keep, n, t_len)),
        sv_omega_sq=np.empty((n_keep, n)),
        sigma_sq=np.empty((n_keep, n)),
        k=k,
        m=m,
        r=r,
        cumulative=c.copy(),
        spec=spec,
        settings=settings,
    )

    keep = 0
    f_aug = augment_regressors(factors, c_std) if r else None
    gram_x = None if spec.stochastic_vol else x_aug.T @ x_aug
    for it in range(settings.iterations):
        if spec.stochastic_vol:
            precisions = np.stack([sv_states[i].precisions() for i in range(n)], axis=1)
        else:
            precisions = np.broadcast_to(1.0 / sigma_sq, (t_len, n)).copy()

        for i in range(n):
            rngs = eq_streams[i]
            target_i = y[:, i] - (f_aug @ loadings[i] if r else 0.0)
            coeffs[i] = _draw_block(
                x_aug, target_i, precisions[:, i],
                hs_beta[i], k, rngs["scale"], rngs["coeff"], level_var, gram_x,
            )

        fitted = x_aug @ coeffs.T
        if r:
            for i in range(n):
                rngs = eq_streams[i]
                loadings[i] = _draw_block(
                    f_aug, y[:, i] - fitted[:, i], precisions[:, i],
                    hs_lam[i], r, rngs["scale"], rngs["load"],
                )
            lam_paths = np.stack(
                [recover_time_paths(loadings[i], c_std) for i in range(n)], axis=1
            )
            factors = draw_factors(y - fitted, lam_paths, precisions, factor_rng)
            f_aug = augment_regressors(factors, c_std)
            resid = y - fitted - f_aug @ loadings.T
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
            _update_block_scales(hs_beta[i], coeffs[i], k, rngs["scale"], level_var)
            if r:
                _update_block_scales(hs_lam[i], loadings[i], r, rngs["scale"])

        if it >= settings.burnin and (it - settings.burnin) % settings.thin == 0:
            out.coeffs[keep] = _raw_parameterization(coeffs, k, c_mean, c_scale)
            out.loadings[keep] = _raw_parameterization(loadings, r, c_mean, c_scale)
            out.factors[keep] = factors
            for i in range(n):
                out.log_vol[keep, i] = sv_states[i].log_vol
                out.sv_omega_sq[keep, i] = sv_states[i].omega_sq
            out.sigma_sq[keep] = sigma_sq
            keep += 1

    return out


@dataclass
class VarData:
    """Design bundle tying a fitted VAR back to its panel timeline."""

    targets: np.ndarray
    design: np.ndarray
    cumulative: np.ndarray
    tail: np.ndarray            # last `lags` rows of the panel, oldest first
    driver_at_origin: np.ndarray


def build_var_data(panel_values: np.ndarray, driver_values: np.ndarray, lags: int) -> VarData:
    """Lag design plus drivers aligned to the target rows."""
    y = np.atleast_2d(np.asarray(panel_values, dtype=float))
    z = np.atleast_2d(np.asarray(driver_values, dtype=float))
    if z.shape[0] != y.shape[0]:
        raise DomainError("panel and drivers must cover the same rows")
    targets, design = build_design(y, lags)
    c = cumulative_drivers(z)[lags:]
    return VarData(
        targets=targets,
        design=design,
        cumulative=c,
        tail=y[-lags:],
        driver_at_origin=z[-1],
    )


def fit_avp_var(
    panel_values: np.ndarray,
    driver_values: np.ndarray,
    spec: AvpModelSpec,
    settings: McmcSettings,
    stream: SeededStream,
) -> tuple[AvpPosterior, VarData]:
    """Estimate the driver-augmented VAR on an aligned panel + driver block."""
    dat = build_var_data(panel_values, driver_values, spec.lags)
    post = run_gibbs(dat.targets, dat.design, dat.cumulative, spec, settings, stream)
    return post, dat


def forecast_bundle(
    posterior: AvpPosterior,
    tail: np.ndarray,
    driver_at_origin: np.ndarray,
) -> ForecastBundle:
    """Per-draw coefficient matrices and covariance factors at the origin.

    Coefficients and loadings advance once to C_{T+1} = C_T + Z_T and are held
    there across horizons; idiosyncratic variances stay at their last-period
    values.
    """
    n_draws, n, _ = posterior.coeffs.shape
    k, m, r = posterior.k, posterior.m, posterior.r
    if m:
        c_next = posterior.cumulative[-1] + np.asarray(driver_at_origin, dtype=float)
    else:
        c_next = np.zeros(0)

    base = posterior.coeffs[:, :, :k]
    if m:
        gammas = posterior.coeffs[:, :, k:].reshape(n_draws, n, m, k).swapaxes(2, 3)
        coeff_mats = base + gammas @ c_next
    else:
        coeff_mats = base.copy()

    if r:
        lam_base = posterior.loadings[:, :, :r]
        if m:
            lam_gam = posterior.loadings[:, :, r:].reshape(n_draws, n, m, r).swapaxes(2, 3)
            lam_next = lam_base + lam_gam @ c_next
        else:
            lam_next = lam_base
    else:
        lam_next = np.zeros((n_draws, n, 0))

    if posterior.spec is not None and not posterior.spec.stochastic_vol:
        idio = posterior.sigma_sq
    else:
        idio = np.exp(posterior.log_vol[:, :, -1])
    omega = lam_next @ lam_next.swapaxes(1, 2)
    omega[:, np.arange(n), np.arange(n)] += idio
    chol = np.linalg.cholesky(omega)
    return ForecastBundle(coeff_mats, chol, np.asarray(tail, dtype=float), n)


def forecast_paths(
    posterior: AvpPosterior,
    tail: np.ndarray,
    driver_at_origin: np.ndarray,
    horizons: int,
    stream: SeededStream,
) -> np.ndarray:
    """Simulate (draws, horizons, n) future paths from the forecast origin."""
    bundle = forecast_bundle(posterior, tail, driver_at_origin)
    return simulate_paths(bundle, horizons, stream)
