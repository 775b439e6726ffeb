"""Gaussian state-path samplers.

Two families cover every latent path in the package:

* banded precision samplers for random-walk states observed through scalar
  measurements (log-volatilities, trend levels, per-equation coefficient and
  loading paths in first-difference form), drawn in one shot by factorizing
  the block-banded posterior precision;
* a square-root Carter-Kohn forward-filter backward-sampler for joint states
  observed through multivariate measurements (used by the estimated-breaks
  time-varying VAR).
"""

from __future__ import annotations

import numpy as np
from scipy import linalg as sla

from .errors import NumericalError
from .kernels import _as_generator, factor_spd


def _chol_banded_upper(ab: np.ndarray) -> np.ndarray:
    """Banded Cholesky (upper storage) with the package jitter ladder."""
    try:
        return sla.cholesky_banded(ab, lower=False, check_finite=False)
    except sla.LinAlgError:
        pass
    diag = ab[-1]
    scale = float(np.mean(diag))
    jitter = 1e-10 * scale
    while jitter <= 1e-4 * scale:
        bumped = ab.copy()
        bumped[-1] += jitter
        try:
            return sla.cholesky_banded(bumped, lower=False, check_finite=False)
        except sla.LinAlgError:
            jitter *= 10.0
    raise NumericalError(
        f"banded Cholesky failed: dim={ab.shape[1]}, bandwidth={ab.shape[0] - 1}, "
        f"mean diag={scale:.3e}, min diag={np.min(diag):.3e}"
    )


def _draw_from_banded(ab: np.ndarray, linear: np.ndarray, rng, noise=None) -> np.ndarray:
    """Draw x ~ N(P^-1 b, P^-1) for banded P (upper storage ab)."""
    gen = _as_generator(rng)
    u = _chol_banded_upper(ab)
    mean = sla.cho_solve_banded((u, False), linear, check_finite=False)
    if noise is None:
        noise = gen.standard_normal(linear.shape[0])
    # P = U' U with U upper triangular banded, so U^-1 z has covariance P^-1.
    shift = sla.solve_banded((0, ab.shape[0] - 1), u, noise, check_finite=False)
    return mean + shift


def sample_rw_path(
    obs: np.ndarray,
    obs_prec: np.ndarray,
    increment_prec,
    init_prec: float,
    init_mean: float,
    rng,
    noise=None,
) -> np.ndarray:
    """Draw a scalar random-walk path x_1..x_T observed as obs_t = x_t + noise.

    obs_prec holds the measurement precisions 1/sigma_t^2, increment_prec the
    T-1 state-innovation precisions (scalar broadcasts), and the initial state
    has prior N(init_mean, 1/init_prec). The posterior precision is
    tridiagonal, so the draw costs O(T).
    """
    obs = np.asarray(obs, dtype=float)
    obs_prec = np.asarray(obs_prec, dtype=float)
    t_len = obs.shape[0]
    inc = np.broadcast_to(np.asarray(increment_prec, dtype=float), (max(t_len - 1, 0),))

    diag = obs_prec.copy()
    diag[0] += init_prec
    if t_len > 1:
        diag[:-1] += inc
        diag[1:] += inc
    ab = np.zeros((2, t_len))
    ab[1] = diag
    if t_len > 1:
        ab[0, 1:] = -inc
    linear = obs_prec * obs
    linear[0] += init_prec * init_mean
    return _draw_from_banded(ab, linear, rng, noise=noise)


def sample_scalar_obs_rw_path(
    design: np.ndarray,
    obs: np.ndarray,
    obs_prec: np.ndarray,
    increment_prec: np.ndarray,
    init_prec: np.ndarray,
    init_mean: np.ndarray,
    rng,
    noise=None,
) -> np.ndarray:
    """Draw a k-dim random-walk coefficient path under scalar measurements.

    Model: obs_t = design_t' beta_t + N(0, 1/obs_prec_t), beta_t = beta_{t-1} +
    N(0, diag(1/increment_prec)), beta_1 ~ N(init_mean, diag(1/init_prec)).
    States are stacked time-major, giving a banded posterior precision with
    bandwidth k. Returns the (T, k) path.
    """
    design = np.asarray(design, dtype=float)
    obs = np.asarray(obs, dtype=float)
    obs_prec = np.asarray(obs_prec, dtype=float)
    t_len, k = design.shape
    inc = np.broadcast_to(np.asarray(increment_prec, dtype=float), (k,))
    init_prec = np.broadcast_to(np.asarray(init_prec, dtype=float), (k,))
    init_mean = np.broadcast_to(np.asarray(init_mean, dtype=float), (k,))

    blocks = obs_prec[:, None, None] * design[:, :, None] * design[:, None, :]
    idx = np.arange(k)
    blocks[0, idx, idx] += init_prec + (inc if t_len > 1 else 0.0)
    if t_len > 1:
        blocks[1:-1, idx, idx] += 2.0 * inc
        blocks[-1, idx, idx] += inc

    dim = t_len * k
    ab = np.zeros((k + 1, dim))
    # Within-block couplings occupy offsets 0..k-1, the random-walk coupling
    # between beta_t and beta_{t+1} sits exactly at offset k.
    for d in range(k):
        rows = ab[k - d].reshape(t_len, k)
        rows[:, d:] = blocks[:, idx[: k - d], idx[d:]]
    if t_len > 1:
        cross = ab[0].reshape(t_len, k)
        cross[1:, :] = -inc

    linear = (obs_prec * obs)[:, None] * design
    linear[0] += init_prec * init_mean
    draw = _draw_from_banded(ab, linear.reshape(dim), rng, noise=noise)
    return draw.reshape(t_len, k)


class CarterKohnResult:
    """Filtered moments plus a sampled state path."""

    def __init__(self, path, filtered_means, filtered_sqrts):
        self.path = path
        self.filtered_means = filtered_means
        self.filtered_sqrts = filtered_sqrts


def _qr_r(stacked: np.ndarray) -> np.ndarray:
    return np.linalg.qr(stacked, mode="r")


def carter_kohn(
    obs: np.ndarray,
    design: np.ndarray,
    obs_cov: np.ndarray,
    state_cov: np.ndarray,
    init_mean: np.ndarray,
    init_cov: np.ndarray,
    rng,
    noise=None,
) -> CarterKohnResult:
    """Sample random-walk states from a linear Gaussian model by FFBS.

    obs: (T, n) measurements; design: (T, n, K) matrices H_t; obs_cov: (n, n)
    or (T, n, n) measurement covariances; state_cov: (K, K) innovation
    covariance; the pre-sample state has prior N(init_mean, init_cov).

    The forward pass propagates upper Cholesky factors through QR updates
    (square-root form); the backward pass draws states from the exact
    conditional N(m_t + G(x_{t+1} - m_t), P_t - G P_t) with G = P_t(P_t+Q)^-1.
    Optional `noise` (T, K) standard normals makes the draw deterministic.
    """
    gen = _as_generator(rng)
    obs = np.asarray(obs, dtype=float)
    t_len, n = obs.shape
    k_dim = init_mean.shape[0]
    obs_cov = np.asarray(obs_cov, dtype=float)
    time_varying_r = obs_cov.ndim == 3

    m = np.asarray(init_mean, dtype=float)
    u = sla.cholesky(init_cov, lower=False, check_finite=False)
    u_q = sla.cholesky(state_cov, lower=False, check_finite=False)

    means = np.empty((t_len, k_dim))
    sqrts = np.empty((t_len, k_dim, k_dim))
    for t in range(t_len):
        # Predict: P_pred = P + Q via QR of stacked square roots.
        u_pred = _qr_r(np.vstack([u, u_q]))
        h_t = design[t]
        r_t = obs_cov[t] if time_varying_r else obs_cov
        r_chol = sla.cholesky(r_t, lower=False, check_finite=False)
        # Pre-array whose Gram matrix is [[S, H P], [P H', P]].
        pre = np.zeros((n + k_dim, n + k_dim))
        pre[:n, :n] = r_chol
        pre[n:, :n] = u_pred @ h_t.T
        pre[n:, n:] = u_pred
        post = _qr_r(pre)
        a = post[:n, :n]              # chol of innovation covariance
        b = post[:n, n:]              # A'^-1 H P
        u = post[n:, n:]              # filtered square root
        resid = obs[t] - h_t @ m
        m = m + b.T @ sla.solve_triangular(a, resid, trans="T", lower=False, check_finite=False)
        means[t] = m
        sqrts[t] = u

    path = np.empty((t_len, k_dim))
    if noise is None:
        noise = gen.standard_normal((t_len, k_dim))
    path[-1] = means[-1] + sqrts[-1].T @ noise[-1]
    q_mat = np.asarray(state_cov, dtype=float)
    for t in range(t_len - 2, -1, -1):
        p_t = sqrts[t].T @ sqrts[t]
        joint = p_t + q_mat
        gain = np.linalg.solve(joint, p_t).T
        mean_t = means[t] + gain @ (path[t + 1] - means[t])
        cov_t = p_t - gain @ p_t
        chol_t, _ = factor_spd(0.5 * (cov_t + cov_t.T))
        path[t] = mean_t + chol_t @ noise[t]
    return CarterKohnResult(path, means, sqrts)


def smoother_moments(
    obs: np.ndarray,
    design: np.ndarray,
    obs_cov: np.ndarray,
    state_cov: np.ndarray,
    init_mean: np.ndarray,
    init_cov: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed means and covariances of the random-walk states (RTS pass).

    Deterministic companion to `carter_kohn`, used by oracle tests that
    compare against dense joint-Gaussian conditioning.
    """
    obs = np.asarray(obs, dtype=float)
    t_len, n = obs.shape
    k_dim = init_mean.shape[0]
    obs_cov = np.asarray(obs_cov, dtype=float)
    time_varying_r = obs_cov.ndim == 3
    q_mat = np.asarray(state_cov, dtype=float)

    m = np.asarray(init_mean, dtype=float)
    p = np.asarray(init_cov, dtype=float)
    means_f = np.empty((t_len, k_dim))
    covs_f = np.empty((t_len, k_dim, k_dim))
    preds = np.empty((t_len, k_dim, k_dim))
    for t in range(t_len):
        p_pred = p + q_mat
        h_t = design[t]
        r_t = obs_cov[t] if time_varying_r else obs_cov
        s = h_t @ p_pred @ h_t.T + r_t
        gain = np.linalg.solve(s, h_t @ p_pred).T
        m = m + gain @ (obs[t] - h_t @ m)
        p = p_pred - gain @ h_t @ p_pred
        p = 0.5 * (p + p.T)
        means_f[t], covs_f[t], preds[t] = m, p, p_pred

    means_s = np.empty_like(means_f)
    covs_s = np.empty_like(covs_f)
    means_s[-1], covs_s[-1] = means_f[-1], covs_f[-1]
    for t in range(t_len - 2, -1, -1):
        p_pred = covs_f[t] + q_mat
        gain = np.linalg.solve(p_pred, covs_f[t]).T
        means_s[t] = means_f[t] + gain @ (means_s[t + 1] - means_f[t])
        covs_s[t] = covs_f[t] + gain @ (covs_s[t + 1] - p_pred) @ gain.T
    return means_s, covs_s
