"""Seeded streams, precision-form Gaussian draws, and scale-family draws."""

import numpy as np
import pytest

from avpvar.errors import DomainError, NumericalError
from avpvar.kernels import (
    GaussianPosteriorSpec,
    SeededStream,
    draw_inverse_gamma,
    draw_inverse_gamma_vector,
    draw_mvn_from_precision,
    factor_spd,
    gaussian_posterior_moments,
    slice_sample_log_density,
    update_half_cauchy_scale,
)


def test_seeded_stream_is_deterministic():
    a = SeededStream(42).child(1, 3).generator.standard_normal(16)
    b = SeededStream(42).child(1, 3).generator.standard_normal(16)
    np.testing.assert_array_equal(a, b)


def test_seeded_stream_children_are_distinct():
    root = SeededStream(42)
    a = root.child(1).generator.standard_normal(16)
    b = root.child(2).generator.standard_normal(16)
    assert np.max(np.abs(a - b)) > 1e-3


def test_mvn_identity_precision_zero_noise():
    spec = GaussianPosteriorSpec(np.eye(2), np.array([1.0, 0.0]))
    draw = draw_mvn_from_precision(spec, SeededStream(0), noise=np.zeros(2))
    np.testing.assert_allclose(draw, [1.0, 0.0], atol=1e-12)


def test_mvn_diagonal_precision_zero_noise():
    spec = GaussianPosteriorSpec(np.diag([2.0, 1.0]), np.array([2.0, 0.0]))
    draw = draw_mvn_from_precision(spec, SeededStream(0), noise=np.zeros(2))
    np.testing.assert_allclose(draw, [1.0, 0.0], atol=1e-12)


def test_mvn_empirical_mean_matches_analytic():
    precision = np.array([[2.0, 0.6], [0.6, 1.5]])
    linear = np.array([1.0, -0.5])
    spec = GaussianPosteriorSpec(precision, linear)
    mean, cov = gaussian_posterior_moments(spec)
    gen = SeededStream(7).generator
    draws = np.array([draw_mvn_from_precision(spec, gen) for _ in range(100_000)])
    se = np.sqrt(np.diag(cov) / draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - mean) < 4.0 * se)
    np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.02)


def test_mvn_posterior_moments_solve_oracle():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((5, 5))
    precision = a @ a.T + 5.0 * np.eye(5)
    linear = rng.standard_normal(5)
    mean, cov = gaussian_posterior_moments(GaussianPosteriorSpec(precision, linear))
    np.testing.assert_allclose(mean, np.linalg.solve(precision, linear), atol=1e-8)
    np.testing.assert_allclose(cov, np.linalg.inv(precision), atol=1e-8)


def test_factor_spd_recovers_after_jitter():
    # Rank-deficient matrix: plain Cholesky fails, the ladder must rescue it.
    v = np.array([[1.0, 1.0], [1.0, 1.0]])
    chol, jitter = factor_spd(v)
    assert jitter > 0.0
    np.testing.assert_allclose(chol @ chol.T, v, atol=1e-3)


def test_factor_spd_raises_with_diagnostics():
    with pytest.raises(NumericalError, match="dim="):
        factor_spd(np.array([[1.0, 0.0], [0.0, -5.0]]))


def test_inverse_gamma_mean():
    gen = SeededStream(11).generator
    draws = np.array([draw_inverse_gamma(3.0, 4.0, gen) for _ in range(100_000)])
    assert np.all(draws > 0.0)
    assert abs(draws.mean() - 2.0) < 0.05


def test_inverse_gamma_rejects_bad_parameters():
    gen = SeededStream(0).generator
    with pytest.raises(DomainError):
        draw_inverse_gamma(0.0, 1.0, gen)
    with pytest.raises(DomainError):
        draw_inverse_gamma(1.0, -1.0, gen)
    with pytest.raises(DomainError):
        draw_inverse_gamma_vector([1.0, 0.0], [1.0, 1.0], gen)


def test_inverse_gamma_vector_matches_scalar_distribution():
    gen = SeededStream(5).generator
    draws = draw_inverse_gamma_vector(np.full(50_000, 3.0), np.full(50_000, 4.0), gen)
    assert abs(draws.mean() - 2.0) < 0.06


def _half_cauchy_cdf(s):
    return 2.0 / np.pi * np.arctan(s)


def test_half_cauchy_update_recovers_prior():
    # With no conditioning terms the chain's stationary law is the
    # half-Cauchy prior itself. Thinned so the KS critical value (an iid
    # quantity) applies to near-independent draws.
    gen = SeededStream(19).generator
    scale_sq, aux = 1.0, 1.0
    kept = np.empty(10_000)
    thin = 5
    for i in range(kept.shape[0] * thin):
        scale_sq, aux = update_half_cauchy_scale(scale_sq, aux, 0.0, 0.0, gen)
        if i % thin == thin - 1:
            kept[i // thin] = np.sqrt(scale_sq)
    grid = np.sort(kept)
    empirical = np.arange(1, grid.shape[0] + 1) / grid.shape[0]
    ks = np.max(np.abs(empirical - _half_cauchy_cdf(grid)))
    # 1% critical value of the one-sample KS statistic.
    assert ks < 1.63 / np.sqrt(kept.shape[0])


def test_slice_sampler_targets_standard_normal():
    gen = SeededStream(23).generator
    log_density = lambda s: -0.5 * s * s
    x = 0.0
    draws = np.empty(20_000)
    for i in range(draws.shape[0]):
        x = slice_sample_log_density(log_density, x, gen)
        draws[i] = x
    assert abs(draws.mean()) < 0.03
    assert abs(draws.std() - 1.0) < 0.03
    for q, target in [(0.1, -1.2816), (0.9, 1.2816)]:
        assert abs(np.quantile(draws, q) - target) < 0.05
