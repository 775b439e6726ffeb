"""Horseshoe state updates: conditionals, prior recovery, shrinkage behavior."""

import numpy as np
import pytest

from avpvar import horseshoe
from avpvar.kernels import GaussianPosteriorSpec, SeededStream, draw_mvn_from_precision


def test_prior_variances_examples():
    state = horseshoe.HorseshoeState.unit(2)
    np.testing.assert_allclose(horseshoe.prior_variances(state), [1.0, 1.0])
    state.local_sq = np.array([4.0, 9.0])
    state.global_sq = 0.25
    np.testing.assert_allclose(horseshoe.prior_variances(state), [1.0, 2.25])


def test_prior_variances_floored():
    state = horseshoe.HorseshoeState.unit(3)
    state.local_sq = np.array([1e-30, 1.0, 1e-30])
    state.global_sq = 1e-30
    assert np.all(horseshoe.prior_variances(state) > 0.0)


def test_update_checks_length_and_keeps_positivity():
    state = horseshoe.HorseshoeState.unit(3)
    gen = SeededStream(1).generator
    with pytest.raises(ValueError):
        horseshoe.update(state, np.zeros(4), gen)
    for _ in range(50):
        horseshoe.update(state, np.array([0.0, 0.5, -3.0]), gen)
        assert np.all(state.local_sq > 0.0) and state.global_sq > 0.0
        assert np.all(np.isfinite(state.local_sq)) and np.isfinite(state.global_sq)


def test_update_locals_leaves_global_untouched():
    state = horseshoe.HorseshoeState.unit(4)
    state.global_sq = 0.37
    gen = SeededStream(2).generator
    before_aux = state.global_aux
    horseshoe.update_locals(state, np.array([0.1, -0.2, 3.0, 0.0]), gen)
    assert state.global_sq == 0.37
    assert state.global_aux == before_aux


def test_shrinkage_orders_by_coefficient_magnitude():
    gen = SeededStream(3).generator
    state = horseshoe.HorseshoeState.unit(2)
    coeffs = np.array([0.0, 10.0])
    small, large = [], []
    for _ in range(1_000):
        horseshoe.update(state, coeffs, gen)
        var = horseshoe.prior_variances(state)
        small.append(var[0])
        large.append(var[1])
    assert np.median(small) < np.median(large)


def _prior_quantiles(n, gen):
    # Direct simulation of the marginal prior b = psi * tau * z.
    psi = np.abs(gen.standard_cauchy(n))
    tau = np.abs(gen.standard_cauchy(n))
    return psi * tau * gen.standard_normal(n)


def _quantile_gap(a, b, levels=(0.10, 0.25, 0.50, 0.75, 0.90)):
    # Relative gap: the outer quantiles of the horseshoe marginal are O(4),
    # so an absolute tolerance would be dominated by them alone.
    return max(
        abs(np.quantile(a, q) - np.quantile(b, q)) / (0.1 + abs(np.quantile(b, q)))
        for q in levels
    )


def test_full_cycle_recovers_marginal_prior():
    # No data: alternate b | scales and scales | b; the b-marginal must match
    # the heavy-tailed horseshoe prior simulated directly.
    gen = SeededStream(4).generator
    state = horseshoe.HorseshoeState.unit(1)
    b = np.zeros(1)
    draws = np.empty(40_000)
    for i in range(draws.shape[0]):
        b[0] = np.sqrt(horseshoe.prior_variances(state)[0]) * gen.standard_normal()
        horseshoe.update(state, b, gen)
        draws[i] = b[0]
    direct = _prior_quantiles(200_000, SeededStream(5).generator)
    assert _quantile_gap(draws, direct) < 0.08


def test_collapsed_cycle_recovers_marginal_prior():
    # Same invariant through the collapsed global move: with no evidence
    # (ev = v = 0) the slice targets the half-Cauchy prior, and the cycle's
    # stationary b-marginal is again the horseshoe prior.
    gen = SeededStream(6).generator
    state = horseshoe.HorseshoeState.unit(1)
    empty = np.zeros(0)
    b = np.zeros(1)
    draws = np.empty(40_000)
    for i in range(draws.shape[0]):
        b[0] = np.sqrt(horseshoe.prior_variances(state)[0]) * gen.standard_normal()
        horseshoe.update_locals(state, b, gen)
        horseshoe.update_global_collapsed(state, empty, empty, gen)
        draws[i] = b[0]
    direct = _prior_quantiles(200_000, SeededStream(7).generator)
    assert _quantile_gap(draws, direct) < 0.08


def test_collapsed_global_matches_grid_posterior():
    # Fixed evidence summary: the slice chain's stationary quantiles must
    # match the analytic posterior computed on a dense grid.
    rng = np.random.default_rng(8)
    ev = rng.uniform(0.5, 50.0, 12)
    proj = rng.standard_normal(12) * np.sqrt(ev * 3.0)
    state = horseshoe.HorseshoeState.unit(12)
    gen = SeededStream(9).generator
    draws = np.empty(20_000)
    for i in range(draws.shape[0]):
        horseshoe.update_global_collapsed(state, ev, proj, gen)
        draws[i] = np.log(state.global_sq)

    grid = np.linspace(-20.0, 12.0, 3201)
    tau_sq = np.exp(grid)
    logp = (
        0.5 * np.sum(proj**2 * tau_sq[:, None] / (1.0 + tau_sq[:, None] * ev), axis=1)
        - 0.5 * np.sum(np.log1p(tau_sq[:, None] * ev), axis=1)
        + 0.5 * grid
        - np.log1p(tau_sq)
    )
    weights = np.exp(logp - logp.max())
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    for q in (0.1, 0.25, 0.5, 0.75, 0.9):
        grid_q = grid[np.searchsorted(cdf, q)]
        assert abs(np.quantile(draws, q) - grid_q) < 0.05


def test_sparse_regression_separates_signals_from_nulls():
    # 2 of 50 coefficients nonzero at signal-to-noise 5: null posterior means
    # must average below 20% of the signal posterior means.
    gen = SeededStream(10).generator
    n, p = 100, 50
    x = gen.standard_normal((n, p))
    beta = np.zeros(p)
    beta[7], beta[31] = 5.0, -5.0
    y = x @ beta + gen.standard_normal(n)

    state = horseshoe.HorseshoeState.unit(p)
    xtx = x.T @ x
    xty = x.T @ y
    keep = []
    for it in range(600):
        precision = xtx.copy()
        precision[np.diag_indices_from(precision)] += 1.0 / horseshoe.prior_variances(state)
        b = draw_mvn_from_precision(GaussianPosteriorSpec(precision, xty), gen)
        horseshoe.update(state, b, gen)
        if it >= 100:
            keep.append(b)
    post_mean = np.abs(np.mean(keep, axis=0))
    signal = 0.5 * (post_mean[7] + post_mean[31])
    nulls = np.delete(post_mean, [7, 31])
    assert nulls.mean() < 0.2 * signal


def test_grouped_update_positivity():
    state = horseshoe.HorseshoeState.unit(3)
    gen = SeededStream(11).generator
    inc = gen.standard_normal((30, 3)) * [0.01, 0.1, 1.0]
    for _ in range(20):
        horseshoe.update_grouped(state, inc, gen)
        assert np.all(state.local_sq > 0.0) and state.global_sq > 0.0
    with pytest.raises(ValueError):
        horseshoe.update_grouped(state, np.zeros((5, 4)), gen)
