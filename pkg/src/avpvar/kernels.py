"""Shared stochastic kernels: seeded streams, Gaussian and scale-family draws.

Every sampler in the package draws through these functions so that seeding,
jitter handling, and the half-Cauchy auxiliary scheme are identical everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg as sla

from .errors import DomainError, NumericalError

# Jitter ladder for nearly singular precision matrices: start at
# JITTER_START * mean(diag), escalate by x10 up to JITTER_MAX * mean(diag).
JITTER_START = 1e-10
JITTER_MAX = 1e-4

# Floor applied to prior variances before inversion (keeps horseshoe scales
# from collapsing the precision to inf).
VARIANCE_FLOOR = 1e-12


class SeededStream:
    """Deterministic random stream keyed by (seed, stream path).

    Wraps a counter-based Philox generator seeded through SeedSequence so that
    distinct (seed, path) pairs give independent streams and identical pairs
    give bit-identical sequences regardless of process or schedule.
    """

    def __init__(self, seed: int, path: tuple = ()):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self.generator = np.random.Generator(np.random.Philox(ss))

    def child(self, *path) -> "SeededStream":
        """Derive an independent stream; same arguments give the same stream."""
        return SeededStream(self.seed, self.path + tuple(int(p) for p in path))

    def __repr__(self):
        return f"SeededStream(seed={self.seed}, path={self.path})"


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, SeededStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected SeededStream or numpy Generator, got {type(rng)!r}")


@dataclass
class GaussianPosteriorSpec:
    """Precision-form Gaussian: N(mean, P^-1) with mean = P^-1 linear."""

    precision: np.ndarray
    linear: np.ndarray


def factor_spd(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Applies the escalating jitter ladder when the factorization fails; returns
    (lower factor, jitter actually added). Raises NumericalError with
    diagnostics once the ladder is exhausted.
    """
    try:
        return sla.cholesky(matrix, lower=True, check_finite=False), 0.0
    except (sla.LinAlgError, ValueError):
        pass
    diag = np.diag(matrix)
    scale = float(np.mean(diag)) if diag.size else 1.0
    if not np.isfinite(scale) or scale <= 0.0:
        scale = 1.0
    jitter = JITTER_START * scale
    eye = np.eye(matrix.shape[0])
    while jitter <= JITTER_MAX * scale:
        try:
            return sla.cholesky(matrix + jitter * eye, lower=True, check_finite=False), jitter
        except (sla.LinAlgError, ValueError):
            jitter *= 10.0
    raise NumericalError(
        "Cholesky failed after jitter ladder: "
        f"dim={matrix.shape[0]}, mean diag={scale:.3e}, "
        f"min diag={np.min(diag):.3e}, max diag={np.max(diag):.3e}, "
        f"max jitter tried={JITTER_MAX * scale:.3e}"
    )


def draw_mvn_from_precision(
    spec: GaussianPosteriorSpec,
    rng,
    noise: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Draw from N(P^-1 b, P^-1) given precision P and linear term b.

    Uses one Cholesky factorization: mean from two triangular solves, draw as
    mean + L^-T z. Passing `noise` (standard normals) makes the draw
    deterministic; zeros return the exact posterior mean.
    """
    gen = _as_generator(rng)
    chol, _ = factor_spd(spec.precision)
    mean = sla.cho_solve((chol, True), spec.linear, check_finite=False)
    if noise is None:
        noise = gen.standard_normal(mean.shape[0])
    shift = sla.solve_triangular(chol, noise, trans="T", lower=True, check_finite=False)
    return mean + shift


def gaussian_posterior_moments(spec: GaussianPosteriorSpec) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance implied by a precision-form spec (for oracle tests)."""
    chol, _ = factor_spd(spec.precision)
    mean = sla.cho_solve((chol, True), spec.linear, check_finite=False)
    cov = sla.cho_solve((chol, True), np.eye(spec.precision.shape[0]), check_finite=False)
    return mean, cov


def draw_inverse_gamma(shape: float, scale: float, rng) -> float:
    """One draw from IG(shape, scale), density ~ x^-(shape+1) exp(-scale/x)."""
    if shape <= 0.0 or scale <= 0.0:
        raise DomainError(f"inverse-gamma needs positive parameters, got ({shape}, {scale})")
    gen = _as_generator(rng)
    g = gen.gamma(shape, 1.0 / scale)
    return 1.0 / g


def draw_inverse_gamma_vector(shape, scale, rng) -> np.ndarray:
    """Vectorized IG draws; shape and scale broadcast elementwise."""
    shape = np.asarray(shape, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if np.any(shape <= 0.0) or np.any(scale <= 0.0):
        raise DomainError("inverse-gamma needs positive parameters")
    gen = _as_generator(rng)
    g = gen.gamma(shape, 1.0 / scale)
    return 1.0 / g


def slice_sample_log_density(
    log_density,
    start: float,
    rng,
    width: float = 2.0,
    max_steps: int = 50,
) -> float:
    """One stepping-out slice move for a univariate log density.

    Expands an interval of size `width` around `start` until both edges fall
    below the slice level (at most `max_steps` expansions split between the
    sides), then shrinks toward `start` until a point on the slice is hit.
    Returns the new point; returns `start` unchanged if shrinkage stalls.
    """
    gen = _as_generator(rng)
    level = log_density(start) + np.log(gen.uniform())
    if not np.isfinite(level):
        raise NumericalError(f"slice level not finite at start={start!r}")
    left = start - width * gen.uniform()
    right = left + width
    steps_left = int(gen.integers(0, max_steps))
    steps_right = max_steps - 1 - steps_left
    while steps_left > 0 and log_density(left) > level:
        left -= width
        steps_left -= 1
    while steps_right > 0 and log_density(right) > level:
        right += width
        steps_right -= 1
    for _ in range(1000):
        proposal = gen.uniform(left, right)
        if log_density(proposal) > level:
            return proposal
        if proposal < start:
            left = proposal
        else:
            right = proposal
    return start


def update_half_cauchy_scale(
    scale_sq: float,
    aux: float,
    count: float,
    weighted_ssq: float,
    rng,
) -> tuple[float, float]:
    """One Gibbs update of s^2 with prior s ~ Cauchy+(0,1).

    The conditioning context is `count` Gaussian terms with total weighted sum
    of squares `weighted_ssq`, i.e. terms x_l ~ N(0, s^2 g_l^2) contribute
    count = #terms and weighted_ssq = sum x_l^2 / g_l^2. Uses the exact
    inverse-gamma auxiliary representation of the half-Cauchy:
        s^2 | aux, x ~ IG((count + 1)/2, 1/aux + weighted_ssq / 2)
        aux | s^2   ~ IG(1, 1 + 1/s^2)
    Returns the updated (scale_sq, aux).
    """
    new_scale_sq = draw_inverse_gamma((count + 1.0) / 2.0, 1.0 / aux + 0.5 * weighted_ssq, rng)
    new_aux = draw_inverse_gamma(1.0, 1.0 + 1.0 / new_scale_sq, rng)
    return new_scale_sq, new_aux
