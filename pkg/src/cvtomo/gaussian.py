"""Joint Gaussian statistics of the measured quadratures and seeded sampling.

The measurement record is the triple (X^theta_b, X^phi_a1, X^(phi+pi/2)_a2):
the tomography quadrature of the transmitted beam and the two orthogonal
dual-homodyne quadratures of the tapped beam. Everything downstream consumes
either the exact 3x3 covariance built here or Monte Carlo draws from it.

Beam-splitter conventions (real orthogonal mixing):
    tap:  X_b = sqrt(1-R) X_in + sqrt(R) X_u      (u = vacuum port)
          X_a = sqrt(R) X_in  - sqrt(1-R) X_u
    50/50 on a with vacuum port v:
          X_a1 = (X_a + X_v) / sqrt(2)
          X_a2 = (X_a - X_v) / sqrt(2)
Homodyne efficiency acts per measured channel as V -> eta V + (1 - eta),
cross terms scale by eta; dark noise adds on the diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .params import ExperimentParams

PSD_TOLERANCE = 1e-10

# analytic_weighted_moment caps: weighting polynomials up to total degree 8
# in (x_a1, x_a2), tomography power up to 6
MAX_RADIAL_DEGREE = 4
MAX_TOMOGRAPHY_POWER = 6


def input_covariance(params: ExperimentParams, alpha: float, beta: float) -> float:
    """Symmetrized covariance of the input quadratures X^alpha and X^beta."""
    v_s = params.squeezed_variance
    v_a = params.antisqueezed_variance
    return v_s * math.cos(alpha) * math.cos(beta) + v_a * math.sin(alpha) * math.sin(beta)


def build_covariance(params: ExperimentParams, theta: float) -> np.ndarray:
    """3x3 covariance of (X^theta_b, X^phi_a1, X^(phi+pi/2)_a2) in shot-noise units.

    Composes the squeezed input, the tap beam splitter, the balanced dual-homodyne
    splitter (one unit of vacuum entering its empty port), the per-channel homodyne
    efficiency, and additive dark noise.
    """
    r = params.tap_reflectivity
    t = 1.0 - r
    eta = params.homodyne_efficiency
    dark = params.dark_noise_variance
    phi = params.conditioning_phase
    phi_perp = phi + math.pi / 2.0

    def c_in(a, b):
        return input_covariance(params, a, b)

    var_b = t * c_in(theta, theta) + r
    var_a1 = (r * c_in(phi, phi) + t + 1.0) / 2.0
    var_a2 = (r * c_in(phi_perp, phi_perp) + t + 1.0) / 2.0
    srt = math.sqrt(r * t / 2.0)
    cov_b_a1 = srt * (c_in(theta, phi) - math.cos(theta - phi))
    cov_b_a2 = srt * (c_in(theta, phi_perp) - math.cos(theta - phi_perp))
    cov_a1_a2 = r * c_in(phi, phi_perp) / 2.0

    cov = np.array(
        [
            [var_b, cov_b_a1, cov_b_a2],
            [cov_b_a1, var_a1, cov_a1_a2],
            [cov_b_a2, cov_a1_a2, var_a2],
        ]
    )
    # detection: loss on each measured channel, then additive dark noise
    cov *= eta
    cov[np.diag_indices(3)] += (1.0 - eta) + dark
    return cov


def presplit_covariance(params: ExperimentParams, theta: float) -> np.ndarray:
    """3x3 covariance of (X^theta_b, X^phi_a, X^(phi+pi/2)_a), vacuum port removed.

    The fictitious lossless record in which both conjugate quadratures of mode a
    are read out directly. Only meaningful as the reference side of the
    vacuum-port cancellation identity; it is not a realizable measurement.
    """
    r = params.tap_reflectivity
    t = 1.0 - r
    phi = params.conditioning_phase
    phi_perp = phi + math.pi / 2.0

    def c_in(a, b):
        return input_covariance(params, a, b)

    var_b = t * c_in(theta, theta) + r
    var_a_plus = r * c_in(phi, phi) + t
    var_a_minus = r * c_in(phi_perp, phi_perp) + t
    srt = math.sqrt(r * t)
    cov_b_plus = srt * (c_in(theta, phi) - math.cos(theta - phi))
    cov_b_minus = srt * (c_in(theta, phi_perp) - math.cos(theta - phi_perp))
    cov_pm = r * c_in(phi, phi_perp)

    return np.array(
        [
            [var_b, cov_b_plus, cov_b_minus],
            [cov_b_plus, var_a_plus, cov_pm],
            [cov_b_minus, cov_pm, var_a_minus],
        ]
    )


def dual_homodyne_covariance(v_plus: float, v_minus: float) -> np.ndarray:
    """2x2 covariance of the dual-homodyne record of a state measured directly.

    The state has quadrature variances (v_plus, v_minus) along axis-aligned
    quadratures; splitting on the balanced beam splitter adds one vacuum unit.
    """
    return np.diag([(v_plus + 1.0) / 2.0, (v_minus + 1.0) / 2.0])


def psd_factor(cov: np.ndarray, tol: float = PSD_TOLERANCE) -> np.ndarray:
    """Symmetric factor L with L @ L.T = cov; rejects non-PSD input beyond tol."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"covariance must be square, got shape {cov.shape}")
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise ValueError("covariance must be symmetric")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals.min() < -tol:
        raise ValueError(
            f"covariance is not positive semidefinite: min eigenvalue {eigvals.min():.3e}"
        )
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


@dataclass(frozen=True)
class SampleBatch:
    """A block of (x_b, x_a1, x_a2) triples drawn at one tomography angle."""

    theta: float
    triples: np.ndarray  # shape (n, 3), float64
    seed: int
    shard: int

    def __post_init__(self):
        if self.triples.ndim != 2 or self.triples.shape[1] != 3:
            raise ValueError(f"triples must have shape (n, 3), got {self.triples.shape}")


def shard_rng(seed: int, shard: int) -> np.random.Generator:
    """Deterministic per-shard generator; stream identity is (seed, shard)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(shard,)))


def sample_batch(
    cov: np.ndarray, n: int, seed: int, shard: int, theta: float = 0.0
) -> SampleBatch:
    """Draw n zero-mean Gaussian triples with the given covariance.

    Reproducible: identical (seed, shard) always yields the identical byte
    sequence, independent of where or in which order shards are generated.
    """
    factor = psd_factor(cov)
    rng = shard_rng(seed, shard)
    z = rng.standard_normal((n, cov.shape[0]))
    return SampleBatch(theta=theta, triples=z @ factor.T, seed=seed, shard=shard)


# ---------------------------------------------------------------------------
# Isserlis (Wick) moments


def gaussian_moment(cov: np.ndarray, exponents) -> float:
    """E[prod_i x_i^k_i] for a zero-mean Gaussian via the Wick pairing recursion."""
    cov = np.asarray(cov, dtype=float)
    exps = tuple(int(k) for k in exponents)
    if len(exps) != cov.shape[0]:
        raise ValueError("one exponent per variable is required")
    if any(k < 0 for k in exps):
        raise ValueError("exponents must be nonnegative")
    if sum(exps) % 2 == 1:
        return 0.0

    cache: dict[tuple[int, ...], float] = {}

    def rec(k: tuple[int, ...]) -> float:
        total = sum(k)
        if total == 0:
            return 1.0
        hit = cache.get(k)
        if hit is not None:
            return hit
        i = next(idx for idx, v in enumerate(k) if v > 0)
        reduced = list(k)
        reduced[i] -= 1
        acc = 0.0
        for j, kj in enumerate(reduced):
            if kj == 0:
                continue
            lower = list(reduced)
            lower[j] -= 1
            acc += cov[i, j] * kj * rec(tuple(lower))
        cache[k] = acc
        return acc

    return rec(exps)


@lru_cache(maxsize=None)
def _radial_expansion(m: int) -> tuple[tuple[int, int, float], ...]:
    """Monomials of W^m with W = (x1^2 + x2^2)/2: (power of x1, power of x2, coeff)."""
    return tuple(
        (2 * i, 2 * (m - i), math.comb(m, i) / 2.0**m) for i in range(m + 1)
    )


def analytic_weighted_moment(cov: np.ndarray, weight_poly, g: int = 0) -> float:
    """Exact E[Q(x_a1, x_a2) * x_b^g] under the Gaussian law of cov.

    cov orders the variables as (x_b, x_a1, x_a2). Q is a WeightPolynomial (any
    object exposing radial coefficients c_m over W = (x_a1^2 + x_a2^2)/2).
    Sampling-free cross-check of the weighted estimators via the Isserlis
    expansion.
    """
    coeffs = [float(c) for c in weight_poly.radial_coefficients]
    if len(coeffs) - 1 > MAX_RADIAL_DEGREE:
        raise ValueError(
            f"weighting polynomial degree {len(coeffs) - 1} in W exceeds the "
            f"implemented expansion (max {MAX_RADIAL_DEGREE})"
        )
    if not 0 <= g <= MAX_TOMOGRAPHY_POWER:
        raise ValueError(f"tomography power g={g} outside the implemented range")
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (3, 3):
        raise ValueError(f"expected the 3x3 measurement covariance, got {cov.shape}")

    total = 0.0
    for m, c in enumerate(coeffs):
        if c == 0.0:
            continue
        for p1, p2, binom in _radial_expansion(m):
            total += c * binom * gaussian_moment(cov, (g, p1, p2))
    return total
