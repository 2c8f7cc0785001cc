"""Exact truncated Fock-basis reference states, channels and observables.

Everything the Monte Carlo pipeline estimates can be computed exactly for the
states of interest by working in a truncated number basis: the lossy squeezed
source, the conditioning tap, number-resolved heralding, photon-number
weighting, quadrature marginals and Wigner functions. This module is the
oracle the sampling pipeline is validated against.

Conventions (matching the Gaussian engine):
  * X^theta = exp(-i theta) a + exp(i theta) a^dag, vacuum variance 1;
  * the squeezing axis is theta = 0, i.e. Var(X^0) = V_s <= 1;
  * Wigner functions carry the vacuum-peak-1/(2 pi) normalization, with
    marginals recovered as line integrals over phase space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre

from .conditioning import NumberPolynomial

DEFAULT_N_MAX = 24
TRACE_TOL = 1e-10
HERALD_EPS = 1e-12


# ---------------------------------------------------------------------------
# states


def vacuum_state(n_max: int = DEFAULT_N_MAX) -> np.ndarray:
    rho = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def fock_state(n: int, n_max: int = DEFAULT_N_MAX) -> np.ndarray:
    if not 0 <= n <= n_max:
        raise ValueError(f"Fock index {n} outside the truncation 0..{n_max}")
    rho = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    rho[n, n] = 1.0
    return rho


def thermal_state(nbar: float, n_max: int = DEFAULT_N_MAX) -> np.ndarray:
    if nbar < 0:
        raise ValueError("mean photon number must be nonnegative")
    ns = np.arange(n_max + 1)
    populations = nbar**ns / (1.0 + nbar) ** (ns + 1)
    return np.diag(populations).astype(complex)


def pure_squeezed_vacuum(r: float, n_max: int = DEFAULT_N_MAX) -> np.ndarray:
    """Pure squeezed vacuum with Var(X^0) = exp(-2r); amplitudes on even n only.

    c_{2m} = (-tanh r)^m sqrt((2m)!) / (2^m m! sqrt(cosh r)). The minus sign
    places the squeezed quadrature at theta = 0 under our conventions.
    """
    amplitudes = np.zeros(n_max + 1)
    lam = -math.tanh(r)
    for m in range(0, n_max // 2 + 1):
        amplitudes[2 * m] = (
            lam**m * math.sqrt(math.factorial(2 * m)) / (2**m * math.factorial(m))
        )
    amplitudes /= math.sqrt(math.cosh(r))
    rho = np.outer(amplitudes, amplitudes).astype(complex)
    return rho / np.trace(rho).real


def squeezed_vacuum_parameters(v_s: float, v_a: float) -> tuple[float, float]:
    """Solve eta e^{-2r} + (1-eta) = V_s, eta e^{2r} + (1-eta) = V_a for (r, eta)."""
    if v_s * v_a < 1.0 - 1e-12:
        raise ValueError(f"V_s*V_a = {v_s * v_a:.5g} < 1 is unphysical")
    if not v_s <= 1.0 <= v_a:
        raise ValueError(f"need V_s <= 1 <= V_a, got ({v_s:.5g}, {v_a:.5g})")
    if v_s == v_a:
        return 0.0, 1.0
    tanh_r = (v_a + v_s - 2.0) / (v_a - v_s)
    if not 0.0 <= tanh_r < 1.0:
        raise ValueError(f"no (r, eta) solution for V_s={v_s:.5g}, V_a={v_a:.5g}")
    r = math.atanh(tanh_r)
    if r == 0.0:
        raise ValueError(f"degenerate solve: V_s={v_s:.5g}, V_a={v_a:.5g} imply r = 0")
    eta = (v_a - v_s) / (2.0 * math.sinh(2.0 * r))
    if not 0.0 < eta <= 1.0 + 1e-12:
        raise ValueError(f"solved transmissivity {eta:.5g} outside (0, 1]")
    return r, min(eta, 1.0)


def squeezed_vacuum(v_s: float, v_a: float, n_max: int = DEFAULT_N_MAX) -> np.ndarray:
    """Lossy squeezed vacuum with measured variances (V_s, V_a): pure squeezing
    followed by a loss channel accounting for the source impurity."""
    r, eta = squeezed_vacuum_parameters(v_s, v_a)
    rho = pure_squeezed_vacuum(r, n_max)
    return loss_channel(rho, eta)


# ---------------------------------------------------------------------------
# channels


def loss_channel(rho: np.ndarray, eta: float) -> np.ndarray:
    """Bosonic pure-loss channel of transmissivity eta (Kraus sum, trace preserving)."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"transmissivity must lie in (0, 1], got {eta}")
    if eta == 1.0:
        return rho.copy()
    dim = rho.shape[0]
    ns = np.arange(dim)
    out = np.zeros_like(rho)
    for k in range(dim):
        amp = np.zeros(dim)
        n_from = ns[k:]
        amp[k:] = np.sqrt(
            [math.comb(int(n), k) for n in n_from]
        ) * np.sqrt(eta ** (n_from - k) * (1.0 - eta) ** k)
        # A_k maps |n> -> amp[n] |n-k>: row-shifted diagonal
        a_k = np.zeros((dim, dim))
        a_k[ns[: dim - k], ns[: dim - k] + k] = amp[k:]
        out += a_k @ rho @ a_k.conj().T
    return out


def _tap_isometry(r: float, dim: int) -> np.ndarray:
    """Matrix V with V[(m_b, j_a), m] the amplitude of |m, vac> -> |m-j>_b |j>_a
    under the tap beam splitter of reflectivity r (vacuum in the second port)."""
    t = 1.0 - r
    v = np.zeros((dim * dim, dim))
    for m in range(dim):
        for j in range(m + 1):
            amp = math.sqrt(math.comb(m, j)) * math.sqrt(t ** (m - j) * r**j)
            v[(m - j) * dim + j, m] = amp
    return v


def tap_two_mode(rho_in: np.ndarray, r: float) -> np.ndarray:
    """Joint state of modes (b, a) after the tap beam splitter; index (m_b*dim + m_a)."""
    if not 0.0 < r < 1.0:
        raise ValueError(f"tap reflectivity must lie strictly in (0, 1), got {r}")
    dim = rho_in.shape[0]
    v = _tap_isometry(r, dim)
    return v @ rho_in @ v.conj().T


def apply_loss_mode(joint: np.ndarray, eta: float, mode: int) -> np.ndarray:
    """Loss channel on one mode (0 = b, 1 = a) of a two-mode state."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"transmissivity must lie in (0, 1], got {eta}")
    if eta == 1.0:
        return joint.copy()
    dim = int(round(math.sqrt(joint.shape[0])))
    tensor = joint.reshape(dim, dim, dim, dim)  # [m_b, m_a, n_b, n_a]
    ns = np.arange(dim)
    out = np.zeros_like(tensor)
    for k in range(dim):
        amp = np.zeros(dim)
        n_from = ns[k:]
        amp[k:] = np.sqrt(
            [math.comb(int(n), k) for n in n_from]
        ) * np.sqrt(eta ** (n_from - k) * (1.0 - eta) ** k)
        a_k = np.zeros((dim, dim))
        a_k[ns[: dim - k], ns[: dim - k] + k] = amp[k:]
        if mode == 0:
            out += np.einsum("im,manb,jn->ianb", a_k, tensor, a_k, optimize=True)
        elif mode == 1:
            out += np.einsum("im,bman,jn->bian", a_k, tensor, a_k, optimize=True)
        else:
            raise ValueError("mode must be 0 (b) or 1 (a)")
    return out.reshape(dim * dim, dim * dim)


def herald_family(joint: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """All conditional states of mode b given a number outcome on mode a.

    Returns (probabilities p_k, normalized states rho_b^(k)); entries with
    p_k below the herald threshold carry a zero matrix.
    """
    dim = int(round(math.sqrt(joint.shape[0])))
    tensor = joint.reshape(dim, dim, dim, dim)
    probs = np.zeros(dim)
    states = []
    for k in range(dim):
        block = tensor[:, k, :, k]
        p = float(np.trace(block).real)
        probs[k] = p
        states.append(block / p if p > HERALD_EPS else np.zeros_like(block))
    return probs, states


def tap_and_herald(
    rho_in: np.ndarray, r: float, k: int
) -> tuple[np.ndarray, float]:
    """Conditional state of mode b given exactly k photons tapped into mode a."""
    joint = tap_two_mode(rho_in, r)
    dim = rho_in.shape[0]
    if not 0 <= k <= dim - 1:
        raise ValueError(f"herald outcome {k} outside the truncation")
    tensor = joint.reshape(dim, dim, dim, dim)
    block = tensor[:, k, :, k]
    p = float(np.trace(block).real)
    if p < HERALD_EPS:
        raise ValueError(f"herald outcome n_a={k} has vanishing probability {p:.3e}")
    return block / p, p


# ---------------------------------------------------------------------------
# observables


def mean_photon_number(rho: np.ndarray) -> float:
    return float(np.sum(np.diag(rho).real * np.arange(rho.shape[0])))


def expect_number_polynomial(rho: np.ndarray, p: NumberPolynomial) -> float:
    """<P(n)> from the populations."""
    ns = np.arange(rho.shape[0])
    return float(np.sum(np.diag(rho).real * p(ns)))


def heterodyne_moments(rho: np.ndarray, m_max: int) -> list[float]:
    """Shifted-factorial moments <prod_{j=1..m}(n+j)> for m = 0..m_max.

    These are the exact targets of the Monte Carlo radial moments E[W^m]
    measured by ideal dual homodyne.
    """
    if m_max > 6:
        raise ValueError("moments implemented up to m = 6")
    ns = np.arange(rho.shape[0], dtype=float)
    pops = np.diag(rho).real
    out = []
    for m in range(m_max + 1):
        factors = np.ones_like(ns)
        for j in range(1, m + 1):
            factors *= ns + j
        out.append(float(np.sum(pops * factors)))
    return out


def quadrature_wavefunctions(n_max: int, x: np.ndarray) -> np.ndarray:
    """psi_n(x) for n = 0..n_max under Var_vac(X) = 1; shape (n_max+1, len(x)).

    Uses the normalized Hermite-function recurrence, stable to n ~ hundreds.
    """
    x = np.asarray(x, dtype=float)
    u = x / math.sqrt(2.0)
    psi = np.zeros((n_max + 1, x.size))
    psi[0] = (2.0 * math.pi) ** (-0.25) * np.exp(-(x**2) / 4.0)
    if n_max >= 1:
        psi[1] = math.sqrt(2.0) * u * psi[0]
    for n in range(1, n_max):
        psi[n + 1] = math.sqrt(2.0 / (n + 1)) * u * psi[n] - math.sqrt(n / (n + 1)) * psi[n - 1]
    return psi


def marginal_pdf(rho: np.ndarray, theta: float, x: np.ndarray) -> np.ndarray:
    """Exact probability density of X^theta for the state rho on the points x."""
    n_max = rho.shape[0] - 1
    psi = quadrature_wavefunctions(n_max, x)
    ns = np.arange(n_max + 1)
    phases = np.exp(1j * theta * (ns[:, None] - ns[None, :]))
    density = np.einsum("mn,mx,nx->x", rho * phases, psi, psi, optimize=True)
    return density.real


def gaussian_convolve(density: np.ndarray, dx: float, noise_variance: float) -> np.ndarray:
    """Convolve a sampled density with a zero-mean Gaussian (additive dark noise)."""
    if noise_variance <= 0.0:
        return density.copy()
    sigma = math.sqrt(noise_variance)
    half = max(int(math.ceil(6.0 * sigma / dx)), 1)
    u = np.arange(-half, half + 1) * dx
    kernel = np.exp(-(u**2) / (2.0 * noise_variance))
    kernel /= kernel.sum()
    return np.convolve(density, kernel, mode="same")


def weighted_conditional_marginal(
    rho_in: np.ndarray,
    r: float,
    p: NumberPolynomial,
    theta: float,
    x: np.ndarray,
    eta_a: float = 1.0,
    eta_b: float = 1.0,
    dark_b: float = 0.0,
) -> np.ndarray:
    """Exact law estimated by the P-weighted histogram of X^theta_b.

        pi(x) = sum_n P(n) p_n pi_{b|n}(x) / sum_n P(n) p_n

    including every higher-order contamination the polynomial lets through.
    eta_a / eta_b model detection loss on the conditioning and tomography
    channels; dark_b is additive Gaussian noise on the tomography quadrature.
    Dark noise on the conditioning channels is folded into P by the caller
    (see conditioning.dark_adjusted_number_polynomial).
    """
    joint = tap_two_mode(rho_in, r)
    if eta_a < 1.0:
        joint = apply_loss_mode(joint, eta_a, mode=1)
    probs, states = herald_family(joint)
    ns = np.arange(probs.size)
    weights = p(ns) * probs
    denominator = float(weights.sum())
    if abs(denominator) < HERALD_EPS:
        raise ValueError(
            f"weighted conditioning probability {denominator:.3e} vanishes"
        )
    x = np.asarray(x, dtype=float)
    density = np.zeros_like(x)
    for wn, rho_b in zip(weights, states):
        if wn == 0.0:
            continue
        state = loss_channel(rho_b, eta_b) if eta_b < 1.0 else rho_b
        density += wn * marginal_pdf(state, theta, x)
    density /= denominator
    if dark_b > 0.0:
        dx = float(x[1] - x[0])
        density = gaussian_convolve(density, dx, dark_b)
    return density


def weighted_state(
    rho_in: np.ndarray,
    r: float,
    p: NumberPolynomial,
    eta_a: float = 1.0,
    eta_b: float = 1.0,
) -> tuple[np.ndarray, float]:
    """The (quasi-)state sum_n P(n) p_n rho_b^(n) / sum_n P(n) p_n and its
    normalization sum_n P(n) p_n (the herald-probability analogue)."""
    joint = tap_two_mode(rho_in, r)
    if eta_a < 1.0:
        joint = apply_loss_mode(joint, eta_a, mode=1)
    probs, states = herald_family(joint)
    ns = np.arange(probs.size)
    weights = p(ns) * probs
    denominator = float(weights.sum())
    if abs(denominator) < HERALD_EPS:
        raise ValueError(f"weighted conditioning probability {denominator:.3e} vanishes")
    rho = sum(w * s for w, s in zip(weights, states) if w != 0.0) / denominator
    if eta_b < 1.0:
        rho = loss_channel(rho, eta_b)
    return rho, denominator


# ---------------------------------------------------------------------------
# Wigner functions


def wigner_exact(rho: np.ndarray, xs: np.ndarray, ps: np.ndarray) -> np.ndarray:
    """Exact Wigner function on the grid; W[i, j] = W(xs[i], ps[j]).

    Fock-basis kernels in the vacuum-peak-1/(2 pi) convention: with
    z = x + i p and y = |z|^2, for n >= m

        W_{|m><n|} = (1/2 pi) (-1)^m sqrt(m!/n!) z^(n-m) L_m^(n-m)(y) e^(-y/2).
    """
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    z = xs[:, None] + 1j * ps[None, :]
    y = np.abs(z) ** 2
    envelope = np.exp(-y / 2.0) / (2.0 * math.pi)
    n_max = rho.shape[0] - 1
    out = np.zeros(y.shape)
    for m in range(n_max + 1):
        for n in range(m, n_max + 1):
            coeff = rho[m, n]
            if coeff == 0.0:
                continue
            ratio = math.sqrt(math.factorial(m) / math.factorial(n))
            kernel = (-1.0) ** m * ratio * z ** (n - m) * eval_genlaguerre(m, n - m, y)
            term = coeff * kernel
            out += term.real if m == n else 2.0 * term.real
    return out * envelope


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class StateDiagnostics:
    trace: float
    min_eigenvalue: float
    tail_population: float

    @property
    def physical(self) -> bool:
        return (
            abs(self.trace - 1.0) <= TRACE_TOL
            and self.min_eigenvalue >= -TRACE_TOL
            and self.tail_population < 1e-6
        )


def diagnose(rho: np.ndarray) -> StateDiagnostics:
    """Trace, minimum eigenvalue and truncation-tail mass of a density matrix."""
    trace = float(np.trace(rho).real)
    eigenvalues = np.linalg.eigvalsh((rho + rho.conj().T) / 2.0)
    dim = rho.shape[0]
    tail_start = int(math.ceil(0.9 * (dim - 1)))
    tail = float(np.sum(np.diag(rho).real[tail_start:]))
    return StateDiagnostics(trace=trace, min_eigenvalue=float(eigenvalues.min()), tail_population=tail)
