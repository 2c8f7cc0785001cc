"""Photon-number weighting polynomials and weighted histogram estimation.

A conditioning polynomial P(n) vanishing at unwanted photon numbers selects a
target subtraction order k when used to weight tomographic samples. Because
the conditioning arm is read out by dual homodyne rather than a photon
counter, P must be translated into a polynomial Q(x_a1, x_a2) of the measured
quadratures with the same ensemble averages.

The translation rests on the moment identity of ideal dual homodyne:

    E[W^m] = <prod_{j=1..m} (n + j)>,   W = (x_a1^2 + x_a2^2)/2,

i.e. powers of the measured radial variable average to the shifted-factorial
moments B_m(n) = prod_{j=1..m}(n + j). Expanding P in the basis {B_m} is a
triangular (monic) change of basis, solved exactly in integer/rational
arithmetic; Q is then the same coefficients applied to powers of W.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

MAX_NUMBER_DEGREE = 6


def shifted_factorial_coefficients(m: int) -> list[int]:
    """Monomial coefficients (ascending) of B_m(n) = prod_{j=1..m} (n + j)."""
    poly = [1]
    for j in range(1, m + 1):
        shifted = [0] + poly
        scaled = [j * c for c in poly] + [0]
        poly = [a + b for a, b in zip(shifted, scaled)]
    return poly


@dataclass(frozen=True)
class NumberPolynomial:
    """P(n) in the monomial basis, with the target photon number it selects."""

    coefficients: tuple  # ascending powers of n; ints, Fractions or floats
    target_k: int
    label: str = ""

    def __post_init__(self):
        if len(self.coefficients) == 0:
            raise ValueError("a polynomial needs at least one coefficient")
        if self.degree > MAX_NUMBER_DEGREE:
            raise ValueError(
                f"degree {self.degree} exceeds the supported maximum {MAX_NUMBER_DEGREE}"
            )

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        out = np.zeros_like(n)
        for c in reversed(self.coefficients):
            out = out * n + float(c)
        return out if out.ndim else float(out)

    def evaluate_exact(self, n: int):
        acc = Fraction(0)
        for c in reversed(self.coefficients):
            acc = acc * n + Fraction(c)
        return acc

    @classmethod
    def from_roots(cls, roots, label: str = "") -> "NumberPolynomial":
        """P(n) = prod (n - root); target is the smallest positive non-root."""
        poly = [1]
        for root in roots:
            shifted = [0] + poly
            scaled = [-root * c for c in poly] + [0]
            poly = [a + b for a, b in zip(shifted, scaled)]
        k = 1
        while k in set(roots):
            k += 1
        if not label:
            label = "".join("n" if r == 0 else f"(n-{r})" for r in sorted(roots)) or "1"
        return cls(coefficients=tuple(poly), target_k=k, label=label)

    @classmethod
    def parse(cls, text: str) -> "NumberPolynomial":
        """Parse factored forms such as "n", "n(n-1)" or "n(n-2)(n-3)"; "1" is no conditioning."""
        compact = text.replace(" ", "").replace("*", "")
        if compact == "1":
            return cls(coefficients=(1,), target_k=0, label="1")
        roots = []
        rest = compact
        pattern = re.compile(r"^(n|\(n-(\d+)\))")
        while rest:
            m = pattern.match(rest)
            if not m:
                raise ValueError(f"cannot parse conditioning polynomial {text!r}")
            roots.append(0 if m.group(1) == "n" else int(m.group(2)))
            rest = rest[m.end():]
        return cls.from_roots(roots, label=compact)


PAPER_POLYNOMIALS = ("n", "n(n-1)", "n(n-2)(n-3)", "n(n-1)(n-3)")


@dataclass(frozen=True)
class WeightPolynomial:
    """Q(x_a1, x_a2) = sum_m c_m W^m with W = (x_a1^2 + x_a2^2)/2."""

    radial_coefficients: tuple  # c_0 .. c_d, exact Fractions/ints or floats
    source: NumberPolynomial | None = None

    @property
    def degree(self) -> int:
        return len(self.radial_coefficients) - 1

    def weight_of(self, x_a1, x_a2):
        """Evaluate Q at the dual-homodyne outcome(s); may be negative."""
        w = (np.asarray(x_a1, dtype=float) ** 2 + np.asarray(x_a2, dtype=float) ** 2) / 2.0
        out = np.zeros_like(w)
        for c in reversed(self.radial_coefficients):
            out = out * w + float(c)
        return out if out.ndim else float(out)

    def number_polynomial(self) -> NumberPolynomial:
        """The exact P(n) = sum_m c_m B_m(n) this weighting averages to."""
        degree = self.degree
        coeffs = [Fraction(0)] * (degree + 1)
        for m, c in enumerate(self.radial_coefficients):
            for power, b in enumerate(shifted_factorial_coefficients(m)):
                coeffs[power] += Fraction(c) * b
        target = self.source.target_k if self.source is not None else 0
        label = self.source.label if self.source is not None else ""
        return NumberPolynomial(coefficients=tuple(coeffs), target_k=target, label=label)


def build_q_polynomial(p: NumberPolynomial) -> WeightPolynomial:
    """Translate P(n) into the dual-homodyne weighting Q(x_a1, x_a2).

    Solves sum_m c_m B_m(n) = P(n) exactly by back-substitution on the
    triangular system (each B_m is monic of degree m), so the identity holds
    as a polynomial identity, not merely at sampled points.
    """
    residual = [Fraction(c) for c in p.coefficients]
    degree = p.degree
    c = [Fraction(0)] * (degree + 1)
    for m in range(degree, -1, -1):
        c[m] = residual[m]
        if c[m] == 0:
            continue
        for power, b in enumerate(shifted_factorial_coefficients(m)):
            residual[power] -= c[m] * b
    if any(r != 0 for r in residual):
        raise AssertionError("triangular solve failed to annihilate the residual")
    return WeightPolynomial(radial_coefficients=tuple(c), source=p)


def dark_adjusted_number_polynomial(
    q: WeightPolynomial, dark_variance: float
) -> NumberPolynomial:
    """The exact P~(n) that Q averages to when each dual-homodyne channel
    carries additive Gaussian dark noise of the given variance.

    Noise of variance D on both channels shifts the radial moments through
    E[(W + noise)^m | W] = m! D^m L_m(-W/D), a lower-triangular mixing of the
    W powers; the weighting therefore still averages to an exact polynomial
    in n, with D-dependent coefficients.
    """
    d = float(dark_variance)
    coeffs = [float(c) for c in q.radial_coefficients]
    degree = len(coeffs) - 1
    mixed = [0.0] * (degree + 1)
    for m, c in enumerate(coeffs):
        if c == 0.0:
            continue
        for k in range(m + 1):
            mixed[k] += c * (math.factorial(m) // math.factorial(k)) * math.comb(m, k) * d ** (m - k)
    p_coeffs = [0.0] * (degree + 1)
    for k, ck in enumerate(mixed):
        for power, b in enumerate(shifted_factorial_coefficients(k)):
            p_coeffs[power] += ck * b
    target = q.source.target_k if q.source is not None else 0
    label = q.source.label if q.source is not None else ""
    return NumberPolynomial(coefficients=tuple(p_coeffs), target_k=target, label=label)


# ---------------------------------------------------------------------------
# Weighted histograms


class ConditioningTooWeakError(ValueError):
    """Raised when the summed weights are too close to zero to normalize."""

    def __init__(self, sum_w: float, threshold: float):
        self.sum_w = sum_w
        self.threshold = threshold
        super().__init__(
            f"conditioning is ill-posed: |sum of weights| = {abs(sum_w):.3e} "
            f"<= threshold {threshold:.3e}"
        )


NORMALIZE_EPS_FACTOR = 1e-6


@dataclass
class WeightedHistogram:
    """Mergeable accumulator of Q-weighted tomography samples at one angle.

    Bins are uniform over [-x_max, x_max]; bin sums may be negative (the
    estimator is a quasi-probability). Out-of-range samples contribute to the
    weight and count totals (the normalization of the conditional marginal)
    but to no bin; non-finite samples or weights are rejected and tallied.
    """

    theta: float = 0.0
    x_max: float = 8.0
    n_bins: int = 401
    bin_weights: np.ndarray = field(default=None, repr=False)
    bin_counts: np.ndarray = field(default=None, repr=False)
    sum_w: float = 0.0
    sum_w2: float = 0.0
    count: int = 0
    overflow_count: int = 0
    reject_count: int = 0
    max_abs_weight: float = 0.0

    def __post_init__(self):
        if self.n_bins <= 0 or self.x_max <= 0:
            raise ValueError("histogram needs positive n_bins and x_max")
        if self.bin_weights is None:
            self.bin_weights = np.zeros(self.n_bins)
        if self.bin_counts is None:
            self.bin_counts = np.zeros(self.n_bins, dtype=np.int64)

    @property
    def bin_width(self) -> float:
        return 2.0 * self.x_max / self.n_bins

    @property
    def bin_edges(self) -> np.ndarray:
        return np.linspace(-self.x_max, self.x_max, self.n_bins + 1)

    @property
    def bin_centers(self) -> np.ndarray:
        return -self.x_max + (np.arange(self.n_bins) + 0.5) * self.bin_width

    def accumulate(self, x: float, w: float) -> "WeightedHistogram":
        self.accumulate_batch(np.array([x]), np.array([w]))
        return self

    def accumulate_batch(self, xs: np.ndarray, ws: np.ndarray) -> "WeightedHistogram":
        xs = np.asarray(xs, dtype=float)
        ws = np.asarray(ws, dtype=float)
        if xs.shape != ws.shape:
            raise ValueError("samples and weights must have matching shapes")
        finite = np.isfinite(xs) & np.isfinite(ws)
        self.reject_count += int(xs.size - finite.sum())
        xs, ws = xs[finite], ws[finite]
        if xs.size == 0:
            return self

        in_range = (xs >= -self.x_max) & (xs < self.x_max)
        idx = ((xs[in_range] + self.x_max) / self.bin_width).astype(np.int64)
        np.clip(idx, 0, self.n_bins - 1, out=idx)
        self.bin_weights += np.bincount(idx, weights=ws[in_range], minlength=self.n_bins)
        self.bin_counts += np.bincount(idx, minlength=self.n_bins)
        self.sum_w += float(ws.sum())
        self.sum_w2 += float((ws**2).sum())
        self.count += int(xs.size)
        self.overflow_count += int(xs.size - in_range.sum())
        if ws.size:
            self.max_abs_weight = max(self.max_abs_weight, float(np.abs(ws).max()))
        return self

    def merge(self, other: "WeightedHistogram") -> "WeightedHistogram":
        """Elementwise addition of two accumulators with identical geometry."""
        if (self.n_bins, self.x_max) != (other.n_bins, other.x_max):
            raise ValueError("cannot merge histograms with different bin geometry")
        if self.theta != other.theta:
            raise ValueError("cannot merge histograms taken at different angles")
        merged = WeightedHistogram(theta=self.theta, x_max=self.x_max, n_bins=self.n_bins)
        merged.bin_weights = self.bin_weights + other.bin_weights
        merged.bin_counts = self.bin_counts + other.bin_counts
        merged.sum_w = self.sum_w + other.sum_w
        merged.sum_w2 = self.sum_w2 + other.sum_w2
        merged.count = self.count + other.count
        merged.overflow_count = self.overflow_count + other.overflow_count
        merged.reject_count = self.reject_count + other.reject_count
        merged.max_abs_weight = max(self.max_abs_weight, other.max_abs_weight)
        return merged

    def normalize(self) -> np.ndarray:
        """Bin densities of the estimated conditional marginal.

        density = bin_sum / (sum_w * bin_width); the marginal integrates to 1
        up to overflow mass. Raises ConditioningTooWeakError when the weight
        sum is compatible with zero conditioning probability.
        """
        threshold = NORMALIZE_EPS_FACTOR * self.count * self.max_abs_weight
        if abs(self.sum_w) <= threshold:
            raise ConditioningTooWeakError(self.sum_w, threshold)
        return self.bin_weights / (self.sum_w * self.bin_width)

    def mean_weight_standard_error(self) -> float:
        """Standard error of sum_w / count, from the sample variance of weights."""
        if self.count < 2:
            return math.inf
        mean = self.sum_w / self.count
        var = max(self.sum_w2 / self.count - mean**2, 0.0)
        return math.sqrt(var / self.count)
