"""Experiment parameters and decibel/linear conversions.

All quadrature variances are expressed in shot-noise units: the quadrature
convention is X^theta = exp(-i theta) a + exp(i theta) a^dag, so the vacuum
variance is 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


def db_to_variance(db: float) -> float:
    """Convert a variance quoted in dB relative to shot noise to linear units."""
    if not math.isfinite(db):
        raise ValueError(f"variance in dB must be finite, got {db!r}")
    return 10.0 ** (db / 10.0)


def default_tomography_angles(count: int = 12) -> tuple[float, ...]:
    """Evenly spaced homodyne angles covering [0, pi), in radians."""
    return tuple(k * math.pi / count for k in range(count))


@dataclass(frozen=True)
class ExperimentParams:
    """Optical layout and acquisition settings of the simulated experiment.

    Defaults reproduce the measured configuration: -3.78 dB squeezing with
    +4.33 dB antisqueezing, a 20% conditioning tap, 95% homodyne efficiency,
    dark noise 22 dB below shot noise, and 12 tomography angles spaced 15
    degrees apart.
    """

    squeezed_variance_db: float = -3.78
    antisqueezed_variance_db: float = 4.33
    tap_reflectivity: float = 0.2
    homodyne_efficiency: float = 0.95
    dark_noise_db: float = -22.0
    conditioning_phase: float = 0.0
    tomography_angles: tuple[float, ...] = field(default_factory=default_tomography_angles)
    samples_per_angle: int = 10_000_000
    rng_seed: int = 1729

    def __post_init__(self):
        v_s = db_to_variance(self.squeezed_variance_db)
        v_a = db_to_variance(self.antisqueezed_variance_db)
        if not v_s <= 1.0 <= v_a:
            raise ValueError(
                f"need V_s <= 1 <= V_a in linear units, got V_s={v_s:.5g}, V_a={v_a:.5g}"
            )
        if v_s * v_a < 1.0 - 1e-12:
            raise ValueError(
                f"unphysical squeezing: V_s*V_a = {v_s * v_a:.5g} < 1 violates the "
                "uncertainty bound"
            )
        if not 0.0 <= self.tap_reflectivity <= 1.0:
            raise ValueError(f"tap reflectivity must lie in [0, 1], got {self.tap_reflectivity}")
        if not 0.0 < self.homodyne_efficiency <= 1.0:
            raise ValueError(
                f"homodyne efficiency must lie in (0, 1], got {self.homodyne_efficiency}"
            )
        if self.dark_noise_db > 0.0:
            raise ValueError(
                f"dark noise must not exceed shot noise (dB <= 0), got {self.dark_noise_db}"
            )
        if len(self.tomography_angles) == 0:
            raise ValueError("at least one tomography angle is required")
        if self.samples_per_angle <= 0:
            raise ValueError(f"samples_per_angle must be positive, got {self.samples_per_angle}")

    @property
    def squeezed_variance(self) -> float:
        return db_to_variance(self.squeezed_variance_db)

    @property
    def antisqueezed_variance(self) -> float:
        return db_to_variance(self.antisqueezed_variance_db)

    @property
    def dark_noise_variance(self) -> float:
        return db_to_variance(self.dark_noise_db)

    def input_variance(self, angle: float) -> float:
        """Variance of the input quadrature X^angle; the squeezing axis is angle = 0."""
        return (
            self.squeezed_variance * math.cos(angle) ** 2
            + self.antisqueezed_variance * math.sin(angle) ** 2
        )
