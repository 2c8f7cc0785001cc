"""Photon-number discrimination by dual homodyne and Wigner tomography.

Simulates the continuous-variable conditioning protocol: correlated quadrature
records are drawn from the exact Gaussian model of the optical layout,
weighted by photon-number polynomials translated to measurable dual-homodyne
observables, and the resulting conditional marginals are back-projected into
Wigner functions. A truncated Fock-basis oracle provides exact references for
every stage.
"""

from .params import ExperimentParams, db_to_variance, default_tomography_angles
from .gaussian import (
    SampleBatch,
    analytic_weighted_moment,
    build_covariance,
    dual_homodyne_covariance,
    gaussian_moment,
    presplit_covariance,
    sample_batch,
)
from .conditioning import (
    NumberPolynomial,
    WeightPolynomial,
    WeightedHistogram,
    build_q_polynomial,
    dark_adjusted_number_polynomial,
    PAPER_POLYNOMIALS,
)
from .tomography import (
    MarginalSet,
    WignerGrid,
    inverse_radon,
    marginal_of_wigner,
    ramp_kernel,
    wigner_metrics,
)
from . import fock
from .pipeline import RunConfig, load_config, parse_config, run, verify

__all__ = [
    "ExperimentParams",
    "MarginalSet",
    "NumberPolynomial",
    "PAPER_POLYNOMIALS",
    "RunConfig",
    "SampleBatch",
    "WeightPolynomial",
    "WeightedHistogram",
    "WignerGrid",
    "analytic_weighted_moment",
    "build_covariance",
    "build_q_polynomial",
    "dark_adjusted_number_polynomial",
    "db_to_variance",
    "default_tomography_angles",
    "dual_homodyne_covariance",
    "fock",
    "gaussian_moment",
    "inverse_radon",
    "load_config",
    "marginal_of_wigner",
    "parse_config",
    "presplit_covariance",
    "ramp_kernel",
    "run",
    "sample_batch",
    "verify",
    "wigner_metrics",
]

__version__ = "0.1.0"
