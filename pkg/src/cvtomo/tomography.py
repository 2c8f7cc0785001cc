"""Filtered back-projection of angle-resolved marginals onto a Wigner grid.

The reconstruction is the direct, assumption-free inverse Radon transform with
a hard band limit: the ramp filter |xi| is truncated at a cutoff frequency,
giving the closed-form kernel

    K_c(u) = [cos(c u) + c u sin(c u) - 1] / u^2,   K_c(0) = c^2 / 2,

and the estimate

    W(x, p) = (1/2 pi^2) sum_i dtheta_i  integral dx' pi_i(x') K_c(t_i - x'),

with t_i = x cos(theta_i) + p sin(theta_i) and trapezoid quadrature over the
marginal bins. The default cutoff is fixed by a vacuum/one-photon convergence
sweep so the vacuum peak reproduces 1/(2 pi) to better than 0.002 on the
default grid (see tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

DEFAULT_CUTOFF = 4.0
DEFAULT_EXTENT = 5.0
DEFAULT_GRID_POINTS = 201


def ramp_kernel(u: np.ndarray, cutoff: float) -> np.ndarray:
    """Band-limited ramp filter kernel; stable near u = 0 via its Taylor limit."""
    if cutoff <= 0:
        raise ValueError(f"cutoff must be positive, got {cutoff}")
    u = np.asarray(u, dtype=float)
    cu = cutoff * u
    small = np.abs(cu) < 1e-4
    safe_u = np.where(small, 1.0, u)
    out = (np.cos(cu) + cu * np.sin(cu) - 1.0) / safe_u**2
    # cos + cu sin - 1 = (cu)^2/2 - (cu)^4/8 + O(u^6)
    taylor = cutoff**2 * (0.5 - cu**2 / 8.0)
    return np.where(small, taylor, out)


def _kernel_matrix(t: np.ndarray, centers: np.ndarray, cutoff: float) -> np.ndarray:
    """ramp_kernel(t[:, None] - centers[None, :], cutoff) without per-element
    transcendentals: cos/sin of c(t - x') expand over the two small vectors."""
    ct = cutoff * t
    cx = cutoff * centers
    cos_t, sin_t = np.cos(ct), np.sin(ct)
    cos_x, sin_x = np.cos(cx), np.sin(cx)
    cos_u = cos_t[:, None] * cos_x[None, :] + sin_t[:, None] * sin_x[None, :]
    sin_u = sin_t[:, None] * cos_x[None, :] - cos_t[:, None] * sin_x[None, :]
    u = t[:, None] - centers[None, :]
    cu = cutoff * u
    small = np.abs(cu) < 1e-4
    safe_u = np.where(small, 1.0, u)
    out = (cos_u + cu * sin_u - 1.0) / safe_u**2
    taylor = cutoff**2 * (0.5 - cu**2 / 8.0)
    return np.where(small, taylor, out)


@dataclass(frozen=True)
class MarginalSet:
    """Angle-resolved quadrature densities sharing one bin geometry."""

    angles: np.ndarray  # radians, strictly increasing in [0, pi)
    centers: np.ndarray  # shared bin centers
    densities: np.ndarray  # shape (n_angles, n_bins)

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float)
        centers = np.asarray(self.centers, dtype=float)
        densities = np.asarray(self.densities, dtype=float)
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "densities", densities)
        if densities.shape != (angles.size, centers.size):
            raise ValueError(
                f"densities shape {densities.shape} does not match "
                f"{angles.size} angles x {centers.size} bins"
            )
        if angles.size and (np.any(np.diff(angles) <= 0) or angles[0] < 0 or angles[-1] >= math.pi):
            raise ValueError("angles must be strictly increasing within [0, pi)")
        steps = np.diff(centers)
        if centers.size > 1 and not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError("bin centers must be uniformly spaced")
        widths = steps[0] if centers.size > 1 else 1.0
        integrals = densities.sum(axis=1) * widths
        if np.any(np.abs(integrals - 1.0) > 0.02):
            worst = integrals[np.argmax(np.abs(integrals - 1.0))]
            raise ValueError(
                f"marginals must integrate to 1 +- 0.02; worst integral {worst:.4f}"
            )

    @property
    def bin_width(self) -> float:
        return float(self.centers[1] - self.centers[0])


@dataclass(frozen=True)
class WignerGrid:
    """Square phase-space grid; values[i, j] = W(xs[i], ps[j])."""

    xs: np.ndarray
    ps: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def dx(self) -> float:
        return float(self.xs[1] - self.xs[0])

    def integral(self) -> float:
        return float(np.trapezoid(np.trapezoid(self.values, self.ps, axis=1), self.xs))


def phase_space_axes(extent: float, n_grid: int) -> np.ndarray:
    return np.linspace(-extent, extent, n_grid)


def inverse_radon(
    marginals: MarginalSet,
    extent: float = DEFAULT_EXTENT,
    n_grid: int = DEFAULT_GRID_POINTS,
    cutoff: float = DEFAULT_CUTOFF,
    row_chunk: int = 16,
) -> WignerGrid:
    """Reconstruct the Wigner function from the marginal set.

    Uniform angle weights pi/n_angles; trapezoid quadrature over the marginal
    bins. Work is chunked over grid rows, so output is deterministic and rows
    may be computed in parallel without changing the result.
    """
    if marginals.angles.size < 2:
        raise ValueError("at least two tomography angles are required")
    if cutoff <= 0:
        raise ValueError(f"cutoff must be positive, got {cutoff}")
    axes = phase_space_axes(extent, n_grid)
    xs, ps = axes, axes
    centers = marginals.centers
    width = marginals.bin_width
    quad_weights = np.full(centers.size, width)
    quad_weights[0] *= 0.5
    quad_weights[-1] *= 0.5
    dtheta = math.pi / marginals.angles.size

    values = np.zeros((n_grid, n_grid))
    cos_t = np.cos(marginals.angles)
    sin_t = np.sin(marginals.angles)
    weighted = marginals.densities * quad_weights[None, :]

    for start in range(0, n_grid, row_chunk):
        stop = min(start + row_chunk, n_grid)
        x_block = xs[start:stop]
        for i in range(marginals.angles.size):
            t = (x_block[:, None] * cos_t[i] + ps[None, :] * sin_t[i]).ravel()
            kernel = _kernel_matrix(t, centers, cutoff)
            values[start:stop] += (kernel @ weighted[i]).reshape(stop - start, n_grid)
    values *= dtheta / (2.0 * math.pi**2)
    return WignerGrid(
        xs=xs,
        ps=ps,
        values=values,
        meta={"cutoff": cutoff, "extent": extent, "n_grid": n_grid},
    )


@dataclass(frozen=True)
class WignerMetrics:
    """Figures of merit extracted from a (reconstructed) Wigner grid.

    Fringe metrics are read along the p = 0 slice: with the squeezing axis at
    theta = 0 the subtracted states carry their interference fringes along x,
    so both the central positive fringe and the first negative fringe of the
    two-photon-subtracted state live on that slice.
    """

    wigner_min: float
    origin: float
    central_fringe_max: float
    fringe_min: float
    integral: float

    def as_dict(self) -> dict:
        return {
            "wigner_min": self.wigner_min,
            "origin": self.origin,
            "central_fringe_max": self.central_fringe_max,
            "fringe_min": self.fringe_min,
            "integral": self.integral,
        }


def wigner_metrics(grid: WignerGrid) -> WignerMetrics:
    values = grid.values
    ix0 = int(np.argmin(np.abs(grid.xs)))
    ip0 = int(np.argmin(np.abs(grid.ps)))
    slice_p0 = values[:, ip0]
    return WignerMetrics(
        wigner_min=float(values.min()),
        origin=float(values[ix0, ip0]),
        central_fringe_max=float(slice_p0.max()),
        fringe_min=float(slice_p0.min()),
        integral=grid.integral(),
    )


def marginal_of_wigner(grid: WignerGrid, theta: float, centers: np.ndarray) -> np.ndarray:
    """Radon projection of the grid at angle theta, evaluated on the centers.

    Line integrals along the direction orthogonal to theta, sampled by cubic
    spline interpolation (points outside the grid contribute zero).
    """
    centers = np.asarray(centers, dtype=float)
    step = grid.dx
    extent = float(grid.xs[-1])
    s = np.arange(-extent, extent + step / 2.0, step)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    x = centers[:, None] * cos_t - s[None, :] * sin_t
    p = centers[:, None] * sin_t + s[None, :] * cos_t
    ix = (x - grid.xs[0]) / step
    ip = (p - grid.ps[0]) / step
    samples = ndimage.map_coordinates(
        grid.values, np.stack([ix, ip]), order=3, mode="constant", cval=0.0
    )
    return samples.sum(axis=1) * step
