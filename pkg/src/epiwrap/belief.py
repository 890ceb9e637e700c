"""Belief and plausibility over interval grids on a truncated Gaussian posterior.

For one scalar weight posterior N(mu, sigma^2) the transform runs: dynamic
truncation to [mu - m*sigma, mu + m*sigma] with m = min(5, 1/sigma); a
contour (max-normalized density) over a uniform grid of endpoints; interval
plausibility as the grid supremum of the contour; belief as one minus the
plausibility of the closed flanking complement; and a mass matrix obtained
from the belief matrix by 2-D finite differencing on the interval lattice
(the Moebius inversion specialized to nested index pairs).

Conventions that matter downstream:

* The contour is normalized so the largest grid value is exactly 1. Scaling
  is against the grid maximum, not the density mode, so that intervals not
  containing the peak get belief exactly 0 even when the mode falls between
  two grid points; otherwise tail intervals would carry spurious belief
  exceeding their probability.
* The complement of [g_i, g_j] is taken as the closed pair [g_0, g_i] and
  [g_j, g_{N-1}], sharing endpoints with the interval itself. This is
  slightly conservative (lowers belief) and keeps the mass differencing
  telescoping exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConsonanceError
from .numcore import RngStream, gaussian_sample

MASS_CLAMP_TOL = 1e-12
TRUNCATION_MULTIPLIER_CAP = 5.0


@dataclass(frozen=True)
class TruncatedDomain:
    """Truncation range of one Gaussian posterior."""

    mu: float
    sigma: float
    multiplier: float
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower


def truncate(mu: float, sigma: float) -> TruncatedDomain:
    """Dynamic truncation: bounds mu +/- min(5, 1/sigma) * sigma.

    The multiplier shrinks for low-variance posteriors (their mass is
    already concentrated) and is capped at 5 so high-variance posteriors
    are not cut absurdly wide.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    m = min(TRUNCATION_MULTIPLIER_CAP, 1.0 / sigma)
    return TruncatedDomain(
        mu=float(mu), sigma=float(sigma), multiplier=m,
        lower=float(mu - m * sigma), upper=float(mu + m * sigma))


@dataclass(frozen=True)
class ContourGrid:
    """Grid endpoints and contour values, normalized to a grid maximum of 1."""

    domain: TruncatedDomain
    points: np.ndarray
    values: np.ndarray

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def peak_index(self) -> int:
        return int(np.argmax(self.values))


def contour(domain: TruncatedDomain, n_points: int = 30, mode: str = "analytic",
            n_samples: int = 5000, rng: RngStream | None = None) -> ContourGrid:
    """Normalized posterior contour on a uniform grid over the domain.

    Analytic mode evaluates exp(-(g - mu)^2 / (2 sigma^2)) directly; the
    truncation renormalization cancels under max-normalization. Empirical
    mode instead draws `n_samples` posterior samples, fits a normal to them,
    and proceeds identically from the fitted parameters.
    """
    if n_points < 3:
        raise ValueError(f"n_points must be >= 3, got {n_points}")
    mu, sigma = domain.mu, domain.sigma
    if mode == "empirical":
        if rng is None:
            raise ValueError("empirical contour mode requires an RngStream")
        draws = np.array([gaussian_sample(mu, sigma, rng) for _ in range(n_samples)])
        mu, sigma = float(draws.mean()), float(draws.std())
        if sigma <= 0:
            raise ValueError("empirical fit produced non-positive sigma")
    elif mode != "analytic":
        raise ValueError(f"unknown contour mode {mode!r}")
    points = np.linspace(domain.lower, domain.upper, n_points)
    values = np.exp(-((points - mu) ** 2) / (2.0 * sigma * sigma))
    values = values / values.max()
    return ContourGrid(domain=domain, points=points, values=values)


def plausibility(grid: ContourGrid, i: int, j: int) -> float:
    """Supremum of the contour over grid points i..j (exact when the peak is on the grid)."""
    _check_pair(grid, i, j)
    return float(grid.values[i:j + 1].max())


def belief(grid: ContourGrid, i: int, j: int) -> float:
    """1 - sup of the contour over the closed flanks [g_0, g_i] and [g_j, g_(N-1)]."""
    _check_pair(grid, i, j)
    left = grid.values[:i + 1].max()
    right = grid.values[j:].max()
    return float(1.0 - max(left, right))


def _check_pair(grid: ContourGrid, i: int, j: int):
    if not (0 <= i <= j < grid.n):
        raise ValueError(f"need 0 <= i <= j < {grid.n}, got ({i}, {j})")


@dataclass(frozen=True)
class IntervalLattice:
    """Belief and mass over all closed index intervals [g_i, g_j], i <= j.

    Both matrices are upper triangular; entries below the diagonal are 0.
    """

    grid: ContourGrid
    bel: np.ndarray
    mass: np.ndarray

    @property
    def n_intervals(self) -> int:
        n = self.grid.n
        return n * (n + 1) // 2


def bel_matrix(grid: ContourGrid) -> np.ndarray:
    """Belief of every lattice interval via prefix/suffix contour maxima."""
    v = grid.values
    prefix = np.maximum.accumulate(v)          # sup over [g_0, g_i]
    suffix = np.maximum.accumulate(v[::-1])[::-1]  # sup over [g_j, g_(N-1)]
    bel = 1.0 - np.maximum(prefix[:, None], suffix[None, :])
    return np.triu(bel)


def moebius_masses(bel: np.ndarray) -> np.ndarray:
    """Mass matrix from a belief matrix by 2-D differencing on the lattice.

    mass[i, j] = bel[i, j] - bel[i+1, j] - bel[i, j-1] + bel[i+1, j-1],
    with out-of-lattice terms zero. Negative values within the clamp
    tolerance are set to 0; anything structurally negative signals a
    non-consonant (non-unimodal) input and raises.
    """
    bel = np.asarray(bel, dtype=np.float64)
    n = bel.shape[0]
    if bel.shape != (n, n):
        raise ValueError("bel must be a square matrix")
    shift_i = np.zeros_like(bel)
    shift_i[:-1, :] = bel[1:, :]
    shift_j = np.zeros_like(bel)
    shift_j[:, 1:] = bel[:, :-1]
    shift_ij = np.zeros_like(bel)
    shift_ij[:-1, 1:] = bel[1:, :-1]
    mass = np.triu(bel - shift_i - shift_j + shift_ij)
    worst = mass.min()
    if worst < -MASS_CLAMP_TOL:
        raise ConsonanceError(
            f"mass matrix has entry {worst}; belief input is not consonant")
    np.clip(mass, 0.0, None, out=mass)
    return mass


def build_lattice(grid: ContourGrid) -> IntervalLattice:
    bel = bel_matrix(grid)
    return IntervalLattice(grid=grid, bel=bel, mass=moebius_masses(bel))


def interval_to_simplex(grid: ContourGrid, i: int, j: int) -> np.ndarray:
    """Embed interval [g_i, g_j] as a simplex point (a', b' - a', 1 - b').

    a' and b' are the interval endpoints normalized to [0, 1] within the
    truncation domain.
    """
    _check_pair(grid, i, j)
    d = grid.domain
    a = (grid.points[i] - d.lower) / d.width
    b = (grid.points[j] - d.lower) / d.width
    return np.array([a, b - a, 1.0 - b])


def simplex_to_interval(x, domain: TruncatedDomain) -> tuple[float, float]:
    """Inverse embedding: simplex point back to a real interval in the domain."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (3,) or np.any(x < -1e-9) or abs(x.sum() - 1.0) > 1e-9:
        raise ValueError(f"not a point on the 2-simplex: {x}")
    a = domain.lower + x[0] * domain.width
    b = domain.lower + (x[0] + x[1]) * domain.width
    return float(a), float(b)


def lattice_to_cloud(lattice: IntervalLattice) -> tuple[np.ndarray, np.ndarray]:
    """All lattice intervals as simplex points with their (unnormalized) masses.

    Row order is row-major over the upper triangle, matching the CSV dump.
    """
    grid = lattice.grid
    n = grid.n
    iu, ju = np.triu_indices(n)
    norm = (grid.points - grid.domain.lower) / grid.domain.width
    a = norm[iu]
    b = norm[ju]
    points = np.column_stack([a, b - a, 1.0 - b])
    weights = lattice.mass[iu, ju]
    return points, weights


def dump_lattice_csv(lattice: IntervalLattice, path):
    """Debug dump: one row (i, j, g_i, g_j, Bel, Mass) per lattice interval."""
    grid = lattice.grid
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["i", "j", "g_i", "g_j", "bel", "mass"])
        for i in range(grid.n):
            for j in range(i, grid.n):
                writer.writerow([
                    i, j, f"{grid.points[i]:.17g}", f"{grid.points[j]:.17g}",
                    f"{lattice.bel[i, j]:.17g}", f"{lattice.mass[i, j]:.17g}"])


def truncated_density(domain: TruncatedDomain, x: np.ndarray) -> np.ndarray:
    """Density of the truncated posterior on its domain (integrates to 1 there)."""
    mu, sigma = domain.mu, domain.sigma
    z_lo = (domain.lower - mu) / sigma
    z_hi = (domain.upper - mu) / sigma
    norm = 0.5 * (math.erf(z_hi / math.sqrt(2)) - math.erf(z_lo / math.sqrt(2)))
    pdf = np.exp(-((x - mu) ** 2) / (2 * sigma * sigma)) / (sigma * math.sqrt(2 * math.pi))
    return pdf / norm
