"""Self-consistent Coulomb-gauge vector potential on the periodic box.

The field obeys curl A = 2*pi*rho, div A = 0.  Solving directly in Fourier
space would force A to be periodic, which clashes with its slow 1/r decay;
instead the flux of an analytically solvable Gaussian reference of equal
mass is split off, and only the fast-decaying remainder is solved
spectrally.  The same Fourier machinery computes the scalar convolution of
the log-kernel gradient with a current field, which enters the variational
Hamiltonian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid, ScalarField, VectorField, fft2, ifft2

__all__ = [
    "GaussianReference",
    "reference_potential",
    "solve_vector_potential",
    "current_convolution",
    "spectral_curl",
    "spectral_divergence",
    "MassMismatchError",
]

MASS_TOLERANCE = 1e-8


class MassMismatchError(ValueError):
    """Source mass does not match the reference; the Fourier correction
    would then hide a long-range tail instead of a localized remainder."""


@dataclass(frozen=True)
class GaussianReference:
    """Gaussian density of given total mass and width, centered at the box center.

    rho_ref(x) = mass / (pi width^2) * exp(-|x|^2 / width^2).
    """

    total_mass: float
    width: float

    def __post_init__(self) -> None:
        if self.width <= 0:
            raise ValueError("reference width must be positive")
        if self.total_mass < 0:
            raise ValueError("reference mass must be nonnegative")

    def density_values(self, grid: Grid) -> np.ndarray:
        r2 = grid.radius() ** 2
        return self.total_mass / (math.pi * self.width**2) * np.exp(-r2 / self.width**2)

    def potential_values(self, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        x, y = grid.meshgrid()
        return _reference_components(self, x, y)


def _reference_components(ref: GaussianReference, x, y):
    r2 = x**2 + y**2
    # -expm1 keeps (1 - exp(-t)) accurate for small t; the r -> 0 limit of
    # (1 - exp(-r^2/w^2)) / r^2 is 1/w^2, removable singularity.
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(r2 > 0, -np.expm1(-r2 / ref.width**2) / np.where(r2 > 0, r2, 1.0), 1.0 / ref.width**2)
    factor = ref.total_mass * factor
    return -y * factor, x * factor


def reference_potential(ref: GaussianReference, point) -> np.ndarray:
    """Exact vector potential of the reference density at one point.

    A_ref(x) = mass * (1 - exp(-|x|^2/w^2)) * x_perp / |x|^2, with the
    removable singularity at the center evaluated by its limit; satisfies
    curl A_ref = 2*pi*rho_ref exactly in the continuum.
    """
    p = np.asarray(point, dtype=float)
    a1, a2 = _reference_components(ref, p[..., 0], p[..., 1])
    return np.stack([a1, a2], axis=-1)


def _perp_over_ksq(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    ksq = grid.k_squared.copy()
    ksq[0, 0] = 1.0  # k = 0 handled separately (zero-mass source)
    return -grid.ky_odd / ksq, grid.kx_odd / ksq


def solve_vector_potential(density: ScalarField, ref: GaussianReference) -> VectorField:
    """Vector potential with curl A = 2*pi*rho, div A = 0 on the grid.

    The reference part is analytic; the remainder rho - rho_ref is solved in
    Fourier space as Ahat = -2*pi*i * k_perp/|k|^2 * (rhohat - rhohat_ref),
    zero at k = 0.  Requires rho >= 0 (small tolerance) and the masses of
    rho and the reference to agree to ``MASS_TOLERANCE`` relative.
    """
    grid = density.grid
    rho = density.values.real
    scale = max(float(np.max(rho)), 1.0)
    if np.min(rho) < -1e-12 * scale:
        raise ValueError("density must be nonnegative")
    mass = density.mass
    if ref.total_mass == 0.0 or abs(mass - ref.total_mass) > MASS_TOLERANCE * abs(ref.total_mass):
        raise MassMismatchError(
            f"density mass {mass!r} does not match reference mass {ref.total_mass!r}"
        )
    diff_hat = fft2(rho - ref.density_values(grid))
    perp1, perp2 = _perp_over_ksq(grid)
    factor = -2.0j * math.pi * diff_hat
    a1_hat = factor * perp1
    a2_hat = factor * perp2
    a1_hat[0, 0] = 0.0
    a2_hat[0, 0] = 0.0
    ref1, ref2 = ref.potential_values(grid)
    return VectorField(grid, ref1 + ifft2(a1_hat).real, ref2 + ifft2(a2_hat).real)


def current_convolution(current: VectorField) -> ScalarField:
    """Convolution of the log-kernel gradient with a current, W(x) = int (x-y)_perp/|x-y|^2 . J(y) dy.

    Spectrally: What(k) = -2*pi*i (k_perp . Jhat) / |k|^2 for k != 0; the
    k = 0 mode is set to zero (no net current for symmetric states).
    """
    grid = current.grid
    j1_hat = fft2(current.comp1.real)
    j2_hat = fft2(current.comp2.real)
    perp1, perp2 = _perp_over_ksq(grid)
    w_hat = -2.0j * math.pi * (perp1 * j1_hat + perp2 * j2_hat)
    w_hat[0, 0] = 0.0
    return ScalarField(grid, ifft2(w_hat).real)


def spectral_curl(field: VectorField) -> ScalarField:
    """d(comp2)/dx1 - d(comp1)/dx2 by spectral differentiation (periodic fields only)."""
    grid = field.grid
    values = ifft2(
        1.0j * (grid.kx_odd * fft2(field.comp2) - grid.ky_odd * fft2(field.comp1))
    )
    return ScalarField(grid, values.real)


def spectral_divergence(field: VectorField) -> ScalarField:
    """d(comp1)/dx1 + d(comp2)/dx2 by spectral differentiation (periodic fields only)."""
    grid = field.grid
    values = ifft2(
        1.0j * (grid.kx_odd * fft2(field.comp1) + grid.ky_odd * fft2(field.comp2))
    )
    return ScalarField(grid, values.real)
