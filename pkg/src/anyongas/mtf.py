"""Closed-form Thomas-Fermi and magnetic Thomas-Fermi theory for power-law traps.

All quantities use units with hbar = c = 2m = 1, trap potential V(x) = |x|^s
scaled by the particle number, and densities normalized to the particle
number.  The magnetic variant encodes the energy of filling Landau levels of
the self-generated field B = 2*pi*alpha*rho through the statistics constant
c(alpha); the plain Thomas-Fermi theory is the alpha -> 0 limit (c = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "mtf_constant",
    "homogeneous_energy_density",
    "mtf_chemical_potential",
    "MtfModel",
    "theoretical_ll_filling",
    "theoretical_ll_fillings",
    "LandauSpectrum",
    "landau_spectrum",
    "reference_table",
]

#: alpha^-1 closer than this to an integer is snapped to it; the statistics
#: constant is continuous there, so snapping only removes 1-ulp noise.
_SNAP_TOL = 1e-12


def _floor_and_frac(alpha: float) -> tuple[int, float]:
    """Integer and fractional part of 1/alpha, snapped at near-integers."""
    inv = 1.0 / alpha
    nearest = round(inv)
    if abs(inv - nearest) < _SNAP_TOL:
        return int(nearest), 0.0
    n = math.floor(inv)
    return int(n), inv - n


def _check_alpha(alpha: float) -> None:
    if not (0.0 <= alpha < 1.0) or not math.isfinite(alpha):
        raise ValueError(f"statistics parameter must lie in [0, 1), got {alpha}")


def mtf_constant(alpha: float) -> float:
    """Statistics constant c(alpha) = 1 + alpha^2 (1 - {1/alpha}) {1/alpha}.

    Equals 1 exactly at alpha = 1/n (and in the limit alpha -> 0), and is
    bounded above by 1 + alpha^2/4.  Up to a factor 2*pi*rho^2 this is the
    energy density of the homogeneous gas, obtained by filling Landau levels
    of the self-generated magnetic field.
    """
    _check_alpha(alpha)
    if alpha == 0.0:
        return 1.0
    _, frac = _floor_and_frac(alpha)
    return 1.0 + alpha**2 * (1.0 - frac) * frac


def homogeneous_energy_density(alpha: float, density: float) -> float:
    """Ground-state energy per unit area of the homogeneous gas, 2*pi*c(alpha)*rho^2."""
    if density < 0:
        raise ValueError("density must be nonnegative")
    return 2.0 * math.pi * mtf_constant(alpha) * density**2


def mtf_chemical_potential(alpha: float, trap_exponent: float) -> float:
    """Chemical potential (4 c(alpha) (s+2)/s)^(s/(s+2)) for the trap |x|^s."""
    s = trap_exponent
    if s <= 0:
        raise ValueError("trap exponent must be positive")
    return (4.0 * mtf_constant(alpha) * (s + 2.0) / s) ** (s / (s + 2.0))


@dataclass(frozen=True)
class MtfModel:
    """Magnetic Thomas-Fermi ground state for N particles in the trap |x|^s.

    Derived fields are computed on construction:

    - ``statistics_constant``: c(alpha)
    - ``chemical_potential``: multiplier fixing the mass constraint
    - ``support_radius``: radius of the density support, chemical_potential^(1/s)
    - ``ground_energy``: minimal energy, scaling as N^2

    The plain (non-magnetic) Thomas-Fermi model is ``alpha = 0``.
    """

    n_particles: float
    alpha: float
    trap_exponent: float
    statistics_constant: float = field(init=False)
    chemical_potential: float = field(init=False)
    support_radius: float = field(init=False)
    ground_energy: float = field(init=False)

    def __post_init__(self) -> None:
        if self.n_particles <= 0:
            raise ValueError("particle number must be positive")
        s = self.trap_exponent
        c = mtf_constant(self.alpha)
        lam = mtf_chemical_potential(self.alpha, s)
        energy = (
            self.n_particles**2
            * s / (8.0 * c * (s + 1.0))
            * lam ** ((2.0 * s + 2.0) / s)
        )
        object.__setattr__(self, "statistics_constant", c)
        object.__setattr__(self, "chemical_potential", lam)
        object.__setattr__(self, "support_radius", lam ** (1.0 / s))
        object.__setattr__(self, "ground_energy", energy)

    def density(self, radius):
        """Density N (lambda - r^s)_+ / (4 pi c) at distance ``radius`` from the trap center."""
        r = np.asarray(radius, dtype=float)
        profile = np.maximum(self.chemical_potential - r**self.trap_exponent, 0.0)
        out = self.n_particles / (4.0 * math.pi * self.statistics_constant) * profile
        return out if out.ndim else float(out)

    @property
    def central_density(self) -> float:
        return float(self.density(0.0))

    @property
    def central_field(self) -> float:
        """Self-generated magnetic field 2*pi*alpha*rho(0) at the trap center."""
        return 2.0 * math.pi * self.alpha * self.central_density

    def vector_potential(self, points):
        """Self-consistent vector potential of the model density at ``points``.

        Azimuthal (divergence-free) field carrying flux 2*pi per unit mass:
        inside the support N x_perp (lambda - 2 r^s / (s+2)) / (4c), outside
        the point-flux tail N x_perp / r^2.  Continuous across the edge.
        Accepts one point ``(2,)`` or a stack ``(..., 2)``.
        """
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        r2 = np.sum(pts**2, axis=-1)
        r = np.sqrt(r2)
        s = self.trap_exponent
        lam = self.chemical_potential
        inside = (
            self.n_particles
            / (4.0 * self.statistics_constant)
            * (lam - 2.0 / (s + 2.0) * r**s)
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            outside = np.where(r2 > 0, self.n_particles / r2, 0.0)
        magnitude_over_r = np.where(r**s <= lam, inside, outside)
        perp = np.stack([-pts[..., 1], pts[..., 0]], axis=-1)
        out = magnitude_over_r[..., None] * perp
        return out[0] if single else out

    def azimuthal_potential(self, radius):
        """Magnitude |A|(r) of the vector potential (azimuthal component)."""
        r = np.asarray(radius, dtype=float)
        pts = np.stack([r, np.zeros_like(r)], axis=-1)
        a = self.vector_potential(pts)
        mag = np.hypot(a[..., 0], a[..., 1])
        return mag if mag.ndim else float(mag)

    def momentum_width(self) -> float:
        """Largest semi-classical momentum on the support.

        Maximum over the support of alpha*|A|(r) + sqrt(4*pi*rho(r)), the
        radius of the filled phase-space ball; used for grid sizing.
        """
        r = np.linspace(0.0, self.support_radius, 4097)
        width = self.alpha * self.azimuthal_potential(r) + np.sqrt(
            4.0 * math.pi * self.density(r)
        )
        return float(np.max(width))


def theoretical_ll_filling(alpha: float, level: int) -> float:
    """Fraction of the local density occupying Landau level ``level``.

    The semi-classical minimizer fills the lowest floor(1/alpha) levels with
    fraction alpha each and puts the remainder alpha*{1/alpha} in the next
    one; the fractions sum to 1.
    """
    _check_alpha(alpha)
    if alpha == 0.0:
        raise ValueError("alpha = 0 fills infinitely many levels; use the TF limit")
    if level < 0:
        raise ValueError("level index must be nonnegative")
    n_full, frac = _floor_and_frac(alpha)
    if level <= n_full - 1:
        return alpha
    if level == n_full:
        return alpha * frac
    return 0.0


def theoretical_ll_fillings(alpha: float, n_levels: int) -> np.ndarray:
    """Filling fractions for levels 0 .. n_levels-1 as an array."""
    return np.array([theoretical_ll_filling(alpha, n) for n in range(n_levels)])


@dataclass(frozen=True)
class LandauSpectrum:
    """Landau levels 2B(n + 1/2) of a constant field B, degeneracy B/(2 pi) per area."""

    field_strength: float

    def __post_init__(self) -> None:
        if self.field_strength <= 0:
            raise ValueError("field strength must be positive")

    def level(self, n: int) -> float:
        if n < 0:
            raise ValueError("level index must be nonnegative")
        return 2.0 * self.field_strength * (n + 0.5)

    def levels(self, count: int) -> np.ndarray:
        return 2.0 * self.field_strength * (np.arange(count) + 0.5)

    @property
    def degeneracy_density(self) -> float:
        return self.field_strength / (2.0 * math.pi)


def landau_spectrum(field_strength: float) -> LandauSpectrum:
    """Spectrum of the 2D magnetic kinetic operator at constant field."""
    return LandauSpectrum(field_strength)


def reference_table(alphas, trap_exponent: float) -> np.ndarray:
    """Rows (alpha, c, lambda, E/N^2) of the closed-form model over an alpha grid."""
    rows = []
    for alpha in alphas:
        model = MtfModel(1.0, float(alpha), trap_exponent)
        rows.append(
            (
                float(alpha),
                model.statistics_constant,
                model.chemical_potential,
                model.ground_energy,
            )
        )
    return np.array(rows)
