"""Momentum distributions and local Landau-level occupations.

Momentum densities come in two flavors: the quantum one, summing squared
Fourier transforms of the orbitals on the dual lattice, and the
semi-classical one, integrating the filled-phase-space-ball indicator of the
closed-form model by Monte Carlo.  Level occupations are measured by
sandwiching the state with Gaussian-localized Landau projector kernels
(Laguerre polynomials) and integrating over a window around the measurement
point.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .grid import Grid, ScalarField, fft2, momentum_grid, radial_average
from .hartree import OrbitalSet, compute_density
from .mtf import MtfModel

__all__ = [
    "MomentumProfile",
    "HusimiFilling",
    "momentum_density_field",
    "momentum_density",
    "rescale_momentum_profile",
    "tf_momentum_density_mc",
    "mc_momentum_profile",
    "laguerre_kernel",
    "husimi_ll_filling",
    "localized_density",
    "radial_symmetry_fraction",
]

MC_MIN_SAMPLES = 10_000
_MC_CHUNK = 1 << 20
_WINDOW_RADII = 5.0  # Gaussian window truncated at 5 epsilon; tail < 1e-9


@dataclass
class MomentumProfile:
    """Rotation-averaged occupancy density t(p) on a momentum grid."""

    momenta: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.momenta = np.asarray(self.momenta, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.momenta.shape:
            raise ValueError("values must match momenta in shape")
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)
            if self.stderr.shape != self.momenta.shape:
                raise ValueError("stderr must match momenta in shape")


@dataclass(frozen=True)
class HusimiFilling:
    """Occupation m(n, R) of Landau level n measured at point R."""

    level: int
    value: float
    normalized: float | None
    epsilon: float
    field_strength: float
    center: tuple[float, float]


def momentum_density_field(orbitals: OrbitalSet) -> ScalarField:
    """t(p) = sum_j |uhat_j(p)|^2 sampled on the dual lattice (centered layout)."""
    grid = orbitals.grid
    scale = grid.cell_area / (2.0 * math.pi)
    coefficients = fft2(orbitals.orbitals) * scale
    values = np.fft.fftshift(np.sum(np.abs(coefficients) ** 2, axis=0))
    return ScalarField(momentum_grid(grid), values)


def momentum_density(orbitals: OrbitalSet, momenta=None) -> MomentumProfile:
    """Rotation average of the momentum density over circles |p| = const."""
    field = momentum_density_field(orbitals)
    dual = field.grid
    if momenta is None:
        momenta = np.linspace(0.0, 0.5 * dual.box_length, dual.points // 2 + 1)
    profile = radial_average(field, momenta)
    return MomentumProfile(profile.radii, profile.values)


def rescale_momentum_profile(profile: MomentumProfile, n_particles: float) -> MomentumProfile:
    """Relabel momenta as p/sqrt(N); the 2D Jacobian then makes the mass 1."""
    if n_particles <= 0:
        raise ValueError("particle number must be positive")
    root = math.sqrt(n_particles)
    return MomentumProfile(profile.momenta / root, profile.values.copy(),
                           None if profile.stderr is None else profile.stderr.copy())


def _phase_space_indicator(model: MtfModel, points: np.ndarray, momentum: np.ndarray) -> np.ndarray:
    gauge = model.vector_potential(points)
    shifted = momentum[None, :] + model.alpha * gauge
    radius = np.linalg.norm(points, axis=-1)
    return np.sum(shifted**2, axis=-1) <= 4.0 * math.pi * model.density(radius)


def tf_momentum_density_mc(
    model: MtfModel, momentum, samples: int, seed: int
) -> tuple[float, float]:
    """Semi-classical momentum density at one momentum, with its standard error.

    Integrates the indicator of |p + alpha A(x)|^2 <= 4 pi rho(x) over the
    model support by uniform disk sampling.  Deterministic for a fixed seed
    (fixed-size chunks in a fixed order).
    """
    if samples < MC_MIN_SAMPLES:
        raise ValueError(f"need at least {MC_MIN_SAMPLES} samples")
    p = np.asarray(momentum, dtype=float)
    if p.ndim == 0:
        p = np.array([float(p), 0.0])
    radius = model.support_radius
    rng = np.random.default_rng(seed)
    hits = 0
    remaining = samples
    while remaining > 0:
        block = min(_MC_CHUNK, remaining)
        u = rng.random(block)
        theta = rng.random(block) * (2.0 * math.pi)
        r = radius * np.sqrt(u)
        points = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
        hits += int(np.count_nonzero(_phase_space_indicator(model, points, p)))
        remaining -= block
    area_factor = math.pi * radius**2 / (2.0 * math.pi) ** 2
    fraction = hits / samples
    value = area_factor * fraction
    # Bernoulli sample standard deviation
    spread = math.sqrt(max(fraction * (1.0 - fraction), 0.0) * samples / max(samples - 1, 1))
    stderr = area_factor * spread / math.sqrt(samples)
    return value, stderr


def mc_momentum_profile(model: MtfModel, momenta, samples: int, seed: int) -> MomentumProfile:
    """Monte Carlo momentum density on a radial momentum grid.

    Each momentum uses an independent substream spawned from the seed, so
    the profile is deterministic and insensitive to evaluation order.
    """
    momenta = np.asarray(momenta, dtype=float)
    streams = np.random.SeedSequence(seed).spawn(momenta.size)
    values = np.empty(momenta.size)
    errors = np.empty(momenta.size)
    for i, (p, stream) in enumerate(zip(momenta, streams)):
        sub_seed = int(stream.generate_state(1, dtype=np.uint64)[0])
        values[i], errors[i] = tf_momentum_density_mc(model, p, samples, sub_seed)
    return MomentumProfile(momenta, values, errors)


def _laguerre_poly(level: int, t: np.ndarray) -> np.ndarray:
    """L_n(t) = sum_k C(n,k) (-1)^k t^k / k!, evaluated by Horner."""
    coefficients = [math.comb(level, k) * (-1.0) ** k / math.factorial(k) for k in range(level + 1)]
    out = np.full_like(t, coefficients[-1])
    for c in reversed(coefficients[:-1]):
        out = out * t + c
    return out


def laguerre_kernel(field_strength: float, level: int, x, y) -> np.ndarray:
    """Integral kernel of the projector onto Landau level ``level``.

    (B/2pi) exp(i (B/2)(x1 y2 - x2 y1) - B|x-y|^2/4) L_n(B|x-y|^2/2);
    Hermitian, constant diagonal B/2pi.  The phase coefficient B/2 is pinned
    by idempotency: with it the kernel reproduces itself under composition
    and annihilates other levels, as a level projector must.
    """
    if field_strength <= 0:
        raise ValueError("field strength must be positive")
    if level < 0:
        raise ValueError("level index must be nonnegative")
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    cross = xa[..., 0] * ya[..., 1] - xa[..., 1] * ya[..., 0]
    dist2 = np.sum((xa - ya) ** 2, axis=-1)
    b = field_strength
    return (
        b / (2.0 * math.pi)
        * np.exp(0.5j * b * cross - 0.25 * b * dist2)
        * _laguerre_poly(level, 0.5 * b * dist2)
    )


def _gaussian_window(grid: Grid, epsilon: float, center) -> tuple[np.ndarray, np.ndarray]:
    """Window points within 5 epsilon of the center and g_eps values there."""
    cx, cy = float(center[0]), float(center[1])
    reach = _WINDOW_RADII * epsilon
    half = 0.5 * grid.box_length
    if abs(cx) + reach > half or abs(cy) + reach > half:
        raise ValueError("localization window exceeds the box")
    x, y = grid.meshgrid()
    mask = (x - cx) ** 2 + (y - cy) ** 2 <= reach**2
    points = np.stack([x[mask], y[mask]], axis=-1)
    # normalization of g in L^2: int |g|^2 = 1
    amplitude = math.sqrt(2.0 / math.pi) / epsilon
    weights = amplitude * np.exp(-((points[:, 0] - cx) ** 2 + (points[:, 1] - cy) ** 2) / epsilon**2)
    return mask, weights


def husimi_ll_filling(
    orbitals: OrbitalSet,
    epsilon: float,
    field_strength: float,
    center=(0.0, 0.0),
    n_max: int = 3,
    normalization: float | None = None,
) -> list[HusimiFilling]:
    """Occupations m(n, R) of the lowest Landau levels at point R.

    m(n, R) = sum_j <v_j, P_n v_j> with v_j = g_eps(. - R) u_j, evaluated by
    direct double quadrature over the window |x - R| <= 5 eps.  Warns when
    eps leaves the window between the magnetic length and the box scale.
    Raw values are returned together with values normalized by
    ``normalization`` (a reference central density) when given.
    """
    if epsilon <= 0:
        raise ValueError("localization width must be positive")
    if field_strength <= 0:
        raise ValueError("field strength must be positive")
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    grid = orbitals.grid
    magnetic_length = 1.0 / math.sqrt(field_strength)
    if epsilon <= magnetic_length:
        warnings.warn(
            f"localization width {epsilon:.3g} below the magnetic length "
            f"{magnetic_length:.3g}; level resolution degrades",
            stacklevel=2,
        )
    if epsilon >= 0.09 * grid.box_length:
        warnings.warn(
            f"localization width {epsilon:.3g} comparable to the box "
            f"{grid.box_length:.3g}; spatial resolution degrades",
            stacklevel=2,
        )
    mask, weights = _gaussian_window(grid, epsilon, center)
    x, y = grid.meshgrid()
    points = np.stack([x[mask], y[mask]], axis=-1)
    windowed = orbitals.orbitals[:, mask] * weights[None, :]  # (N, P)
    stacked = windowed.T.copy()  # (P, N)
    cell_sq = grid.cell_area**2
    size = points.shape[0]
    chunk = max(1, 4_000_000 // max(size, 1))
    raw = np.zeros(n_max + 1)
    for start in range(0, size, chunk):
        stop = min(start + chunk, size)
        xs = points[start:stop]
        cross = xs[:, 0, None] * points[None, :, 1] - xs[:, 1, None] * points[None, :, 0]
        dist2 = (xs[:, 0, None] - points[None, :, 0]) ** 2 + (xs[:, 1, None] - points[None, :, 1]) ** 2
        envelope = np.exp(0.5j * field_strength * cross - 0.25 * field_strength * dist2)
        scaled = 0.5 * field_strength * dist2
        for level in range(n_max + 1):
            block = envelope * _laguerre_poly(level, scaled)
            applied = block @ stacked  # (chunk, N)
            raw[level] += float(np.sum(stacked[start:stop].conj() * applied).real)
    raw *= cell_sq * field_strength / (2.0 * math.pi)
    fillings = []
    for level in range(n_max + 1):
        normalized = None if normalization is None else raw[level] / normalization
        fillings.append(
            HusimiFilling(level, raw[level], normalized, epsilon, field_strength,
                          (float(center[0]), float(center[1])))
        )
    return fillings


def localized_density(orbitals: OrbitalSet, epsilon: float, center=(0.0, 0.0)) -> float:
    """(|g_eps|^2 * rho)(R): the density smeared by the localization window.

    This is the exact completeness sum of the level occupations m(n, R).
    """
    grid = orbitals.grid
    mask, weights = _gaussian_window(grid, epsilon, center)
    rho = compute_density(orbitals).values
    return float(np.sum(weights**2 * rho[mask])) * grid.cell_area


def radial_symmetry_fraction(density: ScalarField) -> float:
    """Share of the field's variance captured by its circular average.

    Diagnostic for converged states in radial traps; 1 means perfectly
    radial.  Uses ring bins one grid spacing wide.
    """
    grid = density.grid
    values = density.values.real.ravel()
    rings = np.minimum(
        np.rint(grid.radius() / grid.spacing).astype(int).ravel(), grid.points
    )
    counts = np.bincount(rings, minlength=grid.points + 1)
    sums = np.bincount(rings, weights=values, minlength=grid.points + 1)
    ring_means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    residual = values - ring_means[rings]
    total = float(np.var(values))
    if total == 0.0:
        return 1.0
    return 1.0 - float(np.mean(residual**2)) / total
