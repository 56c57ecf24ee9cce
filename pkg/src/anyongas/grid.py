"""Periodic-box plane-wave discretization and exact radial averaging.

A square box of side L with M points per side (M even), trap center at the
box center.  The dual momentum lattice is (2*pi/L) * {-M/2, ..., M/2-1}^2.
The repo-wide transform convention is unitary,

    fhat(k) = dx^2 / (2*pi) * sum_x f(x) exp(-i k.x),

so that Parseval holds between sum_x |f|^2 dx^2 and sum_k |fhat|^2 dk^2.
Circle averages are evaluated exactly through the plane-wave identity
(average of exp(i q.x) over a circle of radius r) = J0(|q| r).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.fft
from scipy.special import j0 as _scipy_j0

from .mtf import MtfModel

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "RadialProfile",
    "size_grid",
    "forward_transform",
    "inverse_transform",
    "radial_average",
    "bessel_j0",
    "momentum_grid",
    "fft2",
    "ifft2",
]

#: Environment variable selecting the FFT worker count (default: all cores).
THREADS_ENV_VAR = "ANYONGAS_THREADS"

MIN_POINTS = 8
DEFAULT_MAX_POINTS = 1024


def _workers() -> int:
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def fft2(values: np.ndarray) -> np.ndarray:
    """Unnormalized 2D DFT over the last two axes."""
    return scipy.fft.fft2(values, axes=(-2, -1), workers=_workers())


def ifft2(values: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2`."""
    return scipy.fft.ifft2(values, axes=(-2, -1), workers=_workers())


@dataclass(frozen=True)
class Grid:
    """Periodic square box: side ``box_length``, ``points`` cells per side.

    Coordinates run from -L/2 in steps of dx = L/M with the trap center at
    the box center (index M/2).  Wavenumber arrays are stored in FFT layout.
    """

    box_length: float
    points: int

    def __post_init__(self) -> None:
        if not math.isfinite(self.box_length) or self.box_length <= 0:
            raise ValueError(f"box length must be positive, got {self.box_length}")
        if self.points < MIN_POINTS or self.points % 2 != 0:
            raise ValueError(f"points per side must be even and >= {MIN_POINTS}")
        m = self.points
        dx = self.box_length / m
        coords = -0.5 * self.box_length + dx * np.arange(m)
        wavenumbers = 2.0 * math.pi * np.fft.fftfreq(m, d=dx)
        kx, ky = np.meshgrid(wavenumbers, wavenumbers, indexing="ij")
        # The Nyquist frequency has no sign, so odd (first-derivative-like)
        # multipliers must vanish there to stay self-consistent on real fields.
        odd = wavenumbers.copy()
        odd[m // 2] = 0.0
        kx_odd, ky_odd = np.meshgrid(odd, odd, indexing="ij")
        object.__setattr__(self, "spacing", dx)
        object.__setattr__(self, "cell_area", dx * dx)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "wavenumbers", wavenumbers)
        object.__setattr__(self, "kx", kx)
        object.__setattr__(self, "ky", ky)
        object.__setattr__(self, "kx_odd", kx_odd)
        object.__setattr__(self, "ky_odd", ky_odd)
        object.__setattr__(self, "k_squared", kx**2 + ky**2)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Centered coordinate meshes (X, Y), each of shape (M, M)."""
        return np.meshgrid(self.coords, self.coords, indexing="ij")

    def radius(self) -> np.ndarray:
        """Distance from the box center at every grid point."""
        x, y = self.meshgrid()
        return np.hypot(x, y)

    def integrate(self, values: np.ndarray) -> complex | float:
        """Riemann sum of a sampled field over the box."""
        total = np.sum(values) * self.cell_area
        return float(total.real) if np.isrealobj(values) else complex(total)

    def _radial_bins(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique |k| values and the inverse map from lattice points to them."""
        cached = getattr(self, "_radial_bins_cache", None)
        if cached is None:
            n = np.rint(np.fft.fftfreq(self.points) * self.points).astype(np.int64)
            n1, n2 = np.meshgrid(n, n, indexing="ij")
            nsq = (n1 * n1 + n2 * n2).ravel()
            unique, inverse = np.unique(nsq, return_inverse=True)
            magnitudes = 2.0 * math.pi / self.box_length * np.sqrt(unique.astype(float))
            cached = (magnitudes, inverse)
            object.__setattr__(self, "_radial_bins_cache", cached)
        return cached


@dataclass
class ScalarField:
    """Real or complex values sampled on a grid, shape (M, M)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values)
        m = self.grid.points
        if self.values.shape != (m, m):
            raise ValueError(f"values must have shape ({m}, {m}), got {self.values.shape}")

    @property
    def mass(self) -> float:
        return float(np.sum(self.values.real) * self.grid.cell_area)


@dataclass
class VectorField:
    """Two-component field (e.g. vector potential or current) on a grid."""

    grid: Grid
    comp1: np.ndarray
    comp2: np.ndarray

    def __post_init__(self) -> None:
        self.comp1 = np.asarray(self.comp1)
        self.comp2 = np.asarray(self.comp2)
        m = self.grid.points
        for c in (self.comp1, self.comp2):
            if c.shape != (m, m):
                raise ValueError(f"components must have shape ({m}, {m}), got {c.shape}")

    def magnitude(self) -> np.ndarray:
        return np.hypot(np.abs(self.comp1), np.abs(self.comp2))


@dataclass
class RadialProfile:
    """Circle averages f(r_i); plain averages over the circle, not 2*pi*r weighted."""

    radii: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        self.radii = np.asarray(self.radii, dtype=float)
        self.values = np.asarray(self.values)
        if self.radii.ndim != 1 or self.radii.size == 0:
            raise ValueError("radii must be a nonempty 1D array")
        if self.radii[0] != 0.0 or np.any(np.diff(self.radii) <= 0):
            raise ValueError("radii must start at 0 and increase strictly")
        if self.values.shape != self.radii.shape:
            raise ValueError("values must match radii in shape")


def size_grid(
    n_particles: float,
    alpha: float,
    trap_exponent: float,
    q_x: float,
    q_p: float,
    max_points: int = DEFAULT_MAX_POINTS,
) -> Grid:
    """Choose box and resolution from the closed-form model.

    Box side is 2*q_x times the model support radius.  The spacing resolves
    the semi-classical momentum width W_p (largest radius of the filled
    phase-space ball) as dx = 2*pi / (q_p * W_p); the point count is rounded
    up to the next even integer, floored at 8 and capped at ``max_points``.
    """
    for name, value in (("n_particles", n_particles), ("alpha", alpha),
                        ("trap_exponent", trap_exponent), ("q_x", q_x), ("q_p", q_p)):
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value}")
    if n_particles < 1:
        raise ValueError("need at least one particle")
    if q_x < 1 or q_p < 1:
        raise ValueError("quality factors must be >= 1")
    model = MtfModel(n_particles, alpha, trap_exponent)
    box_length = 2.0 * q_x * model.support_radius
    spacing = 2.0 * math.pi / (q_p * model.momentum_width())
    points = math.ceil(box_length / spacing)
    points += points % 2
    points = max(points, MIN_POINTS)
    if points > max_points:
        raise ValueError(
            f"requested resolution needs {points} points per side, "
            f"above the cap {max_points}"
        )
    return Grid(box_length, points)


def forward_transform(field: ScalarField) -> np.ndarray:
    """Momentum-space coefficients of a field, FFT layout, unitary convention."""
    grid = field.grid
    shifted = np.fft.ifftshift(field.values)
    return fft2(shifted) * (grid.cell_area / (2.0 * math.pi))


def inverse_transform(grid: Grid, coefficients: np.ndarray) -> ScalarField:
    """Exact inverse of :func:`forward_transform`."""
    values = np.fft.fftshift(ifft2(coefficients)) * (2.0 * math.pi / grid.cell_area)
    return ScalarField(grid, values)


def bessel_j0(x):
    """Bessel function J0 for nonnegative arguments."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise ValueError("argument must be nonnegative")
    out = _scipy_j0(arr)
    return out if out.ndim else float(out)


def radial_average(field: ScalarField, radii) -> RadialProfile:
    """Exact circle averages of a real field around the box center.

    Expands the field in lattice plane waves referenced to the center and
    sums coefficient * J0(|k| r); exact for band-limited fields.  Radii must
    stay within L/2 so the circle never leaves the box.
    """
    if np.iscomplexobj(field.values) and np.max(np.abs(field.values.imag)) > 1e-13 * max(
        1.0, float(np.max(np.abs(field.values)))
    ):
        raise ValueError("radial_average expects a real-valued field")
    radii = np.asarray(radii, dtype=float)
    grid = field.grid
    if np.any(radii > 0.5 * grid.box_length):
        raise ValueError("radii beyond L/2 leave the periodic box")
    # Coefficients referenced to the box center: f(x) = sum_k c_k exp(i k.(x - x_c)).
    coeffs = fft2(np.fft.ifftshift(field.values.real)).ravel() / grid.points**2
    magnitudes, inverse = grid._radial_bins()
    binned = np.zeros(magnitudes.size, dtype=complex)
    np.add.at(binned, inverse, coeffs)
    values = (binned.real @ bessel_j0(np.outer(magnitudes, radii)))
    return RadialProfile(radii, values)


def momentum_grid(grid: Grid) -> Grid:
    """Dual lattice viewed as a periodic grid (side M*dk = 2*pi/dx)."""
    return Grid(2.0 * math.pi / grid.spacing, grid.points)
