"""Riemannian L-BFGS over orthonormal orbital sets.

The constraint set (N orthonormal orbitals in the discrete inner product) is
a complex Stiefel manifold with the embedded Euclidean metric.  Tangent
vectors at U are the ambient directions G with herm(U^H G) = 0; steps return
to the manifold through a QR retraction with positive real diagonal.  Secant
pairs are transported between tangent spaces by re-projection, and pairs
losing positive curvature are discarded.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from .grid import Grid, ScalarField, fft2, ifft2
from .hartree import (
    EnergyBreakdown,
    OrbitalSet,
    _energy_stage,
    _gradient_stage,
)

__all__ = [
    "SolverParams",
    "MinimizeResult",
    "RetractionError",
    "LineSearchError",
    "DiagonalizationError",
    "project_tangent",
    "retract",
    "random_orthonormal",
    "initialize_orbitals",
    "lbfgs_minimize",
]


class RetractionError(ValueError):
    """U + t*xi lost rank; the step was too large to re-orthonormalize."""


class LineSearchError(RuntimeError):
    """No decrease found along the search direction nor along steepest descent."""


class DiagonalizationError(RuntimeError):
    """Block eigensolver failed to reach the requested residual."""


@dataclass
class SolverParams:
    """Knobs of the orbital minimizer.

    ``gradient_tolerance`` is compared against the tangent gradient norm per
    particle.  ``curvature_skip`` is the relative threshold below which a
    secant pair is considered to carry no curvature information.
    """

    lbfgs_history: int = 10
    gradient_tolerance: float = 1e-6
    max_iterations: int = 2000
    sufficient_decrease: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 40
    curvature_skip: float = 1e-12
    initialization: str = "linear-eigenstates"

    def __post_init__(self) -> None:
        if self.lbfgs_history < 1:
            raise ValueError("history must be >= 1")
        if self.gradient_tolerance <= 0:
            raise ValueError("gradient tolerance must be positive")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.initialization not in ("linear-eigenstates", "randomized"):
            raise ValueError(f"unknown initialization mode {self.initialization!r}")


@dataclass
class MinimizeResult:
    orbitals: OrbitalSet
    energy: EnergyBreakdown
    energies: np.ndarray
    gradient_norms: np.ndarray
    iterations: int
    converged: bool
    termination: str


def _inner(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    """Real part of the discrete inner product, summed over orbitals."""
    return grid.cell_area * float(np.sum(a.conj() * b).real)


def _norm(grid: Grid, a: np.ndarray) -> float:
    return math.sqrt(max(_inner(grid, a, a), 0.0))


def project_tangent(orbitals: OrbitalSet, ambient: np.ndarray) -> np.ndarray:
    """Tangent component G - U herm(<U, G>) of an ambient direction."""
    u = orbitals.orbitals
    overlaps = orbitals.grid.cell_area * np.einsum("imn,jmn->ij", u.conj(), ambient)
    herm = 0.5 * (overlaps + overlaps.conj().T)
    return ambient - np.einsum("ij,imn->jmn", herm, u)


def retract(orbitals: OrbitalSet, direction: np.ndarray, step: float) -> OrbitalSet:
    """QR re-orthonormalization of U + step*direction.

    The triangular factor is normalized to a positive real diagonal, which
    makes the retraction unique and the identity at step 0 exact.
    """
    if step == 0.0:
        return orbitals
    grid = orbitals.grid
    count = orbitals.count
    moved = (orbitals.orbitals + step * direction).reshape(count, -1).T
    q, r = np.linalg.qr(moved)
    diag = np.diagonal(r)
    if np.min(np.abs(diag)) < 1e-12 * max(float(np.max(np.abs(diag))), 1e-300):
        raise RetractionError("step produced a rank-deficient orbital set")
    phases = diag / np.abs(diag)
    q = q * phases.conj()
    columns = (q / grid.spacing).T.reshape(orbitals.orbitals.shape)
    return OrbitalSet(grid, columns)


def random_orthonormal(grid: Grid, count: int, seed: int = 0) -> OrbitalSet:
    """Orthonormalized complex Gaussian fields (deterministic per seed)."""
    rng = np.random.default_rng(seed)
    shape = (count, grid.points, grid.points)
    raw = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return _orthonormalize(grid, raw)


def _orthonormalize(grid: Grid, raw: np.ndarray) -> OrbitalSet:
    count = raw.shape[0]
    q, r = np.linalg.qr(raw.reshape(count, -1).T)
    diag = np.diagonal(r)
    phases = diag / np.abs(diag)
    q = q * phases.conj()
    return OrbitalSet(grid, (q / grid.spacing).T.reshape(raw.shape))


def initialize_orbitals(
    grid: Grid,
    trap: ScalarField,
    count: int,
    mode: str = "linear-eigenstates",
    n_particles: float | None = None,
    seed: int = 0,
    residual_tolerance: float = 1e-6,
    max_iterations: int = 500,
) -> OrbitalSet:
    """Starting orbitals: lowest eigenvectors of -Lap + N V, or random fields.

    The linear operator is diagonalized by a preconditioned block iteration
    (LOBPCG) with the inverse shifted kinetic operator as preconditioner.
    """
    if mode == "randomized":
        rng_raw = np.random.default_rng(seed)
        shape = (count, grid.points, grid.points)
        raw = rng_raw.normal(size=shape) + 1j * rng_raw.normal(size=shape)
        return _orthonormalize(grid, raw)
    if mode != "linear-eigenstates":
        raise ValueError(f"unknown initialization mode {mode!r}")

    n = float(count if n_particles is None else n_particles)
    size = grid.points**2
    scaled_trap = (n * trap.values).ravel()
    shift = max(1.0, math.sqrt(n))

    def apply_operator(block: np.ndarray) -> np.ndarray:
        cols = np.atleast_2d(block.T).reshape(-1, grid.points, grid.points)
        kinetic = ifft2(grid.k_squared * fft2(cols)).real
        out = kinetic.reshape(-1, size).T + scaled_trap[:, None] * np.atleast_2d(block.T).reshape(-1, size).T
        return out.reshape(block.shape)

    def apply_preconditioner(block: np.ndarray) -> np.ndarray:
        cols = np.atleast_2d(block.T).reshape(-1, grid.points, grid.points)
        smoothed = ifft2(fft2(cols) / (grid.k_squared + shift)).real
        return smoothed.reshape(-1, size).T.reshape(block.shape)

    operator = scipy.sparse.linalg.LinearOperator((size, size), matvec=apply_operator, matmat=apply_operator, dtype=np.float64)
    preconditioner = scipy.sparse.linalg.LinearOperator((size, size), matvec=apply_preconditioner, matmat=apply_preconditioner, dtype=np.float64)
    extra = max(2, count // 4)
    block_size = min(count + extra, size)
    rng = np.random.default_rng(seed)
    start = rng.normal(size=(size, block_size))
    with np.errstate(all="ignore"):
        values, vectors = scipy.sparse.linalg.lobpcg(
            operator,
            start,
            M=preconditioner,
            largest=False,
            tol=residual_tolerance,
            maxiter=max_iterations,
        )
    order = np.argsort(values)
    values = values[order]
    vectors = vectors[:, order]
    residuals = apply_operator(vectors) - vectors * values[None, :]
    worst = float(np.max(np.linalg.norm(residuals[:, :count], axis=0) / np.abs(values[:count])))
    if not np.isfinite(worst) or worst > 100 * residual_tolerance:
        raise DiagonalizationError(
            f"block diagonalization did not converge: relative residual {worst:.3e}"
        )
    selected = vectors[:, :count].T.reshape(count, grid.points, grid.points)
    return _orthonormalize(grid, selected.astype(np.complex128))


def _two_loop(grid: Grid, gradient: np.ndarray, pairs) -> np.ndarray:
    q = gradient.copy()
    alphas = []
    for s, y, rho_inv in reversed(pairs):
        a = _inner(grid, s, q) / rho_inv
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, rho_inv = pairs[-1]
        q *= rho_inv / _inner(grid, y, y)
    for (s, y, rho_inv), a in zip(pairs, reversed(alphas)):
        b = _inner(grid, y, q) / rho_inv
        q += (a - b) * s
    return q


def lbfgs_minimize(
    initial: OrbitalSet,
    trap: ScalarField,
    alpha: float,
    n_particles: float | None = None,
    params: SolverParams | None = None,
    ref_width: float | None = None,
    callback=None,
) -> MinimizeResult:
    """Minimize the mean-field energy over orthonormal orbital sets.

    Monotone descent via Armijo backtracking; terminates when the tangent
    gradient norm per particle drops below the tolerance or the iteration
    budget is exhausted (reported distinctly).  On a failed line search the
    memory is dropped and a steepest-descent step is attempted once before
    giving up.
    """
    params = params or SolverParams()
    initial.require_orthonormal()
    grid = initial.grid
    n = float(initial.count if n_particles is None else n_particles)

    current = initial
    state = _energy_stage(current, trap, alpha, n, ref_width)
    energy = state.breakdown
    tangent = project_tangent(current, _gradient_stage(state))
    pairs: deque = deque(maxlen=params.lbfgs_history)
    energies = [energy.total]
    grad_norms = [_norm(grid, tangent)]
    last_step = 1.0
    converged = False
    iterations = 0

    def line_search(direction: np.ndarray, slope: float, first_step: float):
        step = first_step
        for _ in range(params.max_backtracks):
            try:
                candidate = retract(current, direction, step)
            except RetractionError:
                step *= params.backtrack_factor
                continue
            trial = _energy_stage(candidate, trap, alpha, n, ref_width)
            if trial.breakdown.total <= energy.total + params.sufficient_decrease * step * slope:
                return trial, step
            step *= params.backtrack_factor
        return None

    for iteration in range(1, params.max_iterations + 1):
        gnorm = grad_norms[-1]
        if gnorm / n < params.gradient_tolerance:
            converged = True
            break

        direction = -_two_loop(grid, tangent, pairs)
        slope = _inner(grid, tangent, direction)
        if slope >= 0.0:
            pairs.clear()
            direction = -tangent
            slope = -gnorm * gnorm
        first_step = last_step if not pairs else 1.0
        if not pairs:
            first_step = min(1.0, 1.0 / max(gnorm, 1e-30))

        found = line_search(direction, slope, first_step)
        if found is None and not np.array_equal(direction, -tangent):
            pairs.clear()
            direction = -tangent
            slope = -gnorm * gnorm
            found = line_search(direction, slope, min(1.0, 1.0 / max(gnorm, 1e-30)))
        if found is None:
            raise LineSearchError(
                f"line search failed at iteration {iteration} "
                f"(energy {energy.total:.12g}, |grad|/N {gnorm / n:.3e})"
            )
        new_state, accepted_step = found
        new_orbitals = new_state.orbitals
        last_step = accepted_step

        new_tangent = project_tangent(new_orbitals, _gradient_stage(new_state))

        # transport memory to the new tangent space by projection
        transported = deque(maxlen=params.lbfgs_history)
        for s, y, _ in pairs:
            s_t = project_tangent(new_orbitals, s)
            y_t = project_tangent(new_orbitals, y)
            sy = _inner(grid, s_t, y_t)
            if sy > params.curvature_skip * _norm(grid, s_t) * _norm(grid, y_t):
                transported.append((s_t, y_t, sy))
        pairs = transported

        step_vec = project_tangent(new_orbitals, accepted_step * direction)
        grad_change = new_tangent - project_tangent(new_orbitals, tangent)
        sy = _inner(grid, step_vec, grad_change)
        if sy > params.curvature_skip * _norm(grid, step_vec) * _norm(grid, grad_change):
            pairs.append((step_vec, grad_change, sy))

        current = new_orbitals
        energy = new_state.breakdown
        tangent = new_tangent
        energies.append(energy.total)
        grad_norms.append(_norm(grid, tangent))
        iterations = iteration
        if callback is not None:
            callback(iteration, current, energy)

    return MinimizeResult(
        orbitals=current,
        energy=energy,
        energies=np.array(energies),
        gradient_norms=np.array(grad_norms),
        iterations=iterations,
        converged=converged,
        termination="converged" if converged else "max_iterations",
    )
