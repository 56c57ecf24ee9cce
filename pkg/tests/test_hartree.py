"""Mean-field energy, current, exact gradient, and the checkpoint format."""

import math
import struct

import numpy as np
import pytest

from anyongas.gauge import GaussianReference, solve_vector_potential
from anyongas.grid import Grid, ScalarField, fft2, ifft2
from anyongas.hartree import (
    CHECKPOINT_MAGIC,
    EnergyBreakdown,
    OrbitalSet,
    compute_current,
    compute_density,
    energy_gradient,
    hartree_energy,
    load_checkpoint,
    power_law_trap,
    save_checkpoint,
)
from anyongas.stiefel import project_tangent, random_orthonormal


@pytest.fixture
def grid():
    return Grid(8.0, 32)


@pytest.fixture
def trap(grid):
    return power_law_trap(grid, 2.0)


def normalized_gaussian(grid, width):
    values = np.exp(-grid.radius() ** 2 / (2.0 * width**2)).astype(complex)
    norm = math.sqrt(float(np.sum(np.abs(values) ** 2)) * grid.cell_area)
    return values / norm


def plane_wave_orbital(grid, index1, index2):
    x, y = grid.meshgrid()
    k1 = grid.wavenumbers[index1]
    k2 = grid.wavenumbers[index2]
    return np.exp(1j * (k1 * x + k2 * y)) / grid.box_length, (k1, k2)


class TestOrbitalSet:
    def test_shape_validation(self, grid):
        with pytest.raises(ValueError):
            OrbitalSet(grid, np.zeros((2, 8, 8), dtype=complex))

    def test_gram_of_random_set(self, grid):
        orbitals = random_orthonormal(grid, 5, seed=1)
        assert orbitals.gram_deviation() < 1e-12
        orbitals.require_orthonormal()

    def test_require_orthonormal_rejects(self, grid):
        bad = OrbitalSet(grid, np.ones((2, 32, 32), dtype=complex))
        with pytest.raises(ValueError, match="orthonormal"):
            bad.require_orthonormal()


class TestDensity:
    def test_single_gaussian(self, grid):
        orbital = normalized_gaussian(grid, 0.8)
        density = compute_density(OrbitalSet(grid, orbital[None]))
        assert np.allclose(density.values, np.abs(orbital) ** 2)
        assert density.mass == pytest.approx(1.0, abs=1e-12)

    def test_plane_waves_give_uniform_density(self, grid):
        u1, _ = plane_wave_orbital(grid, 0, 0)
        u2, _ = plane_wave_orbital(grid, 1, 2)
        u3, _ = plane_wave_orbital(grid, 3, 1)
        density = compute_density(OrbitalSet(grid, np.stack([u1, u2, u3])))
        assert np.allclose(density.values, 3.0 / grid.box_length**2, rtol=1e-12)

    def test_random_set_mass(self, grid):
        orbitals = random_orthonormal(grid, 7, seed=2)
        assert compute_density(orbitals).mass == pytest.approx(7.0, abs=1e-10)


class TestCurrent:
    def test_real_orbitals_no_gauge(self):
        # box sized so the Gaussian tails vanish at the boundary to machine level
        big = Grid(14.0, 64)
        values = np.stack([normalized_gaussian(big, 0.7), normalized_gaussian(big, 0.8)])
        orbitals = OrbitalSet(big, values)  # not orthonormal; current is still defined
        zero_gauge = solve_vector_potential(
            compute_density(orbitals), GaussianReference(compute_density(orbitals).mass, 1.0)
        )
        current = compute_current(orbitals, zero_gauge, 0.0)
        assert np.max(np.abs(current.comp1)) < 1e-12
        assert np.max(np.abs(current.comp2)) < 1e-12

    def test_plane_wave_uniform_current(self, grid):
        u, k0 = plane_wave_orbital(grid, 2, 5)
        orbitals = OrbitalSet(grid, u[None])
        gauge = solve_vector_potential(
            compute_density(orbitals), GaussianReference(1.0, 1.0)
        )
        current = compute_current(orbitals, gauge, 0.0)
        assert np.allclose(current.comp1, k0[0] / grid.box_length**2, atol=1e-12)
        assert np.allclose(current.comp2, k0[1] / grid.box_length**2, atol=1e-12)

    def test_real_orbitals_gauge_part_only(self):
        big = Grid(14.0, 64)
        values = normalized_gaussian(big, 0.8)[None]
        orbitals = OrbitalSet(big, values)
        density = compute_density(orbitals)
        gauge = solve_vector_potential(density, GaussianReference(density.mass, 1.0))
        alpha = 0.6
        current = compute_current(orbitals, gauge, alpha)
        assert np.allclose(current.comp1, alpha * density.values * gauge.comp1, atol=1e-12)
        assert np.allclose(current.comp2, alpha * density.values * gauge.comp2, atol=1e-12)


class TestEnergy:
    def test_plane_wave_kinetic_only(self, grid):
        u, k0 = plane_wave_orbital(grid, 4, 30)
        zero_trap = ScalarField(grid, np.zeros((32, 32)))
        breakdown = hartree_energy(OrbitalSet(grid, u[None]), zero_trap, 0.0, 1)
        assert breakdown.total == pytest.approx(k0[0] ** 2 + k0[1] ** 2, rel=1e-12)
        assert breakdown.potential == 0.0

    def test_oscillator_shell_sum(self):
        # Analytic eigenstates of -Lap + N|x|^2 for N=4: shells (0,0), (1,0), (0,1), (1,1)+...
        # lowest four orbitals have n+m in {0, 1, 1, 2}; energies 2 sqrt(N) (n+m+1).
        n_particles = 4
        grid = Grid(10.0, 64)
        omega = math.sqrt(n_particles)
        x, y = grid.meshgrid()
        gauss = np.exp(-0.5 * omega * (x**2 + y**2))
        hermites = [gauss, x * gauss, y * gauss, x * y * gauss]
        orbitals = []
        for h in hermites:
            h = h.astype(complex)
            orbitals.append(h / math.sqrt(float(np.sum(np.abs(h) ** 2)) * grid.cell_area))
        state = OrbitalSet(grid, np.stack(orbitals))
        assert state.gram_deviation() < 1e-10
        trap = power_law_trap(grid, 2.0)
        expected = 2.0 * omega * (1 + 2 + 2 + 3)
        total = hartree_energy(state, trap, 0.0, n_particles).total
        assert total == pytest.approx(expected, rel=1e-6)

    def test_alpha_continuity_at_zero(self, grid, trap):
        orbitals = random_orthonormal(grid, 3, seed=4)
        at_zero = hartree_energy(orbitals, trap, 0.0, 3).total
        nearby = hartree_energy(orbitals, trap, 1e-8, 3).total
        assert abs(nearby - at_zero) < 1e-5 * abs(at_zero)

    def test_alpha_zero_equals_linear_quadratic_form(self, grid, trap):
        orbitals = random_orthonormal(grid, 3, seed=5)
        breakdown = hartree_energy(orbitals, trap, 0.0, 3)
        u = orbitals.orbitals
        # independent evaluation of sum <u, (-Lap + N V) u>
        u_hat = fft2(u)
        kinetic = grid.cell_area * float(np.sum(grid.k_squared * np.abs(u_hat) ** 2)) / grid.points**2
        potential = 3.0 * grid.cell_area * float(
            np.sum(trap.values * np.sum(np.abs(u) ** 2, axis=0))
        )
        assert breakdown.kinetic_gauge == pytest.approx(kinetic, rel=1e-12)
        assert breakdown.potential == pytest.approx(potential, rel=1e-12)

    def test_breakdown_total(self):
        breakdown = EnergyBreakdown(1.5, 2.25)
        assert breakdown.total == pytest.approx(3.75, rel=1e-12)

    def test_rejects_negative_trap(self, grid):
        orbitals = random_orthonormal(grid, 1, seed=6)
        with pytest.raises(ValueError, match="nonnegative"):
            hartree_energy(orbitals, ScalarField(grid, np.full((32, 32), -1.0)), 0.0)

    def test_rejects_alpha_out_of_range(self, grid, trap):
        orbitals = random_orthonormal(grid, 1, seed=6)
        with pytest.raises(ValueError, match=r"\[0, 1\)"):
            hartree_energy(orbitals, trap, 1.0)


class TestGradient:
    def test_alpha_zero_is_linear_operator(self, grid, trap):
        orbitals = random_orthonormal(grid, 2, seed=7)
        gradient = energy_gradient(orbitals, trap, 0.0, 2)
        u = orbitals.orbitals
        linear = ifft2(grid.k_squared * fft2(u)) + 2.0 * trap.values * u
        assert np.max(np.abs(gradient - 2.0 * linear)) < 1e-10 * np.max(np.abs(gradient))

    @pytest.mark.parametrize("n_orbitals", [1, 2, 4])
    @pytest.mark.parametrize("alpha", [0.0, 0.3, 0.75])
    def test_finite_difference_consistency(self, grid, trap, n_orbitals, alpha):
        orbitals = random_orthonormal(grid, n_orbitals, seed=10 * n_orbitals + 1)
        gradient = energy_gradient(orbitals, trap, alpha, n_orbitals)
        rng = np.random.default_rng(99)
        cell = grid.cell_area
        for _ in range(3):
            delta = rng.normal(size=orbitals.orbitals.shape) + 1j * rng.normal(
                size=orbitals.orbitals.shape
            )
            delta = project_tangent(orbitals, delta)
            delta /= math.sqrt(cell * float(np.sum(np.abs(delta) ** 2)))
            step = 1e-5
            plus = OrbitalSet(grid, orbitals.orbitals + step * delta)
            minus = OrbitalSet(grid, orbitals.orbitals - step * delta)
            fd = (
                hartree_energy(plus, trap, alpha, n_orbitals).total
                - hartree_energy(minus, trap, alpha, n_orbitals).total
            ) / (2.0 * step)
            paired = cell * float(np.sum(gradient.conj() * delta).real)
            assert fd == pytest.approx(paired, rel=1e-6)


class TestCheckpoint:
    def test_round_trip_and_byte_layout(self, grid, tmp_path):
        orbitals = random_orthonormal(grid, 3, seed=8)
        path = tmp_path / "state.anyh"
        save_checkpoint(path, orbitals, 0.4, 2.0)
        raw = path.read_bytes()
        magic, version, points, length, count, alpha, exponent = struct.unpack_from(
            "<4sIIdIdd", raw
        )
        assert magic == CHECKPOINT_MAGIC
        assert (version, points, count) == (1, 32, 3)
        assert (length, alpha, exponent) == (8.0, 0.4, 2.0)
        assert len(raw) == struct.calcsize("<4sIIdIdd") + 3 * 32 * 32 * 16
        # interleaved little-endian (re, im) pairs, orbital-major, row-major
        first = struct.unpack_from("<2d", raw, struct.calcsize("<4sIIdIdd"))
        assert complex(*first) == orbitals.orbitals[0, 0, 0]

        restored, meta = load_checkpoint(path)
        assert meta == {"alpha": 0.4, "trap_exponent": 2.0}
        assert np.array_equal(restored.orbitals, orbitals.orbitals)
        assert restored.gram_deviation() < 1e-12

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "junk.anyh"
        path.write_bytes(b"NOPE" + bytes(36))
        with pytest.raises(ValueError, match="magic"):
            load_checkpoint(path)

    def test_rejects_truncated(self, grid, tmp_path):
        orbitals = random_orthonormal(grid, 1, seed=9)
        path = tmp_path / "state.anyh"
        save_checkpoint(path, orbitals, 0.0, 2.0)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError, match="size"):
            load_checkpoint(path)
