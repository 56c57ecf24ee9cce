"""Momentum distributions, Laguerre projector kernels, Husimi level fillings."""

import math

import numpy as np
import pytest

from anyongas.grid import Grid, ScalarField, radial_average
from anyongas.hartree import OrbitalSet, compute_density
from anyongas.mtf import MtfModel
from anyongas.observables import (
    MC_MIN_SAMPLES,
    HusimiFilling,
    MomentumProfile,
    husimi_ll_filling,
    laguerre_kernel,
    localized_density,
    mc_momentum_profile,
    momentum_density,
    momentum_density_field,
    radial_symmetry_fraction,
    rescale_momentum_profile,
    tf_momentum_density_mc,
)


def radial_mass(profile: MomentumProfile) -> float:
    """Trapezoid quadrature of a radial profile, int t(p) 2 pi p dp."""
    return float(np.trapezoid(2.0 * math.pi * profile.momenta * profile.values, profile.momenta))


def lowest_level_states(grid: Grid, field_strength: float, count: int) -> OrbitalSet:
    """Exact constant-field lowest-level states, analytically normalized.

    For this field orientation the lowest level is spanned by
    conj(z)^m exp(-B|z|^2/4); the analytic L^2 norm is pi m! (2/B)^(m+1).
    """
    x, y = grid.meshgrid()
    z_conj = x - 1j * y
    r2 = x**2 + y**2
    states = np.empty((count, grid.points, grid.points), dtype=complex)
    for m in range(count):
        log_norm = 0.5 * (
            math.log(math.pi) + math.lgamma(m + 1) + (m + 1) * math.log(2.0 / field_strength)
        )
        states[m] = z_conj**m * np.exp(-0.25 * field_strength * r2 - log_norm)
    return OrbitalSet(grid, states)


class TestMomentumDensity:
    def test_plane_wave_concentrates(self):
        grid = Grid(8.0, 32)
        x, y = grid.meshgrid()
        k0 = (grid.wavenumbers[3], grid.wavenumbers[2])
        orbital = np.exp(1j * (k0[0] * x + k0[1] * y)) / grid.box_length
        field = momentum_density_field(OrbitalSet(grid, orbital[None]))
        flat = field.values.ravel()
        peak = np.argmax(flat)
        assert flat[peak] * field.grid.cell_area == pytest.approx(1.0, rel=1e-12)
        rest = flat.copy()
        rest[peak] = 0.0
        assert np.max(np.abs(rest)) < 1e-20 * flat[peak]
        # the peak sits at the orbital's lattice momentum
        dual = field.grid
        px, py = dual.meshgrid()
        assert px.ravel()[peak] == pytest.approx(k0[0], abs=1e-12)
        assert py.ravel()[peak] == pytest.approx(k0[1], abs=1e-12)

    def test_total_mass_equals_particle_number(self):
        from anyongas.stiefel import random_orthonormal

        grid = Grid(8.0, 32)
        orbitals = random_orthonormal(grid, 6, seed=3)
        assert momentum_density_field(orbitals).mass == pytest.approx(6.0, abs=1e-10)

    def test_oscillator_position_momentum_shape_identity(self):
        # ground state of -Lap + N|x|^2: rho and t are Gaussians mapped into
        # each other by p = sqrt(N) x; compare the two radial profiles.
        n_particles = 4.0
        omega = math.sqrt(n_particles)
        grid = Grid(10.0, 80)
        values = np.exp(-0.5 * omega * grid.radius() ** 2).astype(complex)
        values /= math.sqrt(float(np.sum(np.abs(values) ** 2)) * grid.cell_area)
        orbitals = OrbitalSet(grid, values[None])
        radii = np.linspace(0.0, 2.0, 21)
        position = radial_average(compute_density(orbitals), radii)
        momentum = momentum_density(orbitals, momenta=radii * omega)
        ratio = momentum.values[0] / position.values[0]
        # 1e-6: wrap-around floor of the dual-lattice circle averages
        assert np.allclose(momentum.values, ratio * position.values, atol=1e-6 * momentum.values[0])

    def test_rescaling_preserves_quadrature_mass_exactly(self):
        momenta = np.linspace(0.0, 12.0, 200)
        values = np.exp(-momenta * momenta / 9.0)
        profile = MomentumProfile(momenta, values)
        scaled = rescale_momentum_profile(profile, 25.0)
        assert radial_mass(scaled) == pytest.approx(radial_mass(profile) / 25.0, rel=1e-12)

    def test_rescaling_identity_for_single_particle(self):
        profile = MomentumProfile(np.linspace(0, 1, 5), np.ones(5))
        scaled = rescale_momentum_profile(profile, 1.0)
        assert np.array_equal(scaled.momenta, profile.momenta)
        assert np.array_equal(scaled.values, profile.values)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            MomentumProfile(np.zeros(3), np.zeros(4))


class TestMcMomentumDensity:
    def test_alpha_zero_matches_closed_form(self):
        model = MtfModel(25.0, 0.0, 2.0)
        lam = model.chemical_potential
        for p in (0.0, 3.0, 6.0, 8.0):
            value, stderr = tf_momentum_density_mc(model, p, 200_000, seed=11)
            exact = max(lam - p * p / 25.0, 0.0) / (4.0 * math.pi)
            assert abs(value - exact) <= 3.0 * stderr + 1e-12

    def test_zero_beyond_support_bound(self):
        model = MtfModel(25.0, 0.75, 2.0)
        value, stderr = tf_momentum_density_mc(model, model.momentum_width() * 1.01, 20_000, seed=3)
        assert value == 0.0 and stderr == 0.0

    def test_deterministic_for_fixed_seed(self):
        model = MtfModel(9.0, 0.4, 2.0)
        assert tf_momentum_density_mc(model, 2.0, 50_000, seed=7) == tf_momentum_density_mc(
            model, 2.0, 50_000, seed=7
        )

    def test_minimum_samples_enforced(self):
        model = MtfModel(9.0, 0.4, 2.0)
        with pytest.raises(ValueError, match="samples"):
            tf_momentum_density_mc(model, 2.0, MC_MIN_SAMPLES - 1, seed=0)

    def test_mass_conservation_within_errors(self):
        model = MtfModel(9.0, 0.0, 2.0)
        top = math.sqrt(9.0 * model.chemical_potential) * 1.02
        profile = mc_momentum_profile(model, np.linspace(0.0, top, 80), 40_000, seed=21)
        mass = radial_mass(profile)
        weights = 2.0 * math.pi * profile.momenta * np.gradient(profile.momenta)
        combined = math.sqrt(float(np.sum((weights * profile.stderr) ** 2)))
        assert abs(mass - 9.0) <= 3.0 * combined + 0.02 * 9.0  # quadrature bias allowance

    def test_error_exponent_minus_half(self):
        model = MtfModel(25.0, 0.0, 2.0)
        sizes = [10_000, 40_000, 160_000, 640_000]
        spreads = []
        for n in sizes:
            estimates = [tf_momentum_density_mc(model, 3.0, n, seed=s)[0] for s in range(16)]
            spreads.append(np.std(estimates))
        slope = np.polyfit(np.log(sizes), np.log(spreads), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.1)

    def test_unbiased_against_closed_form(self):
        model = MtfModel(25.0, 0.0, 2.0)
        exact = (model.chemical_potential - 9.0 / 25.0) / (4.0 * math.pi)
        estimates = np.array(
            [tf_momentum_density_mc(model, 3.0, 40_000, seed=s)[0] for s in range(24)]
        )
        pooled_error = np.std(estimates) / math.sqrt(len(estimates))
        assert abs(np.mean(estimates) - exact) <= 4.0 * pooled_error

    def test_rescaled_profiles_overlay_across_particle_number(self):
        # The rescaled semi-classical profile depends on N only through
        # alpha*sqrt(N); with that combination fixed (and 1/alpha an integer,
        # so the statistics constant is exactly 1 for both) the rescaled
        # curves coincide up to sampling noise.
        momenta_scaled = np.linspace(0.0, 2.5, 8)
        profiles = {}
        for n, alpha in ((25.0, 0.1), (100.0, 0.05)):
            model = MtfModel(n, alpha, 2.0)
            raw = mc_momentum_profile(model, momenta_scaled * math.sqrt(n), 60_000, seed=5)
            profiles[n] = rescale_momentum_profile(raw, n)
        small, large = profiles[25.0], profiles[100.0]
        for a, b, ea, eb in zip(small.values, large.values, small.stderr, large.stderr):
            assert abs(a - b) <= 3.0 * math.hypot(ea, eb) + 1e-12


class TestLaguerreKernel:
    def test_diagonal_value(self):
        point = np.array([0.3, -0.2])
        for level in (0, 1, 4):
            value = laguerre_kernel(20.0, level, point, point)
            assert value == pytest.approx(20.0 / (2.0 * math.pi), rel=1e-12)

    def test_hermitian(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            x, y = rng.normal(size=(2, 2))
            forward = laguerre_kernel(15.0, 2, x, y)
            backward = laguerre_kernel(15.0, 2, y, x)
            assert forward == pytest.approx(np.conj(backward), rel=1e-12)

    def test_polynomial_values_through_kernel_ratios(self):
        # ratio of kernels at the same separation isolates L_n(B d^2/2)
        b = 8.0
        x = np.array([0.0, 0.0])
        for t_target, level, expected in ((0.3, 1, 0.7), (2.0, 2, -1.0)):
            d = math.sqrt(2.0 * t_target / b)
            y = np.array([d, 0.0])
            ratio = laguerre_kernel(b, level, x, y) / laguerre_kernel(b, 0, x, y)
            assert ratio.real == pytest.approx(expected, rel=1e-12)
            assert abs(ratio.imag) < 1e-12

    def test_projector_idempotency_by_quadrature(self):
        b = 20.0
        half_width, dz = 2.0, 0.02
        axis = np.arange(-half_width, half_width + dz / 2, dz)
        z1, z2 = np.meshgrid(axis, axis, indexing="ij")
        zs = np.stack([z1.ravel(), z2.ravel()], axis=-1)
        x = np.array([0.12, -0.07])
        y = np.array([-0.05, 0.11])
        scale = b / (2.0 * math.pi)
        for level in (0, 1, 2):
            left = laguerre_kernel(b, level, x[None, :], zs)
            right = laguerre_kernel(b, level, zs, y[None, :])
            composed = np.sum(left * right) * dz * dz
            direct = laguerre_kernel(b, level, x, y)
            assert abs(composed - direct) < 1e-6 * scale
        # distinct levels compose to zero
        cross = np.sum(
            laguerre_kernel(b, 0, x[None, :], zs) * laguerre_kernel(b, 1, zs, y[None, :])
        ) * dz * dz
        assert abs(cross) < 1e-6 * scale

    def test_invalid_arguments(self):
        point = np.zeros(2)
        with pytest.raises(ValueError):
            laguerre_kernel(0.0, 0, point, point)
        with pytest.raises(ValueError):
            laguerre_kernel(1.0, -1, point, point)


class TestHusimiFilling:
    # Constant-field check: filling the lowest level out to radius well past
    # the window makes m(0,0) = (B/2pi) * q/(1+q) with q = B eps^2, and each
    # higher level is suppressed by another factor 1/(1+q) (Gaussian window
    # mixing; closed-form two-Gaussian integrals).
    field = 49.0
    epsilon = 5.0 / 7.0  # q = B eps^2 = 25

    @pytest.fixture(scope="class")
    def filled_level(self):
        grid = Grid(8.0, 80)
        return lowest_level_states(grid, self.field, 85)

    def test_synthetic_landau_fillings(self, filled_level):
        fillings = husimi_ll_filling(filled_level, self.epsilon, self.field, (0.0, 0.0), n_max=2)
        scale = self.field / (2.0 * math.pi)
        q = self.field * self.epsilon**2
        values = np.array([f.value for f in fillings]) / scale
        assert values[0] == pytest.approx(q / (1.0 + q), abs=2e-3)
        assert abs(values[0] - 1.0) < 0.05
        assert np.all(values[1:] < 0.05)
        assert values[1] == pytest.approx(q / (1.0 + q) ** 2, abs=2e-3)

    def test_completeness_sum_matches_localized_density(self, filled_level):
        smeared = localized_density(filled_level, self.epsilon, (0.0, 0.0))
        gaps = []
        for n_max in (0, 1, 2):
            fillings = husimi_ll_filling(
                filled_level, self.epsilon, self.field, (0.0, 0.0), n_max=n_max
            )
            gaps.append(abs(sum(f.value for f in fillings) - smeared))
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-3 * smeared

    def test_pauli_bound(self, filled_level):
        scale = self.field / (2.0 * math.pi)
        fillings = husimi_ll_filling(filled_level, self.epsilon, self.field, (0.0, 0.0), n_max=4)
        for f in fillings:
            assert -1e-8 * scale <= f.value <= scale + 1e-8

    def test_normalization_passthrough(self, filled_level):
        fillings = husimi_ll_filling(
            filled_level, self.epsilon, self.field, (0.0, 0.0), n_max=1, normalization=2.0
        )
        for f in fillings:
            assert f.normalized == pytest.approx(f.value / 2.0, rel=1e-12)
        assert isinstance(fillings[0], HusimiFilling)

    def test_window_exceeding_box_rejected(self, filled_level):
        with pytest.raises(ValueError, match="window"):
            husimi_ll_filling(filled_level, 1.2, self.field, (0.0, 0.0), n_max=1)
        with pytest.raises(ValueError, match="window"):
            husimi_ll_filling(filled_level, 0.5, self.field, (2.0, 0.0), n_max=1)

    def test_epsilon_window_warnings(self, filled_level):
        with pytest.warns(UserWarning, match="magnetic length"):
            husimi_ll_filling(filled_level, 0.1, self.field, (0.0, 0.0), n_max=0)
        grid = filled_level.grid
        with pytest.warns(UserWarning, match="box"):
            husimi_ll_filling(filled_level, 0.095 * grid.box_length, self.field, (0.0, 0.0), n_max=0)


class TestRadialSymmetryFraction:
    def test_radial_field_scores_high(self):
        grid = Grid(8.0, 64)
        field = ScalarField(grid, np.exp(-grid.radius() ** 2))
        assert radial_symmetry_fraction(field) > 0.99

    def test_angular_field_scores_low(self):
        grid = Grid(8.0, 64)
        x, y = grid.meshgrid()
        theta = np.arctan2(y, x)
        field = ScalarField(grid, np.cos(4 * theta) * np.exp(-grid.radius() ** 2))
        assert radial_symmetry_fraction(field) < 0.5
