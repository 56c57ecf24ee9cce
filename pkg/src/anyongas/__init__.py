"""Ground states of trapped 2D abelian anyons in the self-consistent
magnetic-field (Chern-Simons-Schroedinger) mean-field approximation,
with closed-form Thomas-Fermi reference theories and phase-space
observables."""

from .grid import (
    Grid,
    ScalarField,
    VectorField,
    RadialProfile,
    size_grid,
    forward_transform,
    inverse_transform,
    radial_average,
    bessel_j0,
    momentum_grid,
)
from .gauge import (
    GaussianReference,
    reference_potential,
    solve_vector_potential,
    current_convolution,
    MassMismatchError,
)
from .mtf import (
    MtfModel,
    mtf_constant,
    homogeneous_energy_density,
    mtf_chemical_potential,
    theoretical_ll_filling,
    theoretical_ll_fillings,
    LandauSpectrum,
    landau_spectrum,
    reference_table,
)

__version__ = "0.1.0"
