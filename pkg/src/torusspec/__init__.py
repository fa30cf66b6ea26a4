"""Spectra, quantization, and homogenization on the flat torus.

The library has three legs that check each other: plane-wave spectra of
periodic Schrödinger operators, toroidal Weyl/Wigner quantization of
phase-space symbols, and effective Hamiltonians from the Hamilton-Jacobi
cell problem.  Isospectral potentials (translations, reflections) are used
throughout as exact cross-checks.
"""

__version__ = "0.1.0"

from .potentials import (FourierPotential, cosine, load_potential,
                         potential_extrema, save_potential, sine,
                         zero_potential)
from .spectra import (HamiltonianMatrix, PlaneWaveBasis, SpectrumResult,
                      assemble_hamiltonian, auto_cutoff, count_eigenvalues,
                      cutoff_certificate, eigen_spectrum, eigen_system,
                      truncation_tail_bound, weyl_count_report, weyl_volume)
from .symbols import (PhaseSpaceFunction, bump_profile, kinetic_symbol,
                      mechanical_symbol, potential_symbol, product_symbol,
                      symbol_from_terms)
from .weylquant import (WeylMatrix, cv_bound, projector_check, weyl_matrix,
                        wigner_pairing, wigner_transform)
from .dynamics import (PhasePoint, SymplecticMap, energy_drift, flow,
                       symplectic_defect, time_one_map, trajectory)
from .effective import (CellParams, EffectiveTable, action_J, cell_problem_solve,
                        closed_form_table, effective_1d, effective_grid,
                        infsup_upper, invariance_check, sublevel_set)
from .propagation import egorov_residual, egorov_scaling, propagate
from .isospectral import (IsospectralPair, Theorem2Report, bs_reconstruct,
                          make_pair, pair_from_potentials, spectra_compare,
                          theorem2_check, weyl_first_invariant)

__all__ = [name for name in dir() if not name.startswith("_")]
