"""Exact simulation of photon exchange interactions in atomic ensembles.

Checks that conditional two-photon evolution through linearly responding
atoms factorizes into single-photon evolutions, and shows how saturable
(two-level) atoms break that factorization.
"""
from .conditional import (
    ConditionalAmplitudes,
    FactorizationReport,
    factorization_report,
    predict_product,
    prepare_initial,
    project_ground,
    single_photon_transfer,
    transfer_matrix,
)
from .dynamics import SectorHamiltonian, StateVector, build_hamiltonian, evolve, evolve_window
from .model import CouplingScaling, ModelSpec, SectorBasis, Species, build_basis, make_spec, random_mode_functions

__version__ = "0.1.0"
