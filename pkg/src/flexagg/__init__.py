"""Flexible atom chains carrying shared dipole-coupled excitations.

Builds and diagonalizes the excitation Hamiltonian of a 1D chain,
classifies two-excitation eigenstates against tensor-product structure,
and propagates quantum-classical dynamics with fewest-switches surface
hopping, aggregated over stochastic trajectory ensembles.
"""

from .basis import ExcitationBasis, enumerate_basis
from .config import AggregateConfig
from .decompose import ProductDecomposition, decompose_biexcitons, tensor_embed
from .dynamics import (HopRecord, TrajectoryState, attempt_hop,
                       nonadiabatic_coupling, run_trajectory, step_electronic,
                       step_nuclear, surface_force)
from .ensemble import (EnsembleObservables, InitialSampler, aggregate,
                       excitation_weight, run_ensemble, sample_initials)
from .hamiltonian import (ElectronicHamiltonian, build_hamiltonian,
                          hamiltonian_gradient)
from .scenarios import resolve_scenario
from .spectra import ExcitonSpectrum, align_gauge, diagonalize
from .units import lifetime_estimate

__version__ = "0.1.0"

__all__ = [
    "AggregateConfig",
    "ElectronicHamiltonian",
    "EnsembleObservables",
    "ExcitationBasis",
    "ExcitonSpectrum",
    "HopRecord",
    "InitialSampler",
    "ProductDecomposition",
    "TrajectoryState",
    "align_gauge",
    "aggregate",
    "attempt_hop",
    "build_hamiltonian",
    "decompose_biexcitons",
    "diagonalize",
    "enumerate_basis",
    "excitation_weight",
    "hamiltonian_gradient",
    "lifetime_estimate",
    "nonadiabatic_coupling",
    "resolve_scenario",
    "run_ensemble",
    "run_trajectory",
    "sample_initials",
    "step_electronic",
    "step_nuclear",
    "surface_force",
    "tensor_embed",
]
