"""Electronic Hamiltonian for a chain sharing one or two excitations.

Off-diagonal entries are the dipole-dipole hopping C3/R^3 between the
two atoms by which a pair of basis states differs; every diagonal entry
carries the same repulsive short-range shift sum_{l<k} C6/R_lk^6, so the
diagonal is a multiple of the identity and leaves eigenvectors untouched.
"""

from dataclasses import dataclass, field

import numpy as np

from .basis import ExcitationBasis, enumerate_basis
from . import kernels


@dataclass(frozen=True)
class ElectronicHamiltonian:
    """Basis plus interaction constants, with precomputed coupling tables."""

    basis: ExcitationBasis
    c3: float
    c6: float
    tables: tuple = field(repr=False, default=None)

    def __post_init__(self):
        if self.tables is None:
            tabs = kernels.coupling_tables(self.basis.atoms0, self.basis.n_atoms)
            object.__setattr__(self, "tables", tabs)

    def matrix(self, positions: np.ndarray) -> np.ndarray:
        """Dense (size, size) Hamiltonian at the given atom positions."""
        positions = _check_positions(positions, self.basis.n_atoms)
        ent_i, ent_j, ent_a, ent_b, pair_l, pair_k, _ = self.tables
        H = np.empty((self.basis.size, self.basis.size))
        kernels.fill_hamiltonian(H, positions, ent_i, ent_j, ent_a, ent_b,
                                 pair_l, pair_k, self.c3, self.c6)
        return H

    def gradient(self, positions: np.ndarray, atom: int) -> np.ndarray:
        """Entrywise derivative of the matrix with respect to one atom position.

        ``atom`` is 1-based like the rest of the public surface.
        """
        positions = _check_positions(positions, self.basis.n_atoms)
        if not 1 <= atom <= self.basis.n_atoms:
            raise ValueError(f"atom index {atom} outside 1..{self.basis.n_atoms}")
        ent_i, ent_j, ent_a, ent_b, pair_l, pair_k, _ = self.tables
        G = np.empty((self.basis.size, self.basis.size))
        kernels.fill_gradient(G, positions, atom - 1, ent_i, ent_j, ent_a, ent_b,
                              pair_l, pair_k, self.c3, self.c6)
        return G


def _check_positions(positions, n_atoms):
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    if positions.shape != (n_atoms,):
        raise ValueError(f"expected {n_atoms} positions, got shape {positions.shape}")
    diffs = positions[:, None] - positions[None, :]
    np.fill_diagonal(diffs, np.inf)
    if np.any(np.abs(diffs) == 0.0):
        raise ValueError("coincident atom positions")
    return positions


def build_hamiltonian(basis_or_n, q=None, *, c3, c6, positions=None):
    """Construct an ElectronicHamiltonian, optionally evaluating it.

    Accepts either an ExcitationBasis or (n_atoms, q).  With ``positions``
    given, returns (hamiltonian, matrix); otherwise just the hamiltonian.
    """
    if isinstance(basis_or_n, ExcitationBasis):
        basis = basis_or_n
    else:
        basis = enumerate_basis(int(basis_or_n), int(q))
    ham = ElectronicHamiltonian(basis=basis, c3=float(c3), c6=float(c6))
    if positions is not None:
        return ham, ham.matrix(positions)
    return ham


def hamiltonian_gradient(ham: ElectronicHamiltonian, positions, atom: int):
    """Functional form of :meth:`ElectronicHamiltonian.gradient`."""
    return ham.gradient(positions, atom)
