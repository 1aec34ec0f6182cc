"""Excitation basis: which atoms of the chain carry a p-excitation.

A basis state for q shared excitations is a sorted q-tuple of atom
indices.  Atom and state indices are 1-based in every public interface;
the private ``atoms0`` array is the 0-based form consumed by the
numerical kernels.
"""

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np


@dataclass(frozen=True)
class ExcitationBasis:
    n_atoms: int
    q: int
    states: tuple = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.states)

    def index_of(self, state: tuple) -> int:
        """1-based position of a sorted atom tuple in the basis."""
        key = tuple(sorted(state))
        try:
            return self.states.index(key) + 1
        except ValueError:
            raise KeyError(f"{state} is not a basis state") from None

    def tuple_of(self, index: int) -> tuple:
        """Atom tuple (1-based atoms) for a 1-based state index."""
        if not 1 <= index <= len(self.states):
            raise IndexError(f"state index {index} outside 1..{len(self.states)}")
        return self.states[index - 1]

    @property
    def atoms0(self) -> np.ndarray:
        """(size, q) int64 array of 0-based atom indices, one row per state."""
        return np.asarray(self.states, dtype=np.int64) - 1

    def states_containing(self, atom: int) -> list:
        """1-based indices of all basis states whose tuple contains ``atom``."""
        return [i + 1 for i, s in enumerate(self.states) if atom in s]


def enumerate_basis(n_atoms: int, q: int) -> ExcitationBasis:
    """All sorted q-tuples of 1..n_atoms in lexicographic order."""
    if not 1 <= q < n_atoms:
        raise ValueError(f"need 1 <= q < n_atoms, got q={q}, n_atoms={n_atoms}")
    states = tuple(itertools.combinations(range(1, n_atoms + 1), q))
    assert len(states) == comb(n_atoms, q)
    return ExcitationBasis(n_atoms=n_atoms, q=q, states=states)
