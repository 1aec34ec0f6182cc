"""Exciton spectra: eigen-decomposition with a deterministic sign gauge.

Vectors are columns, energies ascend.  Two gauges appear in practice:
``largest-entry-positive`` for a standalone diagonalization and
``aligned`` after sign-matching against the previous step of a moving
geometry.
"""

from dataclasses import dataclass

import numpy as np

from .hamiltonian import ElectronicHamiltonian
from . import kernels


@dataclass(frozen=True)
class ExcitonSpectrum:
    energies: np.ndarray      # (size,) ascending, rad/us
    vectors: np.ndarray       # (size, size), column k belongs to energies[k]
    gauge: str = "largest-entry-positive"
    min_overlap: float = 1.0  # diagonal-overlap floor from the last alignment

    @property
    def size(self) -> int:
        return self.energies.shape[0]

    def vector(self, k: int) -> np.ndarray:
        """Eigenvector for 1-based surface index k."""
        if not 1 <= k <= self.size:
            raise ValueError(f"surface index {k} outside 1..{self.size}")
        return self.vectors[:, k - 1]


def diagonalize(h: ElectronicHamiltonian, positions) -> ExcitonSpectrum:
    """Spectrum of the Hamiltonian at the given geometry.

    Raises ValueError if a precomputed matrix is passed in and is not
    symmetric.
    """
    if isinstance(positions, np.ndarray) and positions.ndim == 2:
        H = positions
        if not np.allclose(H, H.T, atol=1e-12 * max(1.0, np.abs(H).max())):
            raise ValueError("Hamiltonian matrix is not symmetric")
        H = np.ascontiguousarray(H, dtype=np.float64)
    else:
        H = h.matrix(positions)
    w, v = kernels.eigh_gauged(H)
    return ExcitonSpectrum(energies=w, vectors=v)


def align_gauge(current: ExcitonSpectrum, previous: ExcitonSpectrum) -> ExcitonSpectrum:
    """Flip current eigenvector signs to follow the previous spectrum.

    Ordering stays by energy; only signs change.  The smallest diagonal
    overlap found is stored so callers can audit continuity.
    """
    if current.size != previous.size:
        raise ValueError("spectrum dimensions differ")
    v = current.vectors.copy()
    min_ov = kernels.align_columns(v, previous.vectors)
    return ExcitonSpectrum(energies=current.energies, vectors=v,
                           gauge="aligned", min_overlap=float(min_ov))
