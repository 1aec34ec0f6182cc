"""Classify two-excitation eigenstates against tensor-product candidates.

A partition (A, B) of the chain defines three candidate families for
each eigenstate: single-excitation products phi_A(k) x phi_B(l), states
with both excitations inside A, and states with both inside B.  The
both-inside families come from the two-excitation problem restricted to
that subset; on a three-atom subset these are the particle-hole inverted
excitons, on a two-atom subset the single doubly-excited state.

Fidelity is the amplitude overlap |<state|candidate>|.  Sub-problems are
diagonalized in isolation, ignoring any coupling between A and B.
"""

from dataclasses import dataclass

import numpy as np

from .basis import ExcitationBasis, enumerate_basis
from .hamiltonian import ElectronicHamiltonian
from .spectra import ExcitonSpectrum, diagonalize

PRODUCT_THRESHOLD = 0.99
INVERTED_THRESHOLD = 0.95


@dataclass(frozen=True)
class Verdict:
    """Classification of one two-excitation eigenstate."""

    state: int            # 1-based index in the full spectrum
    energy: float
    kind: str             # "product" | "inverted" | "entangled"
    fidelity: float
    k_a: int = 0          # product: sub-spectrum index on A (1-based)
    k_b: int = 0          # product: sub-spectrum index on B
    subset: str = ""      # inverted: which subset holds both excitations
    k_inv: int = 0        # inverted: index in the restricted spectrum


@dataclass(frozen=True)
class ProductDecomposition:
    partition: tuple      # (atoms_a, atoms_b), 1-based, each sorted
    verdicts: tuple       # one Verdict per eigenstate, in energy order

    def counts(self):
        """Number of verdicts per kind, as a dict."""
        out = {"product": 0, "inverted": 0, "entangled": 0}
        for v in self.verdicts:
            out[v.kind] += 1
        return out

    def rows(self):
        """(state, energy, verdict, k_A, k_B, fidelity) report tuples."""
        rows = []
        for v in self.verdicts:
            if v.kind == "product":
                ka, kb = v.k_a, v.k_b
                label = "product"
            elif v.kind == "inverted":
                ka = v.k_inv if v.subset == "A" else 0
                kb = v.k_inv if v.subset == "B" else 0
                label = f"inverted-{v.subset}"
            else:
                ka = kb = 0
                label = "entangled"
            rows.append((v.state, v.energy, label, ka, kb, v.fidelity))
        return rows


def _check_partition(atoms_a, atoms_b, n_atoms):
    a = tuple(sorted(int(x) for x in atoms_a))
    b = tuple(sorted(int(x) for x in atoms_b))
    if set(a) & set(b):
        raise ValueError("partition subsets overlap")
    if set(a) | set(b) != set(range(1, n_atoms + 1)):
        raise ValueError("partition does not cover all atoms")
    return a, b


def tensor_embed(phi_a, phi_b, basis: ExcitationBasis, atoms_a, atoms_b):
    """Two-excitation coefficients of a product of one-excitation states.

    ``phi_a``/``phi_b`` hold one amplitude per atom of their subset, in
    ascending atom order.  The coefficient of |n,m> with n in A and m in
    B is phi_a(n)*phi_b(m); states with both excitations in the same
    subset get zero.  The result is normalized.
    """
    if basis.q != 2:
        raise ValueError("tensor_embed needs a two-excitation basis")
    atoms_a, atoms_b = _check_partition(atoms_a, atoms_b, basis.n_atoms)
    phi_a = np.asarray(phi_a, dtype=np.float64)
    phi_b = np.asarray(phi_b, dtype=np.float64)
    if phi_a.shape != (len(atoms_a),) or phi_b.shape != (len(atoms_b),):
        raise ValueError("amplitude vectors do not match subset sizes")
    amp_a = dict(zip(atoms_a, phi_a))
    amp_b = dict(zip(atoms_b, phi_b))
    out = np.zeros(basis.size)
    for idx, (n, m) in enumerate(basis.states):
        if n in amp_a and m in amp_b:
            out[idx] = amp_a[n] * amp_b[m]
        elif m in amp_a and n in amp_b:
            out[idx] = amp_a[m] * amp_b[n]
    norm = np.linalg.norm(out)
    if norm == 0.0:
        raise ValueError("product has no support in the basis")
    return out / norm


def restricted_embed(vec, sub_basis: ExcitationBasis, basis: ExcitationBasis, atoms):
    """Lift a restricted two-excitation eigenvector into the full basis."""
    atoms = tuple(sorted(atoms))
    out = np.zeros(basis.size)
    for local_idx, (la, lb) in enumerate(sub_basis.states):
        pair = tuple(sorted((atoms[la - 1], atoms[lb - 1])))
        out[basis.index_of(pair) - 1] = vec[local_idx]
    return out


def _sub_spectrum(positions, atoms, q, c3, c6):
    """Spectrum of the q-excitation problem on a subset, couplings intra-subset only."""
    sub_pos = np.asarray([positions[a - 1] for a in atoms], dtype=np.float64)
    if q == len(atoms):
        # saturated subset: the single state with every atom excited
        sub_basis = ExcitationBasis(n_atoms=q, q=q,
                                    states=(tuple(range(1, q + 1)),))
    else:
        sub_basis = enumerate_basis(len(atoms), q)
    ham = ElectronicHamiltonian(basis=sub_basis, c3=c3, c6=c6)
    return sub_basis, diagonalize(ham, sub_pos)


def decompose_biexcitons(
    spectrum: ExcitonSpectrum,
    partition,
    ham: ElectronicHamiltonian,
    positions,
    product_threshold: float = PRODUCT_THRESHOLD,
    inverted_threshold: float = INVERTED_THRESHOLD,
) -> ProductDecomposition:
    """Best-fidelity classification of every eigenstate of a q=2 spectrum."""
    basis = ham.basis
    if basis.q != 2:
        raise ValueError("decomposition is defined for two shared excitations")
    atoms_a, atoms_b = _check_partition(partition[0], partition[1], basis.n_atoms)
    positions = np.asarray(positions, dtype=np.float64)

    _, spec_a = _sub_spectrum(positions, atoms_a, 1, ham.c3, ham.c6)
    _, spec_b = _sub_spectrum(positions, atoms_b, 1, ham.c3, ham.c6)

    products = []
    for ka in range(1, len(atoms_a) + 1):
        for kb in range(1, len(atoms_b) + 1):
            emb = tensor_embed(spec_a.vector(ka), spec_b.vector(kb),
                               basis, atoms_a, atoms_b)
            products.append((ka, kb, emb))

    inverted = []
    for label, atoms in (("A", atoms_a), ("B", atoms_b)):
        if len(atoms) < 2:
            continue
        sub_basis, spec = _sub_spectrum(positions, atoms, 2, ham.c3, ham.c6)
        for k in range(1, spec.size + 1):
            emb = restricted_embed(spec.vector(k), sub_basis, basis, atoms)
            inverted.append((label, k, emb))

    verdicts = []
    for s in range(1, spectrum.size + 1):
        zeta = spectrum.vector(s)
        best_prod = (0.0, 0, 0)
        for ka, kb, emb in products:
            fid = abs(float(zeta @ emb))
            if fid > best_prod[0]:
                best_prod = (fid, ka, kb)
        best_inv = (0.0, "", 0)
        for label, k, emb in inverted:
            fid = abs(float(zeta @ emb))
            if fid > best_inv[0]:
                best_inv = (fid, label, k)
        energy = float(spectrum.energies[s - 1])
        prod_ok = best_prod[0] >= product_threshold
        inv_ok = best_inv[0] >= inverted_threshold
        if prod_ok and (not inv_ok or best_prod[0] >= best_inv[0]):
            verdicts.append(Verdict(state=s, energy=energy, kind="product",
                                    fidelity=best_prod[0],
                                    k_a=best_prod[1], k_b=best_prod[2]))
        elif inv_ok:
            verdicts.append(Verdict(state=s, energy=energy, kind="inverted",
                                    fidelity=best_inv[0],
                                    subset=best_inv[1], k_inv=best_inv[2]))
        else:
            verdicts.append(Verdict(state=s, energy=energy, kind="entangled",
                                    fidelity=max(best_prod[0], best_inv[0])))
    return ProductDecomposition(partition=(atoms_a, atoms_b),
                                verdicts=tuple(verdicts))
