"""Numba kernels shared by the Hamiltonian builders and the trajectory loop.

Everything here works on plain float64/complex128 arrays and 0-based
indices.  The coupling tables produced by :func:`coupling_tables` turn
the excitation-count-dependent matrix structure into flat entry lists so
the same kernels serve one and two shared excitations:

* ``ent_i, ent_j``   upper-triangle state-index pairs with a dipole coupling
* ``ent_a, ent_b``   the two atoms whose distance sets that coupling
* ``pair_l, pair_k`` all atom pairs, for the state-independent diagonal
"""

import numpy as np
from numba import njit

# trajectory kernel status codes
STATUS_OK = 0
STATUS_COLLAPSE = 1  # some pair distance fell below r_min


def coupling_tables(atoms0: np.ndarray, n_atoms: int):
    """Flat coupling entries for a basis given as (n_states, q) 0-based rows.

    For q=1 every state pair couples; for q=2 exactly the pairs sharing
    one atom do, and the coupling bridges the two differing atoms.
    """
    n_states, q = atoms0.shape
    ent = []
    for i in range(n_states):
        for j in range(i + 1, n_states):
            si = set(atoms0[i])
            sj = set(atoms0[j])
            shared = si & sj
            if q == 1:
                ent.append((i, j, atoms0[i, 0], atoms0[j, 0]))
            elif len(shared) == q - 1:
                a = (si - shared).pop()
                b = (sj - shared).pop()
                ent.append((i, j, a, b))
    if ent:
        arr = np.asarray(ent, dtype=np.int64)
    else:
        arr = np.zeros((0, 4), dtype=np.int64)
    pairs = np.asarray(
        [(l, k) for l in range(n_atoms) for k in range(l + 1, n_atoms)],
        dtype=np.int64,
    ).reshape(-1, 2)
    occ = np.zeros((n_states, n_atoms))
    for s in range(n_states):
        for a in atoms0[s]:
            occ[s, a] = 1.0
    return (
        np.ascontiguousarray(arr[:, 0]),
        np.ascontiguousarray(arr[:, 1]),
        np.ascontiguousarray(arr[:, 2]),
        np.ascontiguousarray(arr[:, 3]),
        np.ascontiguousarray(pairs[:, 0]),
        np.ascontiguousarray(pairs[:, 1]),
        occ,
    )


@njit(cache=True)
def vdw_diagonal(pos, pair_l, pair_k, c6):
    """State-independent short-range shift +sum_{l<k} C6/R^6 (repulsive wall)."""
    acc = 0.0
    for p in range(pair_l.shape[0]):
        r = abs(pos[pair_l[p]] - pos[pair_k[p]])
        acc += c6 / r**6
    return acc


@njit(cache=True)
def fill_hamiltonian(H, pos, ent_i, ent_j, ent_a, ent_b, pair_l, pair_k, c3, c6):
    H[:, :] = 0.0
    diag = vdw_diagonal(pos, pair_l, pair_k, c6)
    for s in range(H.shape[0]):
        H[s, s] = diag
    for e in range(ent_i.shape[0]):
        r = abs(pos[ent_a[e]] - pos[ent_b[e]])
        val = c3 / r**3
        H[ent_i[e], ent_j[e]] = val
        H[ent_j[e], ent_i[e]] = val
    return H


@njit(cache=True)
def fill_gradient(G, pos, atom, ent_i, ent_j, ent_a, ent_b, pair_l, pair_k, c3, c6):
    """Entrywise d/dr_atom of the Hamiltonian at ``pos``."""
    G[:, :] = 0.0
    ddiag = 0.0
    for p in range(pair_l.shape[0]):
        l = pair_l[p]
        k = pair_k[p]
        if l == atom or k == atom:
            r = pos[l] - pos[k]
            sgn = 1.0 if r > 0 else -1.0
            if k == atom:
                sgn = -sgn
            ddiag += -6.0 * c6 * sgn / abs(r) ** 7
    for s in range(G.shape[0]):
        G[s, s] = ddiag
    for e in range(ent_i.shape[0]):
        a = ent_a[e]
        b = ent_b[e]
        if a != atom and b != atom:
            continue
        r = pos[a] - pos[b]
        sgn = 1.0 if r > 0 else -1.0
        if b == atom:
            sgn = -sgn
        val = -3.0 * c3 * sgn / abs(r) ** 4
        G[ent_i[e], ent_j[e]] = val
        G[ent_j[e], ent_i[e]] = val
    return G


@njit(cache=True)
def eigh_gauged(H):
    """Ascending eigensystem with each vector's largest-|entry| made positive."""
    w, v = np.linalg.eigh(H)
    for k in range(v.shape[1]):
        jmax = 0
        amax = 0.0
        for s in range(v.shape[0]):
            a = abs(v[s, k])
            if a > amax:
                amax = a
                jmax = s
        if v[jmax, k] < 0.0:
            for s in range(v.shape[0]):
                v[s, k] = -v[s, k]
    return w, np.ascontiguousarray(v)


@njit(cache=True)
def align_columns(V, V_prev):
    """Flip eigenvector signs to follow V_prev; returns min |diagonal overlap|."""
    min_ov = 1.0
    for k in range(V.shape[1]):
        dot = 0.0
        for s in range(V.shape[0]):
            dot += V_prev[s, k] * V[s, k]
        if dot < 0.0:
            for s in range(V.shape[0]):
                V[s, k] = -V[s, k]
            dot = -dot
        if dot < min_ov:
            min_ov = dot
    return min_ov


@njit(cache=True)
def surface_forces(F, pos, z, ent_i, ent_j, ent_a, ent_b, pair_l, pair_k, c3, c6):
    """Hellmann-Feynman force -<z|dH/dr_a|z> for every atom a, in place."""
    F[:] = 0.0
    for e in range(ent_i.shape[0]):
        a = ent_a[e]
        b = ent_b[e]
        r = pos[a] - pos[b]
        sgn = 1.0 if r > 0 else -1.0
        dval = -3.0 * c3 * sgn / abs(r) ** 4  # d/dr_a of this entry
        contrib = 2.0 * z[ent_i[e]] * z[ent_j[e]]
        F[a] -= contrib * dval
        F[b] += contrib * dval
    # identity VdW wall: +C6/R^6 per pair pushes the pair apart
    for p in range(pair_l.shape[0]):
        l = pair_l[p]
        k = pair_k[p]
        r = pos[l] - pos[k]
        sgn = 1.0 if r > 0 else -1.0
        fv = 6.0 * c6 * sgn / abs(r) ** 7
        F[l] += fv
        F[k] -= fv
    return F


@njit(cache=True)
def velocity_gradient_dot(wv, pos, vel, z, ent_i, ent_j, ent_a, ent_b, c3):
    """wv = (sum_a vel_a dH/dr_a) z, using only the off-diagonal entries.

    The identity-like diagonal drops out of every coupling numerator, so
    this sparse contraction is all the hop machinery needs.
    """
    wv[:] = 0.0
    for e in range(ent_i.shape[0]):
        a = ent_a[e]
        b = ent_b[e]
        r = pos[a] - pos[b]
        sgn = 1.0 if r > 0 else -1.0
        dval = -3.0 * c3 * sgn / abs(r) ** 4
        val = dval * (vel[a] - vel[b])
        wv[ent_i[e]] += val * z[ent_j[e]]
        wv[ent_j[e]] += val * z[ent_i[e]]
    return wv


@njit(cache=True)
def nac_vector(d, pos, z_k, z_i, gap, eps_deg, d_max, ent_i, ent_j, ent_a, ent_b, c3):
    """Coupling vector component a = <z_k|dH/dr_a|z_i> / gap with degeneracy guard.

    Returns 1 if the guard fired (gap below eps_deg or a component capped).
    """
    d[:] = 0.0
    for e in range(ent_i.shape[0]):
        a = ent_a[e]
        b = ent_b[e]
        r = pos[a] - pos[b]
        sgn = 1.0 if r > 0 else -1.0
        dval = -3.0 * c3 * sgn / abs(r) ** 4
        cross = z_k[ent_i[e]] * z_i[ent_j[e]] + z_k[ent_j[e]] * z_i[ent_i[e]]
        d[a] += cross * dval
        d[b] -= cross * dval
    guarded = 0
    if abs(gap) < eps_deg:
        gap = eps_deg if gap >= 0 else -eps_deg
        guarded = 1
    for a in range(d.shape[0]):
        d[a] = d[a] / gap
        if d[a] > d_max:
            d[a] = d_max
            guarded = 1
        elif d[a] < -d_max:
            d[a] = -d_max
            guarded = 1
    return guarded


@njit(cache=True)
def rk4_electronic(c, H0, H1, dt, n_sub, k1, k2, k3, k4, ctmp):
    """Advance i dc/dt = H(t) c across one nuclear step of length dt.

    H(t) is interpolated linearly from H0 to H1; classical fourth-order
    Runge-Kutta with n_sub substeps.  Work arrays are caller-provided to
    keep the hot loop allocation-free.
    """
    nb = c.shape[0]
    h = dt / n_sub
    for isub in range(n_sub):
        f0 = isub * h / dt
        fm = (isub + 0.5) * h / dt
        f1 = (isub + 1.0) * h / dt
        for r in range(nb):
            acc = 0.0 + 0.0j
            for s in range(nb):
                acc += (H0[r, s] + f0 * (H1[r, s] - H0[r, s])) * c[s]
            k1[r] = -1j * acc
        for r in range(nb):
            ctmp[r] = c[r] + 0.5 * h * k1[r]
        for r in range(nb):
            acc = 0.0 + 0.0j
            for s in range(nb):
                acc += (H0[r, s] + fm * (H1[r, s] - H0[r, s])) * ctmp[s]
            k2[r] = -1j * acc
        for r in range(nb):
            ctmp[r] = c[r] + 0.5 * h * k2[r]
        for r in range(nb):
            acc = 0.0 + 0.0j
            for s in range(nb):
                acc += (H0[r, s] + fm * (H1[r, s] - H0[r, s])) * ctmp[s]
            k3[r] = -1j * acc
        for r in range(nb):
            ctmp[r] = c[r] + h * k3[r]
        for r in range(nb):
            acc = 0.0 + 0.0j
            for s in range(nb):
                acc += (H0[r, s] + f1 * (H1[r, s] - H0[r, s])) * ctmp[s]
            k4[r] = -1j * acc
        for r in range(nb):
            c[r] = c[r] + (h / 6.0) * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r])
    return c


@njit(cache=True)
def run_trajectory_kernel(
    pos,
    vel,
    coef,
    surface0,
    ent_i,
    ent_j,
    ent_a,
    ent_b,
    pair_l,
    pair_k,
    occ,
    c3,
    c6,
    mass,
    dt,
    n_steps,
    n_sub,
    stride,
    fssh,
    freeze_coeffs,
    reverse_frustrated,
    r_min,
    eps_deg,
    d_max,
    uniforms,
    rec_pos,
    rec_vel,
    rec_weight,
    rec_pop,
    rec_surf,
    rec_energy,
    hop_t,
    hop_from,
    hop_to,
    hop_accepted,
    hop_frustrated,
    hop_dkin,
):
    """Propagate one trajectory; fills the rec_* and hop_* buffers.

    Returns (status, n_hop_rows, n_renorm, n_guard, n_low_overlap, max_drift).
    """
    n_atoms = pos.shape[0]
    nb = coef.shape[0]

    H0 = np.empty((nb, nb))
    H1 = np.empty((nb, nb))
    wv = np.empty(nb)
    dvec = np.empty(n_atoms)
    force = np.empty(n_atoms)
    force_new = np.empty(n_atoms)
    ct_re = np.empty(nb)
    ct_im = np.empty(nb)
    gk = np.empty(nb)
    k1 = np.empty(nb, dtype=np.complex128)
    k2 = np.empty(nb, dtype=np.complex128)
    k3 = np.empty(nb, dtype=np.complex128)
    k4 = np.empty(nb, dtype=np.complex128)
    ctmp = np.empty(nb, dtype=np.complex128)

    g = surface0
    fill_hamiltonian(H0, pos, ent_i, ent_j, ent_a, ent_b, pair_l, pair_k, c3, c6)
    w, V = eigh_gauged(H0)
    surface_forces(force, pos, V[:, g], ent_i, ent_j, ent_a, ent_b, pair_l, pair_k, c3, c6)

    n_hops = 0
    n_renorm = 0
    n_guard = 0
    n_low_overlap = 0
    max_drift = 0.0

    def _energy(vel_, wg):
        ke = 0.0
        for a in range(n_atoms):
            ke += vel_[a] * vel_[a]
        return 0.5 * mass * ke + wg

    e_ref = _energy(vel, w[g])

    def _record(idx, t, pos_, vel_, coef_, V_, g_, e_tot):
        for a in range(n_atoms):
            rec_pos[idx, a] = pos_[a]
            rec_vel[idx, a] = vel_[a]
            acc = 0.0
            for s in range(nb):
                p = coef_[s].real * coef_[s].real + coef_[s].imag * coef_[s].imag
                acc += occ[s, a] * p
            rec_weight[idx, a] = acc
        for k in range(nb):
            re = 0.0
            im = 0.0
            for s in range(nb):
                re += V_[s, k] * coef_[s].real
                im += V_[s, k] * coef_[s].imag
            rec_pop[idx, k] = re * re + im * im
        rec_surf[idx] = g_
        rec_energy[idx] = e_tot

    _record(0, 0.0, pos, vel, coef, V, g, e_ref)

    status = STATUS_OK
    for it in range(1, n_steps + 1):
        # velocity-Verlet half kick + drift
        for a in range(n_atoms):
            vel[a] += 0.5 * dt * force[a] / mass
            pos[a] += dt * vel[a]
        # collapse guard
        for p in range(pair_l.shape[0]):
            if abs(pos[pair_l[p]] - pos[pair_k[p]]) < r_min:
                status = STATUS_COLLAPSE
        if status != STATUS_OK:
            break

        fill_hamiltonian(H1, pos, ent_i, ent_j, ent_a, ent_b, pair_l, pair_k, c3, c6)
        w_new, V_new = eigh_gauged(H1)
        ov = align_columns(V_new, V)
        if ov < 0.9:
            n_low_overlap += 1
        surface_forces(force_new, pos, V_new[:, g], ent_i, ent_j, ent_a, ent_b,
                       pair_l, pair_k, c3, c6)
        for a in range(n_atoms):
            vel[a] += 0.5 * dt * force_new[a] / mass

        if not freeze_coeffs:
            rk4_electronic(coef, H0, H1, dt, n_sub, k1, k2, k3, k4, ctmp)
            nr = 0.0
            for s in range(nb):
                nr += coef[s].real ** 2 + coef[s].imag ** 2
            if abs(nr - 1.0) > 1e-10:
                inv = 1.0 / np.sqrt(nr)
                for s in range(nb):
                    coef[s] = coef[s] * inv
                n_renorm += 1

        if fssh:
            # adiabatic amplitudes at the new geometry
            for k in range(nb):
                re = 0.0
                im = 0.0
                for s in range(nb):
                    re += V_new[s, k] * coef[s].real
                    im += V_new[s, k] * coef[s].imag
                ct_re[k] = re
                ct_im[k] = im
            agg = ct_re[g] * ct_re[g] + ct_im[g] * ct_im[g]
            if agg > 1e-12:
                velocity_gradient_dot(wv, pos, vel, V_new[:, g],
                                      ent_i, ent_j, ent_a, ent_b, c3)
                total = 0.0
                for k in range(nb):
                    if k == g:
                        gk[k] = 0.0
                        continue
                    num = 0.0
                    for r in range(nb):
                        num += V_new[r, k] * wv[r]
                    gap = w_new[k] - w_new[g]
                    if abs(gap) < eps_deg:
                        gap = eps_deg if gap >= 0 else -eps_deg
                        n_guard += 1
                    vd = num / gap
                    # Re(conj(ct_g) * ct_k)
                    re_a = ct_re[g] * ct_re[k] + ct_im[g] * ct_im[k]
                    p = 2.0 * dt * re_a * vd / agg
                    gk[k] = p if p > 0.0 else 0.0
                    total += gk[k]
                xi = uniforms[it - 1]
                if xi < total:
                    # walk the cumulative intervals to the selected target
                    target = -1
                    cum = 0.0
                    for k in range(nb):
                        cum += gk[k]
                        if xi < cum:
                            target = k
                            break
                    if target >= 0:
                        gap = w_new[target] - w_new[g]
                        gguard = nac_vector(dvec, pos, V_new[:, g], V_new[:, target],
                                            gap, eps_deg, d_max,
                                            ent_i, ent_j, ent_a, ent_b, c3)
                        n_guard += gguard
                        dn = 0.0
                        for a in range(n_atoms):
                            dn += dvec[a] * dvec[a]
                        dn = np.sqrt(dn)
                        if dn > 0.0:
                            vu = 0.0
                            for a in range(n_atoms):
                                dvec[a] /= dn
                                vu += vel[a] * dvec[a]
                            disc = vu * vu - 2.0 * gap / mass
                            if n_hops < hop_t.shape[0]:
                                hop_t[n_hops] = it * dt
                                hop_from[n_hops] = g
                                hop_to[n_hops] = target
                            if disc >= 0.0:
                                s_ = np.sqrt(disc)
                                lam = vu - s_ if vu >= 0.0 else vu + s_
                                for a in range(n_atoms):
                                    vel[a] -= lam * dvec[a]
                                if n_hops < hop_t.shape[0]:
                                    hop_accepted[n_hops] = 1
                                    hop_frustrated[n_hops] = 0
                                    hop_dkin[n_hops] = -gap
                                g = target
                                surface_forces(force_new, pos, V_new[:, g],
                                               ent_i, ent_j, ent_a, ent_b,
                                               pair_l, pair_k, c3, c6)
                                e_ref = _energy(vel, w_new[g])
                            else:
                                if n_hops < hop_t.shape[0]:
                                    hop_accepted[n_hops] = 0
                                    hop_frustrated[n_hops] = 1
                                    hop_dkin[n_hops] = 0.0
                                if reverse_frustrated:
                                    for a in range(n_atoms):
                                        vel[a] -= 2.0 * vu * dvec[a]
                            if n_hops < hop_t.shape[0]:
                                n_hops += 1

        e_now = _energy(vel, w_new[g])
        drift = abs(e_now - e_ref) / max(abs(e_ref), 1e-30)
        if drift > max_drift:
            max_drift = drift

        for r in range(nb):
            for s in range(nb):
                H0[r, s] = H1[r, s]
        V = V_new
        w = w_new
        for a in range(n_atoms):
            force[a] = force_new[a]

        if it % stride == 0:
            _record(it // stride, it * dt, pos, vel, coef, V, g, e_now)

    return status, n_hops, n_renorm, n_guard, n_low_overlap, max_drift
