"""One quantum-classical trajectory: classical nuclei on an adiabatic
surface, electronic amplitudes in the smooth site basis, and stochastic
fewest-switches hops with energy-conserving velocity adjustment.

The step functions here and the fused loop in
:func:`kernels.run_trajectory_kernel` share the same compiled
subroutines, so single-step tests exercise the exact arithmetic of the
production loop.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from .config import AggregateConfig, D_MAX, EPS_DEG, R_MIN_UM
from .hamiltonian import ElectronicHamiltonian
from .spectra import ExcitonSpectrum, align_gauge, diagonalize
from . import kernels

log = logging.getLogger(__name__)


class TrajectoryCollapse(RuntimeError):
    """A pair distance fell below the minimum; integration is unreliable."""


@dataclass(frozen=True)
class TrajectoryState:
    t: float
    positions: np.ndarray
    velocities: np.ndarray
    coeffs: np.ndarray          # complex amplitudes in the site basis
    surface: int                # active adiabatic surface, 1-based
    spectrum: ExcitonSpectrum
    rng: np.random.Generator = None


@dataclass(frozen=True)
class HopRecord:
    t: float
    from_surface: int
    to_surface: int
    accepted: bool
    frustrated: bool
    kinetic_adjustment: float   # rad/us, change applied to kinetic energy


@dataclass(frozen=True)
class TrajectoryResult:
    """Snapshot arrays for one trajectory plus the hop log."""

    t: np.ndarray               # (n_rec,)
    positions: np.ndarray       # (n_rec, n_atoms)
    velocities: np.ndarray
    weights: np.ndarray         # (n_rec, n_atoms) excitation weight per atom
    adiab_pops: np.ndarray      # (n_rec, basis_size) |adiabatic amplitude|^2
    surface: np.ndarray         # (n_rec,) 1-based
    energy: np.ndarray          # (n_rec,) total energy, rad/us
    hops: tuple
    status: int
    diagnostics: dict


def surface_force(positions, spectrum: ExcitonSpectrum, surface: int,
                  ham: ElectronicHamiltonian):
    """Hellmann-Feynman force on every atom for the given surface (1-based)."""
    z = spectrum.vector(surface)
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    ent_i, ent_j, ent_a, ent_b, pair_l, pair_k, _ = ham.tables
    F = np.empty(ham.basis.n_atoms)
    kernels.surface_forces(F, positions, z, ent_i, ent_j, ent_a, ent_b,
                           pair_l, pair_k, ham.c3, ham.c6)
    return F


def nonadiabatic_coupling(positions, spectrum: ExcitonSpectrum, k: int, i: int,
                          ham: ElectronicHamiltonian):
    """Derivative coupling vector between surfaces k and i (both 1-based).

    Component a is <z_k| dH/dr_a |z_i> / (O_i - O_k); near-degenerate
    denominators are guarded and the event logged.
    """
    if k == i:
        raise ValueError("coupling is defined between distinct surfaces")
    z_k = spectrum.vector(k)
    z_i = spectrum.vector(i)
    gap = float(spectrum.energies[i - 1] - spectrum.energies[k - 1])
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    ent_i, ent_j, ent_a, ent_b, _, _, _ = ham.tables
    d = np.empty(ham.basis.n_atoms)
    guarded = kernels.nac_vector(d, positions, z_k, z_i, gap, EPS_DEG, D_MAX,
                                 ent_i, ent_j, ent_a, ent_b, ham.c3)
    if guarded:
        log.warning("degeneracy guard fired for coupling (%d,%d), gap=%.3e", k, i, gap)
    return d


def step_nuclear(state: TrajectoryState, dt: float, ham: ElectronicHamiltonian,
                 mass: float) -> TrajectoryState:
    """Velocity-Verlet step on the active surface; spectrum follows the geometry."""
    F = surface_force(state.positions, state.spectrum, state.surface, ham)
    vhalf = state.velocities + 0.5 * dt * F / mass
    pos = state.positions + dt * vhalf
    seps = np.abs(np.subtract.outer(pos, pos))
    np.fill_diagonal(seps, np.inf)
    if seps.min() < R_MIN_UM:
        raise TrajectoryCollapse(f"pair distance below {R_MIN_UM} um at t={state.t + dt}")
    spec = align_gauge(diagonalize(ham, pos), state.spectrum)
    F_new = surface_force(pos, spec, state.surface, ham)
    vel = vhalf + 0.5 * dt * F_new / mass
    return replace(state, t=state.t + dt, positions=pos, velocities=vel, spectrum=spec)


def step_electronic(state: TrajectoryState, dt_sub: float,
                    ham: ElectronicHamiltonian, h_end=None) -> TrajectoryState:
    """One fourth-order substep of i dc/dt = H(t) c.

    With ``h_end`` given, H is interpolated linearly from the state's
    geometry to ``h_end`` across the substep; otherwise H is held fixed.
    """
    H0 = ham.matrix(state.positions)
    H1 = H0 if h_end is None else np.ascontiguousarray(h_end, dtype=np.float64)
    c = state.coeffs.astype(np.complex128)
    nb = c.shape[0]
    work = [np.empty(nb, dtype=np.complex128) for _ in range(5)]
    kernels.rk4_electronic(c, H0, H1, dt_sub, 1, *work)
    nr = float(np.sum(c.real**2 + c.imag**2))
    if abs(nr - 1.0) > 1e-10:
        log.debug("electronic norm drift %.3e renormalized", nr - 1.0)
        c /= np.sqrt(nr)
    return replace(state, t=state.t + dt_sub, coeffs=c)


def attempt_hop(state: TrajectoryState, dt: float, ham: ElectronicHamiltonian,
                mass: float, uniform: float = None):
    """Fewest-switches hop attempt; returns (state, HopRecord or None).

    The probability of leaving the active surface for k is
    max(0, 2 dt Re(conj(ct_g) ct_k) (v . d_gk) / |ct_g|^2); one uniform
    draw walks the cumulative intervals.  An accepted hop rescales the
    velocity along the coupling vector so total energy is conserved; a
    frustrated hop leaves velocities untouched (or reflects them along
    the coupling direction when configured).
    """
    V = state.spectrum.vectors
    w = state.spectrum.energies
    nb = V.shape[0]
    g = state.surface - 1
    ct = V.T @ state.coeffs
    agg = float(np.abs(ct[g]) ** 2)
    if agg <= 1e-12:
        return state, None
    positions = np.ascontiguousarray(state.positions, dtype=np.float64)
    ent_i, ent_j, ent_a, ent_b, _, _, _ = ham.tables
    wv = np.empty(nb)
    kernels.velocity_gradient_dot(wv, positions, state.velocities, V[:, g],
                                  ent_i, ent_j, ent_a, ent_b, ham.c3)
    gk = np.zeros(nb)
    for k in range(nb):
        if k == g:
            continue
        gap = w[k] - w[g]
        if abs(gap) < EPS_DEG:
            gap = EPS_DEG if gap >= 0 else -EPS_DEG
        vd = float(V[:, k] @ wv) / gap
        re_a = float((ct[g].conjugate() * ct[k]).real)
        gk[k] = max(0.0, 2.0 * dt * re_a * vd / agg)
    if uniform is None:
        uniform = float(state.rng.random())
    cum = np.cumsum(gk)
    if uniform >= cum[-1]:
        return state, None
    target = int(np.searchsorted(cum, uniform, side="right"))
    gap = float(w[target] - w[g])
    d = nonadiabatic_coupling(positions, state.spectrum, g + 1, target + 1, ham)
    dn = float(np.linalg.norm(d))
    if dn == 0.0:
        return state, None
    u = d / dn
    vu = float(state.velocities @ u)
    disc = vu * vu - 2.0 * gap / mass
    if disc < 0.0:
        record = HopRecord(t=state.t, from_surface=g + 1, to_surface=target + 1,
                           accepted=False, frustrated=True, kinetic_adjustment=0.0)
        return state, record
    s = np.sqrt(disc)
    lam = vu - s if vu >= 0.0 else vu + s
    vel = state.velocities - lam * u
    record = HopRecord(t=state.t, from_surface=g + 1, to_surface=target + 1,
                       accepted=True, frustrated=False, kinetic_adjustment=-gap)
    return replace(state, velocities=vel, surface=target + 1), record


def initial_state(cfg: AggregateConfig, ham: ElectronicHamiltonian,
                  positions, velocities, surface: int,
                  rng: np.random.Generator = None) -> TrajectoryState:
    """Trajectory start: coefficients are the chosen eigenvector at the geometry."""
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    spec = diagonalize(ham, positions)
    coeffs = spec.vector(surface).astype(np.complex128)
    return TrajectoryState(t=0.0, positions=positions.copy(),
                           velocities=np.asarray(velocities, dtype=np.float64).copy(),
                           coeffs=coeffs, surface=surface, spectrum=spec, rng=rng)


def run_trajectory(cfg: AggregateConfig, initial: TrajectoryState,
                   uniforms: np.ndarray = None) -> TrajectoryResult:
    """Propagate to t_final with the fused compiled loop.

    ``uniforms`` supplies the per-step hop draws; by default they come
    from the initial state's rng so results are reproducible per stream.
    """
    ham_tables = _tables_for(cfg)
    ent_i, ent_j, ent_a, ent_b, pair_l, pair_k, occ = ham_tables
    n_steps = cfg.n_steps
    stride = cfg.record_every
    n_rec = n_steps // stride + 1
    nb = occ.shape[0]
    n_atoms = cfg.n_atoms

    fssh = cfg.mode == "fssh"
    if uniforms is None:
        if fssh:
            uniforms = initial.rng.random(n_steps)
        else:
            uniforms = np.empty(0)
    uniforms = np.ascontiguousarray(uniforms, dtype=np.float64)

    rec_pos = np.empty((n_rec, n_atoms))
    rec_vel = np.empty((n_rec, n_atoms))
    rec_weight = np.empty((n_rec, n_atoms))
    rec_pop = np.empty((n_rec, nb))
    rec_surf = np.empty(n_rec, dtype=np.int64)
    rec_energy = np.empty(n_rec)
    hop_cap = 4096
    hop_t = np.empty(hop_cap)
    hop_from = np.empty(hop_cap, dtype=np.int64)
    hop_to = np.empty(hop_cap, dtype=np.int64)
    hop_accepted = np.empty(hop_cap, dtype=np.int64)
    hop_frustrated = np.empty(hop_cap, dtype=np.int64)
    hop_dkin = np.empty(hop_cap)

    pos = initial.positions.copy()
    vel = initial.velocities.copy()
    coef = initial.coeffs.astype(np.complex128).copy()

    status, n_hops, n_renorm, n_guard, n_low_ov, max_drift = kernels.run_trajectory_kernel(
        pos, vel, coef, initial.surface - 1,
        ent_i, ent_j, ent_a, ent_b, pair_l, pair_k, occ,
        cfg.c3, cfg.c6, cfg.mass, cfg.dt_nuclear, n_steps,
        cfg.n_sub_electronic, stride,
        fssh, cfg.freeze_coefficients, cfg.reverse_frustrated,
        R_MIN_UM, EPS_DEG, D_MAX, uniforms,
        rec_pos, rec_vel, rec_weight, rec_pop, rec_surf, rec_energy,
        hop_t, hop_from, hop_to, hop_accepted, hop_frustrated, hop_dkin,
    )
    if status == kernels.STATUS_COLLAPSE:
        raise TrajectoryCollapse("pair distance fell below the minimum")

    hops = tuple(
        HopRecord(t=float(hop_t[i]), from_surface=int(hop_from[i]) + 1,
                  to_surface=int(hop_to[i]) + 1,
                  accepted=bool(hop_accepted[i]), frustrated=bool(hop_frustrated[i]),
                  kinetic_adjustment=float(hop_dkin[i]))
        for i in range(n_hops)
    )
    t = np.arange(n_rec) * cfg.out_stride
    return TrajectoryResult(
        t=t, positions=rec_pos, velocities=rec_vel, weights=rec_weight,
        adiab_pops=rec_pop, surface=rec_surf + 1, energy=rec_energy,
        hops=hops, status=status,
        diagnostics={"n_renorm": n_renorm, "n_degeneracy_guard": n_guard,
                     "n_low_overlap": n_low_ov, "max_energy_drift": max_drift},
    )


_TABLE_CACHE = {}


def _tables_for(cfg: AggregateConfig):
    key = (cfg.n_atoms, cfg.n_excitations)
    if key not in _TABLE_CACHE:
        from .basis import enumerate_basis
        basis = enumerate_basis(cfg.n_atoms, cfg.n_excitations)
        _TABLE_CACHE[key] = kernels.coupling_tables(basis.atoms0, basis.n_atoms)
    return _TABLE_CACHE[key]


def hamiltonian_for(cfg: AggregateConfig) -> ElectronicHamiltonian:
    from .basis import enumerate_basis
    basis = enumerate_basis(cfg.n_atoms, cfg.n_excitations)
    return ElectronicHamiltonian(basis=basis, c3=cfg.c3, c6=cfg.c6)
