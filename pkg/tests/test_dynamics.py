"""Forces, couplings, integrators and hop logic on small chains."""

import numpy as np
import pytest

from flexagg import units
from flexagg.config import AggregateConfig
from flexagg.hamiltonian import build_hamiltonian
from flexagg.spectra import diagonalize
from flexagg.dynamics import (
    TrajectoryCollapse,
    TrajectoryState,
    attempt_hop,
    hamiltonian_for,
    initial_state,
    nonadiabatic_coupling,
    run_trajectory,
    step_electronic,
    step_nuclear,
    surface_force,
)
from flexagg.ensemble import prepare_initial
from flexagg.scenarios import resolve_scenario

C3 = units.mhz_to_angular(units.C3_MHZ_UM3)
C6 = units.mhz_to_angular(units.C6_MHZ_UM6)


def chain_config(n, q, positions, **kw):
    kw.setdefault("c3", C3)
    kw.setdefault("c6", C6)
    return AggregateConfig(n_atoms=n, n_excitations=q,
                           positions0=tuple(positions), **kw).validate()


def eigenvalue_fd_force(ham, positions, surface, h=1e-6):
    F = np.zeros(len(positions))
    for a in range(len(positions)):
        pp = positions.copy()
        pp[a] += h
        ep = diagonalize(ham, pp).energies[surface - 1]
        pp[a] -= 2 * h
        em = diagonalize(ham, pp).energies[surface - 1]
        F[a] = -(ep - em) / (2 * h)
    return F


# ---------------------------------------------------------------- forces

def test_surface_force_matches_energy_gradient():
    rng = np.random.default_rng(7)
    for n, q in ((3, 1), (4, 2), (5, 2)):
        ham = build_hamiltonian(n, q, c3=C3, c6=C6)
        for _ in range(5):
            pos = np.sort(rng.uniform(0.0, 4.0 * n, n))
            while np.diff(pos).min() < 1.5:
                pos = np.sort(rng.uniform(0.0, 4.0 * n, n))
            spec = diagonalize(ham, pos)
            surface = int(rng.integers(1, spec.size + 1))
            F = surface_force(pos, spec, surface, ham)
            F_fd = eigenvalue_fd_force(ham, pos, surface)
            scale = max(1.0, np.abs(F_fd).max())
            assert np.abs(F - F_fd).max() < 1e-5 * scale


def test_surface_force_dimer_directions():
    ham = build_hamiltonian(2, 1, c3=C3, c6=C6)
    pos = np.array([0.0, 5.0])
    spec = diagonalize(ham, pos)
    F_up = surface_force(pos, spec, 2, ham)
    F_dn = surface_force(pos, spec, 1, ham)
    # upper (symmetric) surface pushes the pair apart, lower pulls it
    # together at 5 um where dipole-dipole beats the VdW wall
    assert F_up[0] < 0 < F_up[1]
    assert F_dn[0] > 0 > F_dn[1]
    assert F_up[0] == pytest.approx(-F_up[1], rel=1e-12)
    assert F_dn[0] == pytest.approx(-F_dn[1], rel=1e-12)


def test_surface_force_translation_invariance():
    ham = build_hamiltonian(4, 2, c3=C3, c6=C6)
    pos = np.array([0.0, 4.0, 9.0, 15.0])
    spec = diagonalize(ham, pos)
    for surface in (1, 3, 6):
        F = surface_force(pos, spec, surface, ham)
        assert abs(F.sum()) < 1e-9 * max(1.0, np.abs(F).max())
        F_shift = surface_force(pos + 11.5, diagonalize(ham, pos + 11.5),
                                surface, ham)
        assert np.allclose(F, F_shift, atol=1e-9)


def test_biexciton_top_surface_forces_frozen():
    # homogeneous 5-chain, nodeless two-excitation surface: edge atoms
    # pushed out hard while atoms 2 and 4 feel a small inward pull, a
    # genuinely non-pairwise feature of the shared-excitation surface
    ham = build_hamiltonian(5, 2, c3=C3, c6=C6)
    pos = np.array([0.0, 5.0, 10.0, 15.0, 20.0])
    F = surface_force(pos, diagonalize(ham, pos), 10, ham)
    expected = np.array([-26.133825, 3.873658, 0.0, -3.873658, 26.133825])
    assert np.allclose(F, expected, atol=1e-5)


# -------------------------------------------------------------- couplings

def test_nonadiabatic_coupling_antisymmetric():
    ham = build_hamiltonian(4, 2, c3=C3, c6=C6)
    pos = np.array([0.0, 3.5, 8.0, 14.0])
    spec = diagonalize(ham, pos)
    for k, i in ((1, 2), (2, 5), (3, 6)):
        d_ki = nonadiabatic_coupling(pos, spec, k, i, ham)
        d_ik = nonadiabatic_coupling(pos, spec, i, k, ham)
        assert np.allclose(d_ki, -d_ik, atol=1e-12)


def test_nonadiabatic_coupling_dimer_vanishes():
    # dimer eigenvectors are position-independent, so the coupling is
    # exactly zero, entry by entry
    ham = build_hamiltonian(2, 1, c3=C3, c6=C6)
    pos = np.array([0.0, 4.0])
    spec = diagonalize(ham, pos)
    d = nonadiabatic_coupling(pos, spec, 1, 2, ham)
    assert np.all(d == 0.0)


def test_nonadiabatic_coupling_equal_surfaces_rejected():
    ham = build_hamiltonian(3, 1, c3=C3, c6=C6)
    pos = np.array([0.0, 3.0, 7.0])
    spec = diagonalize(ham, pos)
    with pytest.raises(ValueError):
        nonadiabatic_coupling(pos, spec, 2, 2, ham)


def test_nonadiabatic_coupling_matches_eigenvector_derivative():
    ham = build_hamiltonian(3, 1, c3=C3, c6=C6)
    pos = np.array([0.0, 3.0, 7.0])
    spec = diagonalize(ham, pos)
    h = 1e-6
    for k, i in ((1, 2), (1, 3), (2, 3)):
        d = nonadiabatic_coupling(pos, spec, k, i, ham)
        z_k = spec.vector(k)
        z_i = spec.vector(i)
        for a in range(3):
            pp = pos.copy()
            pp[a] += h
            zp = diagonalize(ham, pp).vectors[:, i - 1]
            zp = zp * np.sign(zp @ z_i)
            pp[a] -= 2 * h
            zm = diagonalize(ham, pp).vectors[:, i - 1]
            zm = zm * np.sign(zm @ z_i)
            fd = float(z_k @ (zp - zm)) / (2 * h)
            assert d[a] == pytest.approx(fd, rel=1e-4, abs=1e-8)


# ------------------------------------------------------------ integrators

def test_step_nuclear_static_without_interactions():
    ham = build_hamiltonian(3, 1, c3=0.0, c6=0.0)
    pos = np.array([0.0, 5.0, 10.0])
    st = TrajectoryState(t=0.0, positions=pos, velocities=np.zeros(3),
                         coeffs=np.array([1, 0, 0], dtype=complex),
                         surface=1, spectrum=diagonalize(ham, pos))
    mass = units.mass_to_internal(1e-26)
    for _ in range(20):
        st = step_nuclear(st, 1e-3, ham, mass)
    assert np.allclose(st.positions, pos, atol=1e-12)
    assert np.allclose(st.velocities, 0.0, atol=1e-12)


def test_step_nuclear_matches_fused_loop():
    cfg = chain_config(2, 1, (0.0, 3.0), mode="fixed", sigma=0.0, n_traj=1,
                       t_final=0.01, dt_nuclear=1e-4, out_stride=0.01,
                       initial_surface=1, freeze_coefficients=True)
    ham = hamiltonian_for(cfg)
    init = prepare_initial(cfg, np.array(cfg.positions0), np.zeros(2), None)
    res = run_trajectory(cfg, init)
    st = init
    for _ in range(cfg.n_steps):
        st = step_nuclear(st, cfg.dt_nuclear, ham, cfg.mass)
    assert np.allclose(st.positions, res.positions[-1], atol=1e-10)
    assert np.allclose(st.velocities, res.velocities[-1], atol=1e-10)


def test_velocity_verlet_drift_is_second_order():
    # attractive dimer falling into the VdW wall and rebounding; halving
    # the step twice should cut the energy drift about sixteenfold
    drifts = {}
    for dt in (4e-4, 1e-4):
        cfg = chain_config(2, 1, (0.0, 3.0), mode="fixed", sigma=0.0,
                           n_traj=1, dt_nuclear=dt, t_final=1.0,
                           out_stride=0.01, initial_surface=1,
                           freeze_coefficients=True)
        init = prepare_initial(cfg, np.array(cfg.positions0), np.zeros(2), None)
        res = run_trajectory(cfg, init)
        drifts[dt] = res.diagnostics["max_energy_drift"]
    assert drifts[4e-4] < 1e-5
    assert drifts[4e-4] / drifts[1e-4] > 10.0


def test_run_trajectory_collapse_without_vdw_wall():
    cfg = chain_config(2, 1, (0.0, 1.0), c6=0.0, mode="fixed", sigma=0.0,
                       n_traj=1, t_final=1.0, out_stride=0.01,
                       initial_surface=1, freeze_coefficients=True)
    init = prepare_initial(cfg, np.array(cfg.positions0), np.zeros(2), None)
    with pytest.raises(TrajectoryCollapse):
        run_trajectory(cfg, init)


def test_step_electronic_keeps_eigenstate_stationary():
    ham = build_hamiltonian(5, 2, c3=C3, c6=C6)
    pos = np.array([0.0, 5.0, 10.0, 15.0, 17.5])
    spec = diagonalize(ham, pos)
    st = TrajectoryState(t=0.0, positions=pos, velocities=np.zeros(5),
                         coeffs=spec.vector(3).astype(complex), surface=3,
                         spectrum=spec)
    for _ in range(50):
        st = step_electronic(st, 1e-3, ham)
    overlap = abs(spec.vector(3) @ st.coeffs)
    assert overlap == pytest.approx(1.0, abs=1e-9)
    assert np.sum(np.abs(st.coeffs) ** 2) == pytest.approx(1.0, abs=1e-10)


def test_step_electronic_dimer_rabi_period():
    # site-localized start oscillates with |c_2(t)|^2 = sin^2(J t)
    R = 5.0
    J = C3 / R ** 3
    ham = build_hamiltonian(2, 1, c3=C3, c6=C6)
    pos = np.array([0.0, R])
    spec = diagonalize(ham, pos)

    def populate(t_target, n_sub=400):
        st = TrajectoryState(t=0.0, positions=pos, velocities=np.zeros(2),
                             coeffs=np.array([1.0, 0.0], dtype=complex),
                             surface=1, spectrum=spec)
        dt_sub = t_target / n_sub
        for _ in range(n_sub):
            st = step_electronic(st, dt_sub, ham)
        return np.abs(st.coeffs) ** 2

    p_quarter = populate(np.pi / (4 * J))
    p_half = populate(np.pi / (2 * J))
    assert p_quarter[1] == pytest.approx(0.5, abs=1e-6)
    assert p_half[1] == pytest.approx(1.0, abs=1e-6)


# ---------------------------------------------------------------- hopping

def trimer_hop_setup():
    cfg = chain_config(3, 1, (0.0, 3.0, 7.0))
    ham = hamiltonian_for(cfg)
    pos = np.array(cfg.positions0)
    spec = diagonalize(ham, pos)
    c = ((spec.vectors[:, 0] + spec.vectors[:, 1]) / np.sqrt(2)).astype(complex)
    return cfg, ham, pos, spec, c


def test_attempt_hop_downhill_conserves_energy():
    cfg, ham, pos, spec, c = trimer_hop_setup()
    d = nonadiabatic_coupling(pos, spec, 2, 1, ham)
    v = 2.0 * d / np.linalg.norm(d)
    st = TrajectoryState(t=0.0, positions=pos, velocities=v, coeffs=c,
                         surface=2, spectrum=spec)
    st2, rec = attempt_hop(st, 1e-3, ham, cfg.mass, uniform=0.0)
    assert rec is not None and rec.accepted and not rec.frustrated
    assert st2.surface == 1
    e_before = spec.energies[1] + 0.5 * cfg.mass * v @ v
    e_after = spec.energies[0] + 0.5 * cfg.mass * st2.velocities @ st2.velocities
    assert abs(e_after - e_before) < 1e-9 * abs(e_before)
    gap = spec.energies[0] - spec.energies[1]
    assert rec.kinetic_adjustment == pytest.approx(-gap, rel=1e-12)


def test_attempt_hop_uphill_frustrated_leaves_velocities():
    cfg, ham, pos, spec, c = trimer_hop_setup()
    d = nonadiabatic_coupling(pos, spec, 1, 2, ham)
    v = 1e-3 * d / np.linalg.norm(d)
    st = TrajectoryState(t=0.0, positions=pos, velocities=v, coeffs=c,
                         surface=1, spectrum=spec)
    st2, rec = attempt_hop(st, 1e-3, ham, cfg.mass, uniform=0.0)
    assert rec is not None and rec.frustrated and not rec.accepted
    assert st2.surface == 1
    assert np.array_equal(st2.velocities, v)
    assert rec.kinetic_adjustment == 0.0


def test_attempt_hop_pure_adiabatic_state_never_fires():
    cfg, ham, pos, spec, _ = trimer_hop_setup()
    st = TrajectoryState(t=0.0, positions=pos,
                         velocities=np.array([0.5, -0.2, 0.1]),
                         coeffs=spec.vector(2).astype(complex), surface=2,
                         spectrum=spec)
    _, rec = attempt_hop(st, 1e-3, ham, cfg.mass, uniform=0.0)
    assert rec is None


def test_attempt_hop_dimer_zero_coupling_never_fires():
    cfg = chain_config(2, 1, (0.0, 4.0))
    ham = hamiltonian_for(cfg)
    pos = np.array(cfg.positions0)
    spec = diagonalize(ham, pos)
    c = ((spec.vectors[:, 0] + spec.vectors[:, 1]) / np.sqrt(2)).astype(complex)
    st = TrajectoryState(t=0.0, positions=pos, velocities=np.array([1.0, -1.0]),
                         coeffs=c, surface=1, spectrum=spec)
    _, rec = attempt_hop(st, 1e-3, ham, cfg.mass, uniform=0.0)
    assert rec is None


def test_attempt_hop_large_draw_keeps_surface():
    cfg, ham, pos, spec, c = trimer_hop_setup()
    d = nonadiabatic_coupling(pos, spec, 2, 1, ham)
    v = 2.0 * d / np.linalg.norm(d)
    st = TrajectoryState(t=0.0, positions=pos, velocities=v, coeffs=c,
                         surface=2, spectrum=spec)
    st2, rec = attempt_hop(st, 1e-3, ham, cfg.mass, uniform=0.999999)
    assert rec is None
    assert st2.surface == 2


# ------------------------------------------------------------ trajectories

def test_fixed_mode_keeps_surface_and_frozen_weights():
    cfg = chain_config(5, 2, (0.0, 5.0, 10.0, 15.0, 20.0), mode="fixed",
                       sigma=0.0, n_traj=1, t_final=0.5, out_stride=0.01,
                       initial_surface=10, freeze_coefficients=True)
    init = prepare_initial(cfg, np.array(cfg.positions0), np.zeros(5), None)
    res = run_trajectory(cfg, init)
    assert np.all(res.surface == 10)
    assert len(res.hops) == 0
    # frozen site amplitudes mean frozen per-atom excitation weights
    assert np.allclose(res.weights, res.weights[0], atol=1e-12)
    assert np.allclose(res.weights[0].sum(), 2.0, atol=1e-10)


def test_fixed_mode_preserves_mirror_symmetry():
    cfg = chain_config(5, 2, (0.0, 5.0, 10.0, 15.0, 20.0), mode="fixed",
                       sigma=0.0, n_traj=1, t_final=1.0, out_stride=0.01,
                       initial_surface=10, freeze_coefficients=True)
    init = prepare_initial(cfg, np.array(cfg.positions0), np.zeros(5), None)
    res = run_trajectory(cfg, init)
    center = 10.0
    mirrored = 2 * center - res.positions[:, ::-1]
    assert np.abs(res.positions - mirrored).max() < 1e-9


def test_repulsive_surface_gaps_grow_monotonically():
    cfg = resolve_scenario("fixed-surface")
    init = prepare_initial(cfg, np.array(cfg.positions0), np.zeros(5), None)
    res = run_trajectory(cfg, init)
    gaps = np.diff(res.positions, axis=1)
    assert np.all(np.diff(gaps, axis=0) > 0)
    assert res.diagnostics["max_energy_drift"] < 1e-3


def test_attractive_surface_rebounds_without_crossing():
    cfg = resolve_scenario("fixed-surface", initial_surface=1, t_final=12.0)
    init = prepare_initial(cfg, np.array(cfg.positions0), np.zeros(5), None)
    res = run_trajectory(cfg, init)
    gaps = np.diff(res.positions, axis=1)
    assert np.all(gaps > 0)          # ordering preserved throughout
    g23 = gaps[:, 1]
    i_min = int(np.argmin(g23))
    assert g23[i_min] < 3.0          # genuine close approach
    assert 0 < i_min < len(g23) - 1
    assert g23[-1] > g23[i_min] + 1.0  # and a clear rebound afterwards
    assert res.diagnostics["max_energy_drift"] < 1e-3


def test_initial_state_uses_eigenvector_at_geometry():
    cfg = chain_config(4, 1, (0.0, 5.0, 10.0, 15.0))
    ham = hamiltonian_for(cfg)
    pos = np.array([0.1, 5.2, 9.9, 14.8])
    st = initial_state(cfg, ham, pos, np.zeros(4), 2)
    spec = diagonalize(ham, pos)
    assert np.allclose(st.coeffs, spec.vector(2).astype(complex))
    assert st.surface == 2
