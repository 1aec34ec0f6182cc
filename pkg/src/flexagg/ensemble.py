"""Trajectory swarms: initial-condition sampling, parallel execution and
aggregation of the space-time observables.

Determinism contract: results are bit-identical for a fixed seed no
matter how many workers run.  Three ingredients make that true: all
initial conditions are drawn up front from the root seed, trajectory i
always gets the rng stream spawned with key (i,), and trajectories are
aggregated in fixed-size chunks that are reduced in chunk order.
"""

import logging
import multiprocessing
from dataclasses import dataclass

import numpy as np

from .basis import ExcitationBasis
from .config import AggregateConfig, config_text
from .dynamics import (TrajectoryCollapse, TrajectoryResult, TrajectoryState,
                       hamiltonian_for, run_trajectory)
from .spectra import diagonalize

log = logging.getLogger(__name__)

CHUNK = 64  # trajectories per reduction chunk, fixed for reproducibility


@dataclass(frozen=True)
class InitialSampler:
    """Independent Gaussian position and velocity draws around a mean geometry."""

    means: tuple                # um
    sigma: float                # um
    sigma_v: float              # um/us
    seed: int

    def sample(self, n_traj: int):
        if n_traj < 1:
            raise ValueError("need at least one trajectory")
        rng = np.random.default_rng(self.seed)
        means = np.asarray(self.means, dtype=np.float64)
        n = means.shape[0]
        pos = means + self.sigma * rng.standard_normal((n_traj, n))
        vel = self.sigma_v * rng.standard_normal((n_traj, n))
        return pos, vel


def sample_initials(sampler: InitialSampler, n_traj: int):
    """(positions, velocities) arrays of shape (n_traj, n_atoms)."""
    return sampler.sample(n_traj)


def excitation_weight(coeffs, basis: ExcitationBasis, atom: int) -> float:
    """Probability that the given atom (1-based) carries an excitation."""
    coeffs = np.asarray(coeffs)
    prob = np.abs(coeffs) ** 2
    return float(sum(prob[s - 1] for s in basis.states_containing(atom)))


@dataclass(frozen=True)
class EnsembleObservables:
    t: np.ndarray               # (n_t,)
    r: np.ndarray               # (n_r,) bin centers
    bin_width: float
    e: np.ndarray               # (n_t, n_r) excitation-weighted density
    rho: np.ndarray             # (n_t, n_r) atomic density
    atom_density: np.ndarray    # (n_t, n_atoms, n_r) per-atom marginals
    pops: np.ndarray            # (n_t, n_surf) mean adiabatic populations
    fractions: np.ndarray       # (n_t, n_surf) active-surface fractions
    mean_positions: np.ndarray  # (n_t, n_atoms)
    mean_weights: np.ndarray    # (n_t, n_atoms) mean excitation per atom
    crossed: np.ndarray         # (n_t,) excitation weight past the midline
    n_traj_effective: int

    @property
    def e_max(self) -> float:
        return float(self.e.max())

    @property
    def rho_max(self) -> float:
        return float(self.rho.max())


class EnsembleAccumulator:
    """Commutative-monoid partial sums over trajectories."""

    def __init__(self, cfg: AggregateConfig):
        edges = cfg.grid_edges
        n_rec = cfg.n_steps // cfg.record_every + 1
        nb = cfg.basis_size
        self.cfg = cfg
        self.edges = edges
        self.n_bins = edges.shape[0] - 1
        self.e_hist = np.zeros((n_rec, self.n_bins))
        self.rho_hist = np.zeros((n_rec, self.n_bins))
        self.atom_hist = np.zeros((n_rec, cfg.n_atoms, self.n_bins))
        self.pops_sum = np.zeros((n_rec, nb))
        self.frac_count = np.zeros((n_rec, nb), dtype=np.int64)
        self.mean_pos_sum = np.zeros((n_rec, cfg.n_atoms))
        self.weight_sum = np.zeros((n_rec, cfg.n_atoms))
        self.crossed_sum = np.zeros(n_rec)
        self.hops = []
        self.n_traj = 0
        self.n_dropped = 0
        self.max_drift = 0.0
        # midline bookkeeping from the mean geometry, identical across workers
        mid = 0.5 * (min(cfg.positions0) + max(cfg.positions0))
        self.midline = mid
        self.side0 = np.sign(np.asarray(cfg.positions0) - mid)
        self.side0[np.abs(np.asarray(cfg.positions0) - mid) < 0.5 * cfg.bin_width] = 0.0

    def add(self, result: TrajectoryResult, traj_index: int):
        cfg = self.cfg
        n_rec = result.positions.shape[0]
        t_idx = np.repeat(np.arange(n_rec), cfg.n_atoms)
        bins = np.floor((result.positions - self.edges[0]) / cfg.bin_width).astype(np.int64)
        np.clip(bins, 0, self.n_bins - 1, out=bins)
        flat = bins.ravel()
        np.add.at(self.e_hist, (t_idx, flat), result.weights.ravel())
        np.add.at(self.rho_hist, (t_idx, flat), 1.0)
        a_idx = np.tile(np.arange(cfg.n_atoms), n_rec)
        np.add.at(self.atom_hist, (t_idx, a_idx, flat), 1.0)
        self.pops_sum += result.adiab_pops
        self.frac_count[np.arange(n_rec), result.surface - 1] += 1
        self.mean_pos_sum += result.positions
        self.weight_sum += result.weights
        side = np.sign(result.positions - self.midline)
        wrong = (side != self.side0[None, :]) & (self.side0[None, :] != 0.0)
        self.crossed_sum += np.sum(result.weights * wrong, axis=1)
        for h in result.hops:
            self.hops.append((traj_index, h.t, h.from_surface, h.to_surface,
                              int(h.accepted), int(h.frustrated),
                              h.kinetic_adjustment))
        self.n_traj += 1
        self.max_drift = max(self.max_drift, result.diagnostics["max_energy_drift"])

    def merge(self, other: "EnsembleAccumulator"):
        self.e_hist += other.e_hist
        self.rho_hist += other.rho_hist
        self.atom_hist += other.atom_hist
        self.pops_sum += other.pops_sum
        self.frac_count += other.frac_count
        self.mean_pos_sum += other.mean_pos_sum
        self.weight_sum += other.weight_sum
        self.crossed_sum += other.crossed_sum
        self.hops.extend(other.hops)
        self.n_traj += other.n_traj
        self.n_dropped += other.n_dropped
        self.max_drift = max(self.max_drift, other.max_drift)
        return self

    def finalize(self) -> EnsembleObservables:
        cfg = self.cfg
        n = self.n_traj
        if n == 0:
            raise RuntimeError("no trajectories survived")
        n_rec = self.e_hist.shape[0]
        t = np.arange(n_rec) * cfg.out_stride
        centers = self.edges[:-1] + 0.5 * cfg.bin_width
        norm = 1.0 / (n * cfg.bin_width)
        return EnsembleObservables(
            t=t, r=centers, bin_width=cfg.bin_width,
            e=self.e_hist * norm,
            rho=self.rho_hist * norm,
            atom_density=self.atom_hist * norm,
            pops=self.pops_sum / n,
            fractions=self.frac_count / n,
            mean_positions=self.mean_pos_sum / n,
            mean_weights=self.weight_sum / n,
            crossed=self.crossed_sum / (n * cfg.n_excitations),
            n_traj_effective=n,
        )


def aggregate(results, cfg: AggregateConfig, indices=None) -> EnsembleObservables:
    """Fold an iterable of TrajectoryResult into ensemble observables."""
    acc = EnsembleAccumulator(cfg)
    for j, res in enumerate(results):
        acc.add(res, traj_index=indices[j] if indices is not None else j)
    return acc.finalize()


def reference_vector(cfg: AggregateConfig):
    """Initial-state anchor: eigenvector at the idealized geometry, or None."""
    if not cfg.ref_positions:
        return None
    ham = hamiltonian_for(cfg)
    spec = diagonalize(ham, np.asarray(cfg.ref_positions, dtype=np.float64))
    return np.ascontiguousarray(spec.vector(cfg.initial_surface))


def prepare_initial(cfg: AggregateConfig, positions, velocities, ref_vec,
                    rng=None) -> TrajectoryState:
    """Starting TrajectoryState at a sampled geometry.

    With a reference vector, the surface with maximal overlap against it
    is selected; otherwise the configured index is used directly.
    """
    ham = hamiltonian_for(cfg)
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    spec = diagonalize(ham, positions)
    if ref_vec is None:
        k = cfg.initial_surface
    else:
        k = int(np.argmax(np.abs(spec.vectors.T @ ref_vec))) + 1
    return TrajectoryState(
        t=0.0, positions=positions.copy(),
        velocities=np.asarray(velocities, dtype=np.float64).copy(),
        coeffs=spec.vector(k).astype(np.complex128),
        surface=k, spectrum=spec, rng=rng,
    )


def _trajectory_uniforms(cfg: AggregateConfig, traj_index: int) -> np.ndarray:
    seq = np.random.SeedSequence(entropy=cfg.rng_seed, spawn_key=(traj_index,))
    rng = np.random.default_rng(seq)
    return rng.random(cfg.n_steps)


def _run_chunk(args):
    cfg, indices, pos_block, vel_block, ref_vec = args
    acc = EnsembleAccumulator(cfg)
    for j, i in enumerate(indices):
        init = prepare_initial(cfg, pos_block[j], vel_block[j], ref_vec)
        uniforms = _trajectory_uniforms(cfg, i) if cfg.mode == "fssh" else np.empty(0)
        try:
            res = run_trajectory(cfg, init, uniforms)
        except TrajectoryCollapse:
            log.warning("trajectory %d hit the distance guard, dropped", i)
            acc.n_dropped += 1
            continue
        acc.add(res, traj_index=i)
    return acc


def run_ensemble(cfg: AggregateConfig):
    """Run the full swarm; returns (EnsembleObservables, hop rows, diagnostics)."""
    cfg.validate()
    sampler = InitialSampler(means=cfg.positions0, sigma=cfg.sigma,
                             sigma_v=cfg.sigma_v, seed=cfg.rng_seed)
    pos, vel = sampler.sample(cfg.n_traj)
    ref_vec = reference_vector(cfg)

    chunk_args = []
    for start in range(0, cfg.n_traj, CHUNK):
        idx = list(range(start, min(start + CHUNK, cfg.n_traj)))
        chunk_args.append((cfg, idx, pos[idx], vel[idx], ref_vec))

    if cfg.n_workers == 1:
        parts = [_run_chunk(a) for a in chunk_args]
    else:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(processes=cfg.n_workers) as pool:
            parts = pool.map(_run_chunk, chunk_args)

    total = parts[0]
    for part in parts[1:]:
        total.merge(part)
    obs = total.finalize()
    diag = {"n_dropped": total.n_dropped, "max_energy_drift": total.max_drift}
    return obs, total.hops, diag


def write_outputs(obs: EnsembleObservables, cfg: AggregateConfig, hops, outdir):
    """Emit the CSV set and the meta echo into a directory."""
    import os
    os.makedirs(outdir, exist_ok=True)

    def _density(path, grid):
        rows = ["t,r,value"]
        for it, tv in enumerate(obs.t):
            for ir, rv in enumerate(obs.r):
                rows.append(f"{float(tv)!r},{float(rv)!r},{float(grid[it, ir])!r}")
        _write(path, rows)

    def _write(path, rows):
        with open(os.path.join(outdir, path), "w") as fh:
            fh.write("\n".join(rows) + "\n")

    _density("density_e.csv", obs.e)
    _density("density_rho.csv", obs.rho)

    rows = ["t,k,p_tilde,f"]
    for it, tv in enumerate(obs.t):
        for k in range(obs.pops.shape[1]):
            rows.append(f"{float(tv)!r},{k + 1},{float(obs.pops[it, k])!r},"
                        f"{float(obs.fractions[it, k])!r}")
    _write("populations.csv", rows)

    rows = ["t,atom,value"]
    for it, tv in enumerate(obs.t):
        for a in range(obs.mean_positions.shape[1]):
            rows.append(f"{float(tv)!r},{a + 1},{float(obs.mean_positions[it, a])!r}")
    _write("mean_positions.csv", rows)

    rows = ["traj,t,from_surface,to_surface,accepted,frustrated,kinetic_adjustment"]
    for h in hops:
        rows.append(f"{h[0]},{float(h[1])!r},{h[2]},{h[3]},{h[4]},{h[5]},"
                    f"{float(h[6])!r}")
    _write("hops.csv", rows)

    meta = config_text(cfg)
    meta += f"e0 = {obs.e_max!r}\n"
    meta += f"rho0 = {obs.rho_max!r}\n"
    meta += f"n_traj_effective = {obs.n_traj_effective}\n"
    with open(os.path.join(outdir, "meta"), "w") as fh:
        fh.write(meta)
