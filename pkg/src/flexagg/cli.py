"""Command-line driver: static spectra reports, ensemble runs, self-checks.

Exit codes: 0 success, 1 usage problem (bad flags, unknown scenario,
malformed config), 2 runtime failure.
"""

import argparse
import os
import sys

import numpy as np

from .config import config_text, with_overrides
from .decompose import decompose_biexcitons
from .dynamics import hamiltonian_for, surface_force, nonadiabatic_coupling
from .ensemble import run_ensemble, write_outputs
from .scenarios import resolve_scenario
from .spectra import diagonalize
from . import units


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    parser = _Parser(prog="flexagg",
                     description="Excitation transport on flexible atom chains")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="named scenario")
    common.add_argument("--config", help="config file path")
    common.add_argument("--out", default="out", help="output directory")

    p_spec = sub.add_parser("spectra", parents=[common],
                            help="diagonalize and classify eigenstates")
    p_spec.set_defaults(func=_cmd_spectra)

    p_run = sub.add_parser("run", parents=[common], help="run a trajectory ensemble")
    p_run.add_argument("--n-traj", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--dt", type=float, default=None, help="nuclear step, us")
    p_run.add_argument("--mode", choices=("fssh", "fixed"), default=None)
    p_run.add_argument("--workers", type=int, default=None)
    p_run.set_defaults(func=_cmd_run)

    p_check = sub.add_parser("check", help="built-in oracle self-tests")
    p_check.set_defaults(func=_cmd_check)
    return parser


def _resolve_from_args(args, **extra):
    target = args.config or args.scenario
    if not target:
        raise _UsageError("provide --scenario or --config")
    return resolve_scenario(target, **extra)


def _cmd_spectra(args):
    cfg = _resolve_from_args(args)
    ham = hamiltonian_for(cfg)
    positions = np.asarray(cfg.positions0, dtype=np.float64)
    spec = diagonalize(ham, positions)
    os.makedirs(args.out, exist_ok=True)

    rows = ["k,energy"]
    for k in range(1, spec.size + 1):
        rows.append(f"{k},{float(spec.energies[k - 1])!r}")
    _write(args.out, "energies.csv", rows)

    basis = ham.basis
    rows = ["k,n,m,value"] if basis.q == 2 else ["k,n,value"]
    for k in range(1, spec.size + 1):
        vec = spec.vector(k)
        for idx, state in enumerate(basis.states):
            cell = ",".join(str(x) for x in state)
            rows.append(f"{k},{cell},{float(vec[idx])!r}")
    _write(args.out, "coefficients.csv", rows)

    if basis.q == 2 and basis.n_atoms >= 3:
        part = (tuple(range(1, basis.n_atoms - 1)),
                (basis.n_atoms - 1, basis.n_atoms))
        dec = decompose_biexcitons(spec, part, ham, positions)
        rows = ["state,energy,verdict,k_A,k_B,fidelity"]
        for state, energy, verdict, ka, kb, fid in dec.rows():
            rows.append(f"{state},{energy!r},{verdict},{ka},{kb},{fid!r}")
        _write(args.out, "decomposition.csv", rows)

    with open(os.path.join(args.out, "meta"), "w") as fh:
        fh.write(config_text(cfg))
    print(f"spectra written to {args.out}")
    return 0


def _cmd_run(args):
    cfg = _resolve_from_args(args, n_traj=args.n_traj, rng_seed=args.seed,
                             dt_nuclear=args.dt, mode=args.mode,
                             n_workers=args.workers)
    sys.stdout.write(config_text(cfg))
    sys.stdout.flush()
    obs, hops, diag = run_ensemble(cfg)
    write_outputs(obs, cfg, hops, args.out)
    print(f"completed {obs.n_traj_effective}/{cfg.n_traj} trajectories, "
          f"dropped {diag['n_dropped']}, "
          f"max energy drift {diag['max_energy_drift']:.2e}")
    print(f"outputs written to {args.out}")
    return 0


def _write(outdir, name, rows):
    with open(os.path.join(outdir, name), "w") as fh:
        fh.write("\n".join(rows) + "\n")


def _cmd_check(args):
    failures = []

    def report(name, ok, detail=""):
        line = f"ok - {name}" if ok else f"FAIL - {name}: {detail}"
        print(line)
        if not ok:
            failures.append(name)

    c3 = units.mhz_to_angular(units.C3_MHZ_UM3)
    c6 = units.mhz_to_angular(units.C6_MHZ_UM6)

    # dimer analytics: energies diag +/- C3/d^3
    from .hamiltonian import build_hamiltonian
    d = 5.0
    ham = build_hamiltonian(2, 1, c3=c3, c6=c6)
    spec = diagonalize(ham, np.array([0.0, d]))
    coupling = c3 / d**3
    diag_val = c6 / d**6
    err = max(abs(spec.energies[0] - (diag_val - coupling)),
              abs(spec.energies[1] - (diag_val + coupling)))
    report("dimer eigenvalues", err < 1e-9 * coupling, f"err={err:.3e}")

    # Hellmann-Feynman force vs finite difference on a 5-atom geometry
    rng = np.random.default_rng(20260822)
    ham5 = hamiltonian_for(resolve_scenario("disloc5"))
    pos = np.sort(rng.uniform(0.0, 20.0, 5))
    pos += np.arange(5) * 2.0  # keep comfortable separations
    spec5 = diagonalize(ham5, pos)
    surface = 4
    F = surface_force(pos, spec5, surface, ham5)
    h = 1e-6
    worst = 0.0
    for a in range(5):
        shifted = pos.copy()
        shifted[a] += h
        hi = np.linalg.eigvalsh(ham5.matrix(shifted))[surface - 1]
        shifted[a] -= 2 * h
        lo = np.linalg.eigvalsh(ham5.matrix(shifted))[surface - 1]
        fd = -(hi - lo) / (2 * h)
        worst = max(worst, abs(F[a] - fd) / max(abs(fd), 1e-12))
    report("forces vs finite difference", worst < 1e-5, f"rel={worst:.3e}")

    # coupling antisymmetry
    d12 = nonadiabatic_coupling(pos, spec5, 1, 2, ham5)
    d21 = nonadiabatic_coupling(pos, spec5, 2, 1, ham5)
    asym = np.max(np.abs(d12 + d21))
    report("coupling antisymmetry", asym < 1e-12, f"max={asym:.3e}")

    # lifetime utility
    est = units.lifetime_estimate(70.0, 232.0, 3, 2)
    report("lifetime estimate", abs(est - 19.4) < 0.05, f"value={est:.3f}")

    # short adiabatic run: energy drift
    cfg = with_overrides(resolve_scenario("fixed-surface"), t_final=0.1)
    obs, hops, diag = run_ensemble(cfg)
    report("energy drift (0.1 us)", diag["max_energy_drift"] < 1e-3,
           f"drift={diag['max_energy_drift']:.3e}")

    return 0 if not failures else 2


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures map to a distinct code
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
