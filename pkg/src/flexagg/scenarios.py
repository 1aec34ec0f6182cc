"""Named run setups covering the static analyses and the dynamics studies.

Geometries are 5-atom chains with base separation d and end dislocations
at d/2: ``regular`` (homogeneous), ``dislocated-end`` (one end pulled
in) and ``doubly-dislocated`` (both ends).  Initial electronic states
are anchored to an eigenvector of the idealized mean geometry; each
sampled trajectory starts on its own surface of maximal overlap with
that anchor.
"""

import os

from .config import AggregateConfig, with_overrides
from . import units

D_UM = 5.0          # base lattice separation
A_UM = 2.5          # dislocation offset, d/2

C3_INT = units.mhz_to_angular(units.C3_MHZ_UM3)
C6_INT = units.mhz_to_angular(units.C6_MHZ_UM6)


def regular_chain(n=5, d=D_UM):
    return tuple(d * i for i in range(n))


def dislocated_chain(n=5, d=D_UM, a=A_UM):
    """Regular chain with the last atom pulled in to distance a."""
    pos = [d * i for i in range(n)]
    pos[-1] = pos[-2] + a
    return tuple(pos)


def doubly_dislocated_chain(n=5, d=D_UM, a=A_UM):
    """Both end atoms sit at distance a from their neighbors."""
    inner = [a + d * i for i in range(n - 2)]
    return tuple([inner[0] - a] + inner + [inner[-1] + a])


def _base(**kw):
    kw.setdefault("n_atoms", 5)
    kw.setdefault("n_excitations", 2)
    kw.setdefault("c3", C3_INT)
    kw.setdefault("c6", C6_INT)
    return AggregateConfig(**kw)


def _homog5():
    return _base(scenario="homog5", positions0=regular_chain(),
                 mode="fixed", sigma=0.0, n_traj=1, t_final=0.01,
                 initial_surface=1, rng_seed=1)


def _disloc5():
    return _base(scenario="disloc5", positions0=dislocated_chain(),
                 mode="fixed", sigma=0.0, n_traj=1, t_final=0.01,
                 initial_surface=1, rng_seed=2)


def _fixed_surface():
    # single ideal single-excitation trajectory on the fully repulsive
    # (nodeless) surface; override initial_surface=1 and a longer
    # t_final for the attractive run with its VdW rebound
    return _base(scenario="fixed-surface", n_excitations=1,
                 positions0=regular_chain(), mode="fixed", sigma=0.0,
                 n_traj=1, t_final=1.5, initial_surface=5, rng_seed=3)


def _collision():
    pos = doubly_dislocated_chain()
    return _base(scenario="collision", positions0=pos, mode="fssh",
                 t_final=3.0, initial_surface=10, ref_positions=pos,
                 rng_seed=4)


def _gate(which):
    # incoming pulse on the dislocated end pair; the remaining trimer
    # carries the gate exciton that routes it (reflect for a, pass for b)
    pos = dislocated_chain()
    return _base(scenario=f"gate-{which}", positions0=pos, mode="fssh",
                 t_final=6.0, n_traj=500,
                 initial_surface=9 if which == "a" else 10,
                 ref_positions=pos, rng_seed=5 if which == "a" else 6)


def _nonadiabatic():
    pos = doubly_dislocated_chain()
    return _base(scenario="nonadiabatic", positions0=pos, mode="fssh",
                 t_final=1.5, initial_surface=9, ref_positions=pos,
                 rng_seed=7)


SCENARIOS = {
    "homog5": _homog5,
    "disloc5": _disloc5,
    "fixed-surface": _fixed_surface,
    "collision": _collision,
    "gate-a": lambda: _gate("a"),
    "gate-b": lambda: _gate("b"),
    "nonadiabatic": _nonadiabatic,
}


def resolve_scenario(name_or_path, **overrides) -> AggregateConfig:
    """Scenario name or config-file path to a validated AggregateConfig.

    A config file may name a ``scenario`` base; its other keys then act
    as overrides.  Without a base the file must be self-contained.
    """
    if name_or_path in SCENARIOS:
        cfg = SCENARIOS[name_or_path]()
    elif os.path.exists(str(name_or_path)):
        from .config import parse_config_text
        with open(name_or_path) as fh:
            fields = parse_config_text(fh.read())
        base_name = fields.pop("scenario", "")
        if base_name:
            if base_name not in SCENARIOS:
                raise ValueError(f"config names unknown scenario {base_name!r}")
            cfg = with_overrides(SCENARIOS[base_name](), **fields)
        else:
            missing = {"n_atoms", "n_excitations", "positions0", "c3", "c6"} - set(fields)
            if missing:
                raise ValueError(f"config missing required keys: {sorted(missing)}")
            cfg = AggregateConfig(**fields).validate()
    else:
        known = ", ".join(sorted(SCENARIOS))
        raise ValueError(f"unknown scenario {name_or_path!r} (known: {known})")
    return with_overrides(cfg, **overrides)
