"""Run configuration: internal units inside, explicit units at the file boundary.

Config files are flat ``key = value`` text with units spelled out in key
names (``c3_mhz_um3``, ``sigma_um``).  Interaction strengths convert to
angular frequency on load; everything downstream works in micrometers,
microseconds and rad/us.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import units

MODES = ("fssh", "fixed")

# trajectory-level guards, shared by every run
R_MIN_UM = 0.1
EPS_DEG = 1e-6      # rad/us, degeneracy guard for coupling denominators
D_MAX = 1e6         # 1/um, cap on guarded coupling components


@dataclass(frozen=True)
class AggregateConfig:
    """Fully-resolved settings for one ensemble run."""

    n_atoms: int
    n_excitations: int
    positions0: tuple           # mean initial positions, um, ascending
    c3: float                   # rad/us * um^3
    c6: float                   # rad/us * um^6
    mass_kg: float = units.MASS_KG
    sigma: float = 0.3          # initial position spread, um
    n_traj: int = 2000
    dt_nuclear: float = 1e-4    # us
    n_sub_electronic: int = 10
    t_final: float = 1.5        # us
    out_stride: float = 1e-2    # us between recorded snapshots
    bin_width: float = 0.25     # um
    grid_margin: float = 12.0   # um beyond the mean geometry span
    initial_surface: int = 1    # 1-based adiabatic index
    ref_positions: tuple = ()   # idealized geometry anchoring the initial state
    mode: str = "fssh"
    freeze_coefficients: bool = False
    reverse_frustrated: bool = False
    rng_seed: int = 0
    n_workers: int = 1
    scenario: str = ""

    @property
    def mass(self) -> float:
        """Mass in internal units (energy in rad/us, lengths um, time us)."""
        return units.mass_to_internal(self.mass_kg)

    @property
    def sigma_v(self) -> float:
        """Initial velocity spread, um/us; zero when sampling is off."""
        if self.sigma == 0.0:
            return 0.0
        return units.thermal_velocity_sigma(self.mass, self.sigma)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt_nuclear))

    @property
    def record_every(self) -> int:
        return int(round(self.out_stride / self.dt_nuclear))

    @property
    def basis_size(self) -> int:
        from math import comb
        return comb(self.n_atoms, self.n_excitations)

    @property
    def grid_edges(self) -> np.ndarray:
        lo = min(self.positions0) - self.grid_margin
        hi = max(self.positions0) + self.grid_margin
        n_bins = int(np.ceil((hi - lo) / self.bin_width))
        return lo + self.bin_width * np.arange(n_bins + 1)

    def validate(self):
        if self.n_atoms < 2:
            raise ValueError("need at least two atoms")
        if self.n_excitations not in (1, 2):
            raise ValueError("supported excitation counts are 1 and 2")
        if self.n_excitations >= self.n_atoms:
            raise ValueError("excitations must be fewer than atoms")
        if len(self.positions0) != self.n_atoms:
            raise ValueError("positions0 length must equal n_atoms")
        if not 1 <= self.initial_surface <= self.basis_size:
            raise ValueError(
                f"initial_surface {self.initial_surface} outside 1..{self.basis_size}")
        if self.ref_positions and len(self.ref_positions) != self.n_atoms:
            raise ValueError("ref_positions length must equal n_atoms")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.dt_nuclear <= 0 or self.t_final <= 0 or self.out_stride <= 0:
            raise ValueError("time settings must be positive")
        if self.record_every < 1:
            raise ValueError("out_stride smaller than dt_nuclear")
        if self.n_steps % self.record_every != 0:
            raise ValueError("t_final must be a whole number of output strides")
        if self.sigma < 0 or self.mass_kg <= 0:
            raise ValueError("bad sampler settings")
        if self.n_traj < 1 or self.n_workers < 1 or self.n_sub_electronic < 1:
            raise ValueError("counts must be at least 1")
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        return self


# file keys <-> config fields; unit-bearing keys get converted on load
_PLAIN_KEYS = {
    "n_atoms": int,
    "n_excitations": int,
    "n_traj": int,
    "n_sub_electronic": int,
    "initial_surface": int,
    "seed": int,
    "n_workers": int,
    "mode": str,
    "scenario": str,
    "mass_kg": float,
    "sigma_um": float,
    "dt_us": float,
    "t_final_us": float,
    "out_stride_us": float,
    "bin_width_um": float,
    "grid_margin_um": float,
    "freeze_coefficients": bool,
    "reverse_frustrated": bool,
}

_FIELD_OF_KEY = {
    "sigma_um": "sigma",
    "dt_us": "dt_nuclear",
    "t_final_us": "t_final",
    "out_stride_us": "out_stride",
    "bin_width_um": "bin_width",
    "grid_margin_um": "grid_margin",
    "seed": "rng_seed",
}


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config_text(text: str) -> dict:
    """Parse flat key = value lines into a field dict (internal units)."""
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key == "positions_um":
                fields["positions0"] = tuple(float(x) for x in value.split(","))
            elif key == "ref_positions_um":
                fields["ref_positions"] = tuple(float(x) for x in value.split(","))
            elif key == "c3_mhz_um3":
                fields["c3"] = units.mhz_to_angular(float(value))
            elif key == "c6_mhz_um6":
                fields["c6"] = units.mhz_to_angular(float(value))
            elif key in _PLAIN_KEYS:
                caster = _PLAIN_KEYS[key]
                parsed = _parse_bool(value) if caster is bool else caster(value)
                fields[_FIELD_OF_KEY.get(key, key)] = parsed
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ValueError(f"line {lineno}, key {key!r}: {exc}") from None
    return fields


def load_config(path) -> AggregateConfig:
    with open(path) as fh:
        fields = parse_config_text(fh.read())
    missing = {"n_atoms", "n_excitations", "positions0", "c3", "c6"} - set(fields)
    if missing:
        raise ValueError(f"config missing required keys: {sorted(missing)}")
    return AggregateConfig(**fields).validate()


def config_text(cfg: AggregateConfig) -> str:
    """Serialize to the file format, bit-exact roundtrip of every float."""
    lines = []
    if cfg.scenario:
        lines.append(f"scenario = {cfg.scenario}")
    lines += [
        f"n_atoms = {cfg.n_atoms}",
        f"n_excitations = {cfg.n_excitations}",
        "positions_um = " + ",".join(repr(p) for p in cfg.positions0),
        f"c3_mhz_um3 = {cfg.c3 / (2.0 * np.pi)!r}",
        f"c6_mhz_um6 = {cfg.c6 / (2.0 * np.pi)!r}",
        f"mass_kg = {cfg.mass_kg!r}",
        f"sigma_um = {cfg.sigma!r}",
        f"n_traj = {cfg.n_traj}",
        f"dt_us = {cfg.dt_nuclear!r}",
        f"n_sub_electronic = {cfg.n_sub_electronic}",
        f"t_final_us = {cfg.t_final!r}",
        f"out_stride_us = {cfg.out_stride!r}",
        f"bin_width_um = {cfg.bin_width!r}",
        f"grid_margin_um = {cfg.grid_margin!r}",
        f"initial_surface = {cfg.initial_surface}",
    ]
    if cfg.ref_positions:
        lines.append("ref_positions_um = " + ",".join(repr(p) for p in cfg.ref_positions))
    lines += [
        f"mode = {cfg.mode}",
        f"freeze_coefficients = {str(cfg.freeze_coefficients).lower()}",
        f"reverse_frustrated = {str(cfg.reverse_frustrated).lower()}",
        f"seed = {cfg.rng_seed}",
        f"n_workers = {cfg.n_workers}",
    ]
    return "\n".join(lines) + "\n"


def with_overrides(cfg: AggregateConfig, **overrides) -> AggregateConfig:
    """Replace fields, dropping None values, and re-validate."""
    clean = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **clean).validate()
