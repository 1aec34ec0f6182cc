"""CSV and meta-file loaders with loud schema validation.

Every loader checks the header and the grid structure and raises
PlotInputError naming the file and the offending column; nothing in
this package recomputes physics, it only reshapes what the simulation
wrote.
"""

import csv
import os
from dataclasses import dataclass

import numpy as np


class PlotInputError(ValueError):
    """A data file does not match the expected schema."""


def _read_columns(path, expected):
    if not os.path.exists(path):
        raise PlotInputError(f"{path}: file not found")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PlotInputError(f"{path}: empty file") from None
        if header != list(expected):
            raise PlotInputError(
                f"{path}: expected columns {','.join(expected)}, "
                f"got {','.join(header)}")
        rows = list(reader)
    if not rows:
        raise PlotInputError(f"{path}: no data rows")
    cols = []
    for j, name in enumerate(expected):
        try:
            cols.append(np.array([float(r[j]) for r in rows]))
        except (ValueError, IndexError) as exc:
            raise PlotInputError(f"{path}: bad value in column {name}: {exc}")
    return cols


def _unique_monotone(values, path, name):
    _, first = np.unique(values, return_index=True)
    in_file_order = values[np.sort(first)]
    if not np.all(np.diff(in_file_order) > 0):
        raise PlotInputError(f"{path}: {name} grid is not strictly increasing")
    return in_file_order


@dataclass(frozen=True)
class DensityGrid:
    t: np.ndarray        # (n_t,)
    r: np.ndarray        # (n_r,)
    values: np.ndarray   # (n_t, n_r)


def load_density(path) -> DensityGrid:
    """Read a t,r,value long-format grid into a dense (n_t, n_r) array."""
    t_col, r_col, v_col = _read_columns(path, ("t", "r", "value"))
    t = _unique_monotone(t_col, path, "t")
    r = _unique_monotone(r_col, path, "r")
    if len(v_col) != len(t) * len(r):
        raise PlotInputError(
            f"{path}: {len(v_col)} rows do not fill a "
            f"{len(t)} x {len(r)} grid")
    it = np.searchsorted(t, t_col)
    ir = np.searchsorted(r, r_col)
    values = np.full((len(t), len(r)), np.nan)
    values[it, ir] = v_col
    if np.isnan(values).any():
        raise PlotInputError(f"{path}: grid has missing (t, r) entries")
    return DensityGrid(t=t, r=r, values=values)


def load_populations(path):
    """Read per-surface population and fraction traces.

    Returns (t, p_tilde, fractions) with trace arrays shaped (n_t, n_k).
    """
    t_col, k_col, p_col, f_col = _read_columns(path, ("t", "k", "p_tilde", "f"))
    t = _unique_monotone(t_col, path, "t")
    k = _unique_monotone(k_col, path, "k")
    if len(p_col) != len(t) * len(k):
        raise PlotInputError(f"{path}: incomplete (t, k) grid")
    it = np.searchsorted(t, t_col)
    ik = np.searchsorted(k, k_col)
    p = np.zeros((len(t), len(k)))
    f = np.zeros((len(t), len(k)))
    p[it, ik] = p_col
    f[it, ik] = f_col
    return t, p, f


def load_mean_positions(path):
    """Read mean atom tracks; returns (t, positions shaped (n_t, n_atoms))."""
    t_col, a_col, v_col = _read_columns(path, ("t", "atom", "value"))
    t = _unique_monotone(t_col, path, "t")
    atoms = _unique_monotone(a_col, path, "atom")
    if len(v_col) != len(t) * len(atoms):
        raise PlotInputError(f"{path}: incomplete (t, atom) grid")
    it = np.searchsorted(t, t_col)
    ia = np.searchsorted(atoms, a_col)
    x = np.zeros((len(t), len(atoms)))
    x[it, ia] = v_col
    return t, x


def load_coefficients(path):
    """Read eigenvector coefficient tiles.

    Returns (state index -> (n_atoms, n_atoms) signed matrix, n_atoms);
    cells without a basis entry are NaN so they can be masked.
    """
    k_col, n_col, m_col, v_col = _read_columns(path, ("k", "n", "m", "value"))
    n_atoms = int(max(n_col.max(), m_col.max()))
    tiles = {}
    for k, n, m, v in zip(k_col, n_col, m_col, v_col):
        mat = tiles.setdefault(int(k), np.full((n_atoms, n_atoms), np.nan))
        mat[int(n) - 1, int(m) - 1] = v
        mat[int(m) - 1, int(n) - 1] = v
    return tiles, n_atoms


def load_meta(path):
    """Parse the key = value meta echo; numeric values become floats."""
    if not os.path.exists(path):
        raise PlotInputError(f"{path}: file not found")
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, _, value = line.partition("=")
            value = value.strip()
            try:
                out[key.strip()] = float(value)
            except ValueError:
                out[key.strip()] = value
    return out


def normalization(meta, key, path="meta"):
    """Fetch a stored positive normalization constant (e0 or rho0)."""
    if key not in meta:
        raise PlotInputError(f"{path}: missing normalization constant {key}")
    value = meta[key]
    if not isinstance(value, float) or value <= 0:
        raise PlotInputError(f"{path}: {key} must be a positive number, got {value!r}")
    return value
