"""Figure builders: pure functions from loaded arrays to matplotlib figures.

Tile grids use a diverging scale centered at zero because the sign
pattern of the coefficients is the point of the plot; densities use a
sequential scale normalized by the stored reference value.
"""

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import PlotInputError


def normalize_density(values, scale):
    """Scale a density grid by a stored positive reference value."""
    if not scale > 0:
        raise PlotInputError(f"normalization constant must be positive, got {scale!r}")
    return np.asarray(values) / scale


def tiles_figure(tiles, n_atoms):
    """One signed-colormap panel per eigenstate, row = n, column = m."""
    if not tiles:
        raise PlotInputError("no eigenstates in coefficient table")
    order = sorted(tiles)
    n_panels = len(order)
    n_cols = min(5, n_panels)
    n_rows = math.ceil(n_panels / n_cols)
    fig, axes = plt.subplots(n_rows, n_cols,
                             figsize=(2.1 * n_cols, 2.1 * n_rows),
                             squeeze=False)
    vmax = max(np.nanmax(np.abs(m)) for m in tiles.values())
    cmap = plt.get_cmap("RdBu_r").copy()
    cmap.set_bad("0.85")
    last = None
    for ax, k in zip(axes.ravel(), order):
        mat = np.ma.masked_invalid(tiles[k])
        last = ax.imshow(mat, cmap=cmap, vmin=-vmax, vmax=vmax,
                         origin="upper", extent=(0.5, n_atoms + 0.5,
                                                 n_atoms + 0.5, 0.5))
        ax.set_title(f"state {k}", fontsize=9)
        ax.set_xticks(range(1, n_atoms + 1))
        ax.set_yticks(range(1, n_atoms + 1))
        ax.tick_params(labelsize=7)
    for ax in axes.ravel()[n_panels:]:
        ax.set_axis_off()
    fig.colorbar(last, ax=axes, shrink=0.8, label="coefficient")
    return fig


def trajectories_figure(t, positions):
    """Fan of atom tracks over time."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for a in range(positions.shape[1]):
        ax.plot(t, positions[:, a], lw=1.4, label=f"atom {a + 1}")
    ax.set_xlabel("t (us)")
    ax.set_ylabel("position (um)")
    ax.legend(fontsize=8, loc="best")
    ax.margins(x=0)
    return fig


def heatmap_figure(grid, scale, overlays=None, label="e(r,t) / e0"):
    """Density heatmap over (t, r), normalized by the stored reference.

    ``overlays``, when given, is (t, positions) with mean atom tracks
    drawn on top of the color map.
    """
    values = normalize_density(grid.values, scale)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    im = ax.imshow(values.T, origin="lower", aspect="auto",
                   cmap="magma", vmin=0.0, vmax=1.0,
                   extent=(grid.t[0], grid.t[-1], grid.r[0], grid.r[-1]))
    if overlays is not None:
        t_ov, x_ov = overlays
        for a in range(x_ov.shape[1]):
            ax.plot(t_ov, x_ov[:, a], color="w", lw=0.9, alpha=0.85)
        ax.set_xlim(grid.t[0], grid.t[-1])
        ax.set_ylim(grid.r[0], grid.r[-1])
    ax.set_xlabel("t (us)")
    ax.set_ylabel("r (um)")
    fig.colorbar(im, ax=ax, label=label)
    return fig


def populations_figure(t, p_tilde, fractions):
    """Mean quantum populations (solid) and trajectory fractions (dashed)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    colors = plt.get_cmap("tab10")
    for k in range(p_tilde.shape[1]):
        c = colors(k % 10)
        ax.plot(t, p_tilde[:, k], color=c, lw=1.4, label=f"surface {k + 1}")
        ax.plot(t, fractions[:, k], color=c, lw=1.0, ls="--")
    ax.set_xlabel("t (us)")
    ax.set_ylabel("population / fraction")
    ax.set_ylim(-0.02, 1.02)
    ax.margins(x=0)
    ax.legend(fontsize=7, ncols=2, loc="center right")
    return fig
