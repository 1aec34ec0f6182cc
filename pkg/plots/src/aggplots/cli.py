"""Command line: render one figure kind from a simulation output directory."""

import argparse
import os
import sys

from . import figures, io

KINDS = ("tiles", "trajectories", "heatmap", "populations")


def build_parser():
    ap = argparse.ArgumentParser(prog="aggplots",
                                 description="render flexagg CSV outputs")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--in", dest="indir", required=True,
                   help="directory with the CSV outputs")
    p.add_argument("--out", required=True, help="output image path (.png)")
    p.add_argument("--field", choices=("e", "rho"), default="e",
                   help="which density the heatmap shows")
    return ap


def _render(args):
    d = args.indir
    if args.kind == "tiles":
        tiles, n_atoms = io.load_coefficients(os.path.join(d, "coefficients.csv"))
        fig = figures.tiles_figure(tiles, n_atoms)
    elif args.kind == "trajectories":
        t, x = io.load_mean_positions(os.path.join(d, "mean_positions.csv"))
        fig = figures.trajectories_figure(t, x)
    elif args.kind == "heatmap":
        name = "density_e.csv" if args.field == "e" else "density_rho.csv"
        key = "e0" if args.field == "e" else "rho0"
        grid = io.load_density(os.path.join(d, name))
        meta = io.load_meta(os.path.join(d, "meta"))
        scale = io.normalization(meta, key, os.path.join(d, "meta"))
        overlays = None
        tracks = os.path.join(d, "mean_positions.csv")
        if os.path.exists(tracks):
            overlays = io.load_mean_positions(tracks)
        label = f"{args.field}(r,t) / {key}"
        fig = figures.heatmap_figure(grid, scale, overlays=overlays, label=label)
    else:
        t, p, f = io.load_populations(os.path.join(d, "populations.csv"))
        fig = figures.populations_figure(t, p, f)
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _render(args)
    except io.PlotInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
