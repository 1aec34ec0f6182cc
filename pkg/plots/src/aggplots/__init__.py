"""Rendering of flexagg CSV outputs as publication-style figures."""

from .io import PlotInputError

__all__ = ["PlotInputError"]
