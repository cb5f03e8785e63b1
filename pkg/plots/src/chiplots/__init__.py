"""Render pump-probe witness CSV outputs as static figures.

Consumes exactly the CSV schemas written by the simulation CLI
(chi_curve.csv / witness.csv / rsweep.csv) and produces deterministic PNG or
SVG images: fixed figure size, fixed fonts, no timestamps, no randomness.
"""

from .figures import FigureSpec, SchemaError, render

__version__ = "0.1.0"

__all__ = ["FigureSpec", "SchemaError", "render", "__version__"]
