"""Render publication-style figures from qvdp experiment CSV files.

Consumes only the CSV formats written by the ``qvdp`` CLI (self-describing
headers, documented in the main package README); renders deterministic
raster images with fixed color scales per figure family so panels stay
cross-comparable.
"""

from qvdp_figures.io import CsvTable, InputError, read_csv, read_wigner_grid
from qvdp_figures.render import FIGURES, FigureSpec, render, ridge_radius

__version__ = "0.1.0"
