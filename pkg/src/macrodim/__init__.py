"""Macroscopic Minkowski dimension: shell counting, random-set simulation and
theoretical dimension oracles."""
from .estimator import DimEstimate, estimate_dim_ball, estimate_dim_shell
from .lattice import PixelSet, ShellCounts, pixelize, shell_counts, shell_of

__all__ = [
    "DimEstimate",
    "PixelSet",
    "ShellCounts",
    "estimate_dim_ball",
    "estimate_dim_shell",
    "pixelize",
    "shell_counts",
    "shell_of",
]
__version__ = "0.1.0"
