"""Figure rendering for trajectory CSV logs produced by the phtrack CLI."""

from .reader import CsvFormatError, MissingColumnError, TrajectoryData, read_trajectory
from .render import FIGURE_IDS, FigureSpec, render

__version__ = "0.1.0"

__all__ = [
    "CsvFormatError",
    "MissingColumnError",
    "TrajectoryData",
    "read_trajectory",
    "FIGURE_IDS",
    "FigureSpec",
    "render",
]
