"""Sweep driver and figure regenerator for the sasim simulator CLI."""

__version__ = "0.1.0"

from .figures import FAMILIES, FigureResult, plot
from .index import IndexEntry, read_index, write_index
from .runner import MissingSimulatorError, sweep
from .sweep import SweepSpec, Workload
