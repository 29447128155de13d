"""Feasibility checking and planning for signal temporal logic missions."""

from .decompose import SubformulaSet, decompose
from .fields import TRUE_VALUE, Grid, ValueField, value_and, value_at, value_not, value_or
from .scenario import Scenario, load_scenario
from .stl import Formula, Trajectory, format_stl, parse_stl, robustness

__version__ = "0.1.0"
