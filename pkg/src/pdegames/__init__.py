"""Minimax dynamic-programming schemes for front propagation and nonlocal
parabolic equations, with independent oracle solvers and property suites."""

from .cutoff import CutoffParams, cutoff, eikonal_time_reset, icf_time_reset
from .errors import ConfigError, InputError, NumericalError, PdegamesError
from .fields import Grid, QuadraticTest, ScalarField, eval_test, interpolate

__all__ = [
    "ConfigError", "CutoffParams", "Grid", "InputError", "NumericalError",
    "PdegamesError", "QuadraticTest", "ScalarField", "cutoff",
    "eikonal_time_reset", "eval_test", "icf_time_reset", "interpolate",
]

__version__ = "0.1.0"
