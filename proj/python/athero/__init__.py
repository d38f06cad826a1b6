"""Spectral solvers for optimal control of a free-boundary plaque growth model."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
