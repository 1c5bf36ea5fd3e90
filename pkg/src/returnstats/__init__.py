"""Return-time statistics of interval maps via first-return (induced) systems.

Builds first-return maps of one-dimensional dynamical systems, estimates
invariant measures, and statistically verifies the exponential return-time
law, the Poisson visit law, and the invariance of the law under inducing.
"""

__version__ = "0.1.0"

from .errors import ReturnStatsError
from .maps import PiecewiseMap, Orbit, builtin, parse_map_spec
from .inducing import IntervalSet, InducedSystem
from .kernels import BACKEND as kernel_backend
