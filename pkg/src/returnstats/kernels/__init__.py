"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the pure
Python twin is the fallback.  Set RETURNSTATS_PURE=1 to force the fallback
(used by the backend-equivalence tests and the benchmark).
"""

import os

from . import pure
from .mapspec import (MapKernelSpec, doubling_spec, tent_spec, logistic_spec,
                      lsv_spec, pwl_spec)

try:
    from . import _speedups as _compiled
except ImportError:
    _compiled = None

if os.environ.get("RETURNSTATS_PURE"):
    active = pure
else:
    active = _compiled if _compiled is not None else pure

BACKEND = active.BACKEND
LATTICE_Q = pure.LATTICE_Q

step = active.step
orbit_array = active.orbit_array
sampling_orbit = active.sampling_orbit
apply_map = active.apply_map
first_return = active.first_return
collect_return_gaps = active.collect_return_gaps
collect_hitting_times = active.collect_hitting_times
collect_induced_gaps = active.collect_induced_gaps
birkhoff_counts = active.birkhoff_counts
orbit_bin_indices = active.orbit_bin_indices
set_mass_count = active.set_mass_count
visit_window_counts = active.visit_window_counts


def available_backends():
    names = ["pure"]
    if _compiled is not None:
        names.append("compiled")
    return names


def get_backend(name):
    """Return a kernel module by name ('pure' or 'compiled')."""
    if name == "pure":
        return pure
    if name == "compiled":
        if _compiled is None:
            raise ValueError("compiled backend not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
