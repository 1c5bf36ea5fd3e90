"""Numeric encoding of builtin maps, shared by both kernel backends.

A MapKernelSpec is a flat, picklable description of an interval map that the
hot loops can evaluate without calling back into Python objects.  The two
backends (pure Python and the compiled extension) implement the exact same
arithmetic expressions on this encoding, so their outputs are bit-identical
doubles.
"""

from typing import NamedTuple

import numpy as np

KIND_DOUBLING = 0
KIND_TENT = 1
KIND_LOGISTIC = 2   # p0 = a
KIND_LSV = 3        # p0 = alpha, p1 = 2**alpha
KIND_PWL = 4        # piecewise linear: breaks, slopes, intercepts

_EMPTY = np.empty(0, dtype=np.float64)


class MapKernelSpec(NamedTuple):
    kind: int
    p0: float
    p1: float
    breaks: np.ndarray       # PWL breakpoints, length n_branches + 1
    slopes: np.ndarray
    intercepts: np.ndarray


def doubling_spec():
    return MapKernelSpec(KIND_DOUBLING, 0.0, 0.0, _EMPTY, _EMPTY, _EMPTY)


def tent_spec():
    return MapKernelSpec(KIND_TENT, 0.0, 0.0, _EMPTY, _EMPTY, _EMPTY)


def logistic_spec(a):
    return MapKernelSpec(KIND_LOGISTIC, float(a), 0.0, _EMPTY, _EMPTY, _EMPTY)


def lsv_spec(alpha):
    alpha = float(alpha)
    return MapKernelSpec(KIND_LSV, alpha, 2.0 ** alpha, _EMPTY, _EMPTY, _EMPTY)


def pwl_spec(breaks, slopes, intercepts):
    breaks = np.ascontiguousarray(breaks, dtype=np.float64)
    slopes = np.ascontiguousarray(slopes, dtype=np.float64)
    intercepts = np.ascontiguousarray(intercepts, dtype=np.float64)
    if len(breaks) != len(slopes) + 1 or len(slopes) != len(intercepts):
        raise ValueError("inconsistent piecewise-linear arrays")
    return MapKernelSpec(KIND_PWL, 0.0, 0.0, breaks, slopes, intercepts)
