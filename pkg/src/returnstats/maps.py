"""Piecewise-monotone interval maps and their builtin constructors.

Branch domains are half-open [a, b), which makes evaluation deterministic at
every shared endpoint; the right endpoint x = 1 is evaluated through the last
branch's formula (the continuous extension) unless a map opts out.
"""

import re
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import (InvalidParameter, OrbitHitsSingularSet,
                     PointOnSingularSet, UnknownMap)
from .kernels.mapspec import MapKernelSpec


@dataclass(frozen=True)
class Branch:
    """One monotone piece: domain [left, right), formula and derivative."""
    left: float
    right: float
    f: Callable[[float], float]
    df: Callable[[float], float]
    increasing: bool


@dataclass(frozen=True)
class PiecewiseMap:
    branches: tuple
    singular_set: tuple
    label: str
    kernel_spec: Optional[MapKernelSpec] = None
    critical_set: tuple = ()
    extend_right: bool = True

    def __post_init__(self):
        if not self.branches:
            raise InvalidParameter("map needs at least one branch")
        lefts = [b.left for b in self.branches]
        rights = [b.right for b in self.branches]
        if lefts[0] != 0.0 or rights[-1] != 1.0:
            raise InvalidParameter("branch domains must cover [0,1]")
        for i in range(len(self.branches) - 1):
            if rights[i] != lefts[i + 1]:
                raise InvalidParameter("branch domains must be contiguous")

    def branch_index(self, x):
        """Index of the branch whose half-open domain contains x."""
        if x < 0.0 or x > 1.0:
            raise InvalidParameter(f"x={x!r} outside [0,1]")
        if x == 1.0:
            if not self.extend_right:
                raise PointOnSingularSet(x, "no convention at x=1")
            return len(self.branches) - 1
        lo, hi = 0, len(self.branches) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if x >= self.branches[mid].left:
                lo = mid
            else:
                hi = mid - 1
        return lo

    def __call__(self, x):
        return evaluate(self, x)


@dataclass(frozen=True)
class Orbit:
    start: float
    points: np.ndarray
    length: int


def evaluate(pmap, x):
    """T(x) through the branch containing x."""
    x = float(x)
    return pmap.branches[pmap.branch_index(x)].f(x)


def derivative(pmap, x):
    """T'(x) through the branch containing x (formula, not differences)."""
    x = float(x)
    return pmap.branches[pmap.branch_index(x)].df(x)


def orbit(pmap, x, n):
    """The orbit x, T(x), ..., T^n(x)."""
    x = float(x)
    if n < 0:
        raise InvalidParameter("orbit length must be nonnegative")
    if pmap.kernel_spec is not None and pmap.extend_right:
        pts = kernels.orbit_array(pmap.kernel_spec, x, n)
        return Orbit(start=x, points=pts, length=n)
    pts = np.empty(n + 1, dtype=np.float64)
    pts[0] = x
    y = x
    for k in range(1, n + 1):
        try:
            y = evaluate(pmap, y)
        except PointOnSingularSet:
            raise OrbitHitsSingularSet(k - 1, y) from None
        pts[k] = y
    return Orbit(start=x, points=pts, length=n)


def _two_branch(split, f0, df0, inc0, f1, df1, inc1, label, spec, crit=()):
    return PiecewiseMap(
        branches=(Branch(0.0, split, f0, df0, inc0),
                  Branch(split, 1.0, f1, df1, inc1)),
        singular_set=(0.0, split, 1.0),
        label=label,
        kernel_spec=spec,
        critical_set=crit,
    )


def make_doubling():
    return _two_branch(
        0.5,
        lambda x: 2.0 * x, lambda x: 2.0, True,
        lambda x: 2.0 * x - 1.0, lambda x: 2.0, True,
        "doubling", kernels.doubling_spec())


def make_tent():
    return _two_branch(
        0.5,
        lambda x: 2.0 * x, lambda x: 2.0, True,
        lambda x: 2.0 * (1.0 - x), lambda x: -2.0, False,
        "tent", kernels.tent_spec())


def make_logistic(a):
    a = float(a)
    if not 0.0 < a <= 4.0:
        raise InvalidParameter(f"logistic parameter a={a} outside (0,4]")
    return _two_branch(
        0.5,
        lambda x: a * x * (1.0 - x), lambda x: a * (1.0 - 2.0 * x), True,
        lambda x: a * x * (1.0 - x), lambda x: a * (1.0 - 2.0 * x), False,
        f"logistic({a})", kernels.logistic_spec(a), crit=(0.5,))


def make_lsv(alpha):
    # alpha in (0,1) is the regime of interest; alpha = 1 is accepted as the
    # boundary case (still a valid interval map, slower mixing)
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise InvalidParameter(f"lsv parameter alpha={alpha} outside (0,1]")
    spec = kernels.lsv_spec(alpha)
    c = spec.p1    # 2**alpha, same double the kernels use
    dcoef = c * (1.0 + alpha)
    return _two_branch(
        0.5,
        lambda x: x * (1.0 + c * x ** alpha),
        lambda x: 1.0 + dcoef * x ** alpha, True,
        lambda x: 2.0 * x - 1.0, lambda x: 2.0, True,
        f"lsv_alpha({alpha})", spec)


def make_piecewise_linear(rows):
    """Piecewise-linear map from (left, right, slope, intercept) rows."""
    rows = [(float(l), float(r), float(s), float(c)) for l, r, s, c in rows]
    rows.sort(key=lambda row: row[0])
    if not rows or rows[0][0] != 0.0 or rows[-1][1] != 1.0:
        raise InvalidParameter("branch rows must cover [0,1]")
    branches = []
    breaks = [0.0]
    fuzz = 1e-9
    for left, right, slope, intercept in rows:
        if left != breaks[-1]:
            raise InvalidParameter("branch rows must be contiguous")
        if slope == 0.0:
            raise InvalidParameter("zero slope branch is not monotone")
        for endpoint in (left, right):
            y = slope * endpoint + intercept
            if y < -fuzz or y > 1.0 + fuzz:
                raise InvalidParameter(
                    f"branch image leaves [0,1] at x={endpoint}")
        breaks.append(right)
        branches.append(Branch(
            left, right,
            (lambda x, s=slope, c=intercept: s * x + c),
            (lambda x, s=slope: s),
            slope > 0.0))
    spec = kernels.pwl_spec(
        np.array(breaks), np.array([r[2] for r in rows]),
        np.array([r[3] for r in rows]))
    sing = tuple(breaks)
    return PiecewiseMap(branches=tuple(branches), singular_set=sing,
                        label="piecewise_linear_markov", kernel_spec=spec)


_BUILTINS = {
    "doubling": (make_doubling, 0),
    "tent": (make_tent, 0),
    "logistic": (make_logistic, 1),
    "lsv_alpha": (make_lsv, 1),
}


def builtin(name, params=()):
    """Construct a builtin map by name and parameter list."""
    if name == "piecewise_linear_markov":
        raise InvalidParameter(
            "piecewise_linear_markov takes branch rows, not scalar params; "
            "use make_piecewise_linear or the config 'branches' key")
    try:
        ctor, n_params = _BUILTINS[name]
    except KeyError:
        raise UnknownMap(f"unknown map {name!r}") from None
    if len(params) != n_params:
        raise InvalidParameter(
            f"{name} expects {n_params} parameter(s), got {len(params)}")
    return ctor(*params)


_SPEC_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$")


def parse_map_spec(text):
    """Parse the 'name(param,...)' grammar, e.g. 'lsv_alpha(0.5)'."""
    m = _SPEC_RE.match(text)
    if not m:
        raise UnknownMap(f"cannot parse map spec {text!r}")
    name = m.group(1)
    raw = (m.group(2) or "").strip()
    params = [float(p) for p in raw.split(",")] if raw else []
    return builtin(name, params)
