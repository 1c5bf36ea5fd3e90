"""First-return (induced) systems.

Return times, induced-map evaluation, the full-branch partition of the
induced domain, the Kac mean-return constant, monotone pullback
neighborhoods for maps with finite critical-orbit closure, and the numerical
expansion/distortion certificate for the induced map.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .errors import (Censored, InvalidParameter, NoVisit, PullbackDegenerate,
                     ResolutionExceeded, TooFewEntries, TooManyCensored)
from .maps import derivative, evaluate
from .rng import draw_start, stream

DEFAULT_MAX_STEPS = 10 ** 7


@dataclass(frozen=True)
class IntervalSet:
    """Finite union of disjoint half-open intervals [a, b) inside [0, 1]."""
    components: tuple

    def __post_init__(self):
        prev = 0.0
        for a, b in self.components:
            if not (0.0 <= a < b <= 1.0):
                raise InvalidParameter(f"bad component [{a}, {b})")
            if a < prev:
                raise InvalidParameter("components must be sorted, disjoint")
            prev = b

    @classmethod
    def interval(cls, a, b):
        return cls(components=((float(a), float(b)),))

    @classmethod
    def ball(cls, center, radius):
        """The ball of radius r centered at z, clipped to [0, 1]."""
        if radius <= 0.0:
            raise InvalidParameter("radius must be positive")
        return cls.interval(max(0.0, center - radius),
                            min(1.0, center + radius))

    @classmethod
    def unit(cls):
        return cls.interval(0.0, 1.0)

    @property
    def total_length(self):
        return sum(b - a for a, b in self.components)

    @cached_property
    def lower(self):
        return np.array([a for a, _ in self.components], dtype=np.float64)

    @cached_property
    def upper(self):
        return np.array([b for _, b in self.components], dtype=np.float64)

    def contains(self, x):
        for a, b in self.components:
            if x < a:
                return False
            if x < b:
                return True
        return False

    def is_single_interval(self):
        return len(self.components) == 1

    def span(self):
        return self.components[0][0], self.components[-1][1]


@dataclass(frozen=True)
class InducedSystem:
    """First-return system over a domain; max_steps is the censoring cutoff."""
    base: object
    domain: IntervalSet
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self):
        if self.max_steps < 1:
            raise InvalidParameter("max_steps must be positive")
        if self.base.kernel_spec is None:
            raise InvalidParameter(
                "induced sampling needs a kernel-encodable map "
                "(builtin or piecewise-linear)")


class ReturnBranch(NamedTuple):
    left: float
    right: float
    time: int
    image_left: float
    image_right: float

    @property
    def midpoint(self):
        return 0.5 * (self.left + self.right)


class MarkovNeighborhood(NamedTuple):
    left: float
    right: float
    n: int


def first_return_time(pmap, U, x, n_max):
    """Least n in [1, n_max] with T^n(x) in U.

    Starting x in U makes this a return time; any other start gives the
    hitting time of U.
    """
    if pmap.kernel_spec is None:
        raise InvalidParameter("first_return_time needs a kernel-backed map")
    t, _ = kernels.first_return(pmap.kernel_spec, U.lower, U.upper,
                                float(x), int(n_max))
    if t == 0:
        raise Censored(n_max)
    return t


def induced_step(sys, x):
    """One step of the first-return map: (T^n(x), n)."""
    if not sys.domain.contains(x):
        raise InvalidParameter(f"x={x!r} not in the induced domain")
    t, y = kernels.first_return(sys.base.kernel_spec, sys.domain.lower,
                                sys.domain.upper, float(x), sys.max_steps)
    if t == 0:
        raise Censored(sys.max_steps)
    return y, t


@dataclass(frozen=True)
class KacEstimate:
    mean_return: float
    stderr: float
    n_effective: int
    n_censored: int

    @property
    def censored_fraction(self):
        total = self.n_effective + self.n_censored
        return self.n_censored / total if total else 0.0


def split_counts(total, n_streams):
    """Deterministic near-even split of a work count across streams."""
    base, extra = divmod(total, n_streams)
    return [base + (1 if i < extra else 0) for i in range(n_streams)]


def kac_constant(sys, n_entries, seed, burn_in=10_000, n_streams=1,
                 workers=1, budget_per_entry=500, stage="kac"):
    """Mean first-return time to the domain along a typical orbit.

    Converges to 1/mu(domain) for ergodic maps (Kac).  Entries come from
    n_streams independently seeded orbits merged in stream order; the worker
    count only affects scheduling, never the result.
    """
    if n_entries < 100:
        raise InvalidParameter("need at least 100 entries")
    counts = split_counts(n_entries, n_streams)
    budget = budget_per_entry * max(counts) + 10_000_000

    def task(i):
        gen = stream(seed, stage, i)
        x0 = draw_start(gen)
        _, gaps, _ = kernels.collect_return_gaps(
            sys.base.kernel_spec, sys.domain.lower, sys.domain.upper,
            x0, burn_in, counts[i], budget)
        return gaps

    gap_lists = _run_streams(task, n_streams, workers)
    gaps = np.concatenate(gap_lists) if n_streams > 1 else gap_lists[0]
    if len(gaps) < n_entries:
        raise TooFewEntries(f"collected {len(gaps)} of {n_entries} entries")
    censored = gaps > sys.max_steps
    n_cens = int(censored.sum())
    if n_cens > 0.01 * n_entries:
        raise TooManyCensored(f"{n_cens}/{n_entries} censored entries")
    good = gaps[~censored].astype(np.float64)
    mean = float(good.mean())
    stderr = float(good.std(ddof=1) / np.sqrt(len(good))) if len(good) > 1 \
        else 0.0
    return KacEstimate(mean_return=mean, stderr=stderr,
                       n_effective=int(len(good)), n_censored=n_cens)


def _run_streams(task, n_streams, workers):
    """Run stream tasks, merging results in stream-index order."""
    if workers > 1 and n_streams > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(task, range(n_streams)))
    return [task(i) for i in range(n_streams)]


def return_branches(sys, p_max, tol=1e-12, initial_grid=4096,
                    eval_budget=500_000):
    """Partition of a single-interval domain into maximal intervals of
    constant return time <= p_max.

    Endpoints are located by bisecting the integer-valued return-time
    function; regions whose time exceeds p_max (or that cannot be resolved)
    are left out as the unresolved remainder.
    """
    if not sys.domain.is_single_interval():
        raise InvalidParameter("return_branches needs a single interval")
    a, b = sys.domain.span()
    spec = sys.base.kernel_spec
    lo, hi = sys.domain.lower, sys.domain.upper
    cap = p_max + 1
    evals = [0]

    def tau(x):
        if evals[0] > eval_budget:
            raise ResolutionExceeded("return-time evaluation budget exceeded")
        evals[0] += 1
        t, _ = kernels.first_return(spec, lo, hi, x, cap)
        return t if t else cap     # cap stands for "time > p_max"

    h = (b - a) / initial_grid
    xs = [a] + [a + (i + 0.5) * h for i in range(initial_grid)] \
        + [b - min(tol, h)]
    ts = [tau(x) for x in xs]

    # localize every boundary between adjacent disagreeing samples,
    # splitting whenever the midpoint reveals a time not seen at the ends
    cuts = []
    stack = [(xs[i], ts[i], xs[i + 1], ts[i + 1])
             for i in range(len(xs) - 1) if ts[i] != ts[i + 1]]
    while stack:
        u, tu, v, tv = stack.pop()
        while v - u > tol:
            m = 0.5 * (u + v)
            if m <= u or m >= v:
                break
            tm = tau(m)
            if tm == tu:
                u = m
            elif tm == tv:
                v = m
            else:
                stack.append((u, tu, m, tm))
                u, tu = m, tm
        cuts.append(0.5 * (u + v))
    cuts.sort()

    edges = [a] + cuts + [b]
    branches = []
    for left, right in zip(edges[:-1], edges[1:]):
        if right - left <= tol:
            continue
        t_mid = tau(0.5 * (left + right))
        if t_mid > p_max:
            continue
        delta = min(tol, 0.25 * (right - left))
        yl = _iterate(spec, left + delta, t_mid)
        yr = _iterate(spec, right - delta, t_mid)
        branches.append(ReturnBranch(
            left=left, right=right, time=t_mid,
            image_left=min(yl, yr), image_right=max(yl, yr)))
    branches.sort(key=lambda br: br.left)
    return branches


def _iterate(spec, x, n):
    return float(kernels.orbit_array(spec, x, n)[n])


def markov_neighborhood(pmap, x, Y, n_max, forbidden=()):
    """Maximal interval U around x with T^n(U) = Y monotonically, for the
    smallest n <= n_max whose iterate lands in the open interval Y.

    Works for maps whose critical-orbit closure is the finite set
    `forbidden` (e.g. logistic a=4 with {1/2, 1, 0}); x must avoid it.
    """
    ya, yb = float(Y[0]), float(Y[1])
    if not ya < yb:
        raise InvalidParameter("Y must be a nonempty open interval")
    x = float(x)
    if any(x == f for f in forbidden):
        raise InvalidParameter(f"x={x} lies on the critical-orbit closure")
    pts = [x]
    n = None
    for k in range(1, n_max + 1):
        pts.append(evaluate(pmap, pts[-1]))
        if ya < pts[-1] < yb:
            n = k
            break
    if n is None:
        raise NoVisit(f"orbit missed ({ya}, {yb}) within {n_max} steps")

    lo, hi = ya, yb
    for k in range(n - 1, -1, -1):
        br = pmap.branches[pmap.branch_index(pts[k])]
        fl, fr = br.f(br.left), br.f(br.right)
        img_lo, img_hi = min(fl, fr), max(fl, fr)
        if lo < img_lo - 1e-15 or hi > img_hi + 1e-15:
            raise PullbackDegenerate(
                f"branch image [{img_lo}, {img_hi}] does not cover the "
                f"pullback target at step {k}")
        u1 = _branch_preimage(br, lo)
        u2 = _branch_preimage(br, hi)
        lo, hi = (u1, u2) if u1 <= u2 else (u2, u1)
        if not lo <= pts[k] <= hi:
            raise PullbackDegenerate("pullback lost the orbit point")
        if hi - lo < 1e-15:
            raise PullbackDegenerate("pullback collapsed below resolution")
    return MarkovNeighborhood(left=lo, right=hi, n=n)


def _branch_preimage(br, y):
    fl, fr = br.f(br.left), br.f(br.right)
    y = min(max(y, min(fl, fr)), max(fl, fr))
    if y == fl:
        return br.left
    if y == fr:
        return br.right
    return brentq(lambda u: br.f(u) - y, br.left, br.right, xtol=1e-15)


@dataclass(frozen=True)
class CertificateReport:
    """Numerical expansion/distortion evidence that the induced map is of
    the uniformly expanding, bounded-distortion, summable-weight kind."""
    expansion_inf: float
    distortion_K: float
    variation_estimate: float
    weight_tail: tuple        # partial sums over p of sup_{Z_p} 1/|That'|
    branches_checked: int
    branch_rows: tuple        # per-branch diagnostics
    klogk_bound: float        # K(2 + log K), the closed-form comparison

    def weight_increments(self):
        prev = 0.0
        out = []
        for s in self.weight_tail:
            out.append(s - prev)
            prev = s
        return out

    def to_dict(self):
        return {
            "expansion_inf": self.expansion_inf,
            "distortion_K": self.distortion_K,
            "variation_estimate": self.variation_estimate,
            "weight_tail": list(self.weight_tail),
            "branches_checked": self.branches_checked,
            "klogk_bound": self.klogk_bound,
            "branches": [dict(zip(
                ("time", "left", "right", "image_left", "image_right",
                 "deriv_inf", "deriv_sup", "sup_weight"), row))
                for row in self.branch_rows],
        }


def induced_derivative(pmap, x, n):
    """|(T^n)'(x)| by the chain rule along the orbit (never differences)."""
    prod = 1.0
    y = float(x)
    for _ in range(n):
        prod *= abs(derivative(pmap, y))
        y = evaluate(pmap, y)
    return prod


def rmap_certificate(sys, p_max, grid=64, tol=1e-12):
    """Expansion, distortion and weight-summability report for the induced
    map, from chain-rule derivatives on a per-branch sampling grid."""
    branches = return_branches(sys, p_max, tol=tol)
    if not branches:
        raise InvalidParameter("no branches resolved; increase p_max")
    pmap = sys.base
    rows = []
    by_time = {}
    for br in branches:
        width = br.right - br.left
        pts = [br.left + (i + 0.5) * width / grid for i in range(grid)]
        derivs = [induced_derivative(pmap, x, br.time) for x in pts]
        d_inf, d_sup = min(derivs), max(derivs)
        g = [1.0 / d for d in derivs]
        sup_g = max(g)
        tv_g = sum(abs(g[i + 1] - g[i]) for i in range(len(g) - 1))
        rows.append((br.time, br.left, br.right, br.image_left,
                     br.image_right, d_inf, d_sup, sup_g))
        by_time.setdefault(br.time, []).append((sup_g, tv_g))
    expansion_inf = min(r[5] for r in rows)
    distortion_K = max(r[6] / r[5] for r in rows)
    tail = []
    acc = 0.0
    for p in sorted(by_time):
        acc += sum(s for s, _ in by_time[p])
        tail.append(acc)
    variation = sum(tv for vals in by_time.values() for _, tv in vals) \
        + 2.0 * sum(s for vals in by_time.values() for s, _ in vals)
    klogk = distortion_K * (2.0 + np.log(distortion_K))
    return CertificateReport(
        expansion_inf=expansion_inf, distortion_K=distortion_K,
        variation_estimate=variation, weight_tail=tuple(tail),
        branches_checked=len(branches), branch_rows=tuple(rows),
        klogk_bound=float(klogk))
