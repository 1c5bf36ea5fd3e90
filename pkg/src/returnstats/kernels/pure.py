"""Pure-Python kernel backend.

Every loop here has a compiled twin in ``_speedups.pyx``.  The two must stay
expression-for-expression identical: equality of results is asserted bitwise
by the test suite, and the harness determinism contract depends on it.

Dyadic-linear maps (doubling, tent) are special-cased for long-run
sampling: naive double-precision iteration is exact dyadic arithmetic, so
every orbit drains its mantissa and collapses onto the fixed point 0 within
~55 steps.  The sampling loops instead iterate these maps exactly on the
rational lattice {k/Q} for a large prime Q with primitive root 2, which is a
genuine invariant set of exact orbits with astronomically long cycles.
Pointwise kernels (step, orbit_array, apply_map, first_return) keep plain
float semantics.
"""

import math

import numpy as np

from .mapspec import (KIND_DOUBLING, KIND_TENT, KIND_LOGISTIC, KIND_LSV,
                      KIND_PWL)

BACKEND = "pure"

# prime just below 2^50; 2 is a primitive root, so the doubling cycle has
# length Q-1 ~ 1.1e15.  Q < 2^50 keeps k <-> k/Q float round-trips exact.
LATTICE_Q = 1125899906842589
_Q = LATTICE_Q
_QF = float(LATTICE_Q)
_Q2 = 2 * LATTICE_Q


def _step(kind, p0, p1, breaks, slopes, intercepts, x):
    if kind == KIND_DOUBLING:
        return 2.0 * x if x < 0.5 else 2.0 * x - 1.0
    if kind == KIND_TENT:
        return 2.0 * x if x < 0.5 else 2.0 * (1.0 - x)
    if kind == KIND_LOGISTIC:
        return p0 * x * (1.0 - x)
    if kind == KIND_LSV:
        return x * (1.0 + p1 * x ** p0) if x < 0.5 else 2.0 * x - 1.0
    # piecewise linear: last branch also covers x == breaks[-1]
    nb = len(slopes)
    i = nb - 1
    for j in range(nb):
        if x < breaks[j + 1]:
            i = j
            break
    return slopes[i] * x + intercepts[i]


def _unpack(spec):
    return (spec.kind, spec.p0, spec.p1, spec.breaks.tolist(),
            spec.slopes.tolist(), spec.intercepts.tolist())


def _lat_seed(x):
    k = int(math.floor(x * _QF + 0.5))
    if k < 1:
        k = 1
    if k >= _Q:
        k = _Q - 1
    return k


def step(spec, x):
    """One application of the map (plain float semantics)."""
    return _step(*_unpack(spec), float(x))


def orbit_array(spec, x0, n):
    """Points x0, T(x0), ..., T^n(x0), plain float semantics."""
    kind, p0, p1, br, sl, ic = _unpack(spec)
    out = np.empty(n + 1, dtype=np.float64)
    x = float(x0)
    out[0] = x
    for k in range(1, n + 1):
        x = _step(kind, p0, p1, br, sl, ic, x)
        out[k] = x
    return out


def sampling_orbit(spec, x0, n):
    """The orbit the sampling loops would walk: lattice-exact for the
    dyadic-linear kinds, plain float orbit otherwise."""
    kind, p0, p1, br, sl, ic = _unpack(spec)
    out = np.empty(n + 1, dtype=np.float64)
    x = float(x0)
    if kind <= KIND_TENT:
        k = _lat_seed(x)
        x = k / _QF
        out[0] = x
        for i in range(1, n + 1):
            k = k + k
            if kind == KIND_DOUBLING:
                if k >= _Q:
                    k -= _Q
            else:
                if k >= _Q:
                    k = _Q2 - k
            x = k / _QF
            out[i] = x
        return out
    out[0] = x
    for i in range(1, n + 1):
        x = _step(kind, p0, p1, br, sl, ic, x)
        out[i] = x
    return out


def apply_map(spec, xs):
    """Elementwise map evaluation (scalar loop: keeps pow() bit-stable)."""
    kind, p0, p1, br, sl, ic = _unpack(spec)
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    out = np.empty_like(xs)
    for i, x in enumerate(xs.tolist()):
        out[i] = _step(kind, p0, p1, br, sl, ic, x)
    return out


def _in_set(ua, ub, ncomp, x):
    for i in range(ncomp):
        if x < ua[i]:
            return False
        if x < ub[i]:
            return True
    return False


def first_return(spec, ua, ub, x, n_max):
    """Least n in [1, n_max] with T^n(x) in U, else 0; also the end point.

    Plain float semantics (pointwise queries on exact dyadic points rely
    on it)."""
    kind, p0, p1, br, sl, ic = _unpack(spec)
    ua = ua.tolist()
    ub = ub.tolist()
    ncomp = len(ua)
    x = float(x)
    for n in range(1, n_max + 1):
        x = _step(kind, p0, p1, br, sl, ic, x)
        if _in_set(ua, ub, ncomp, x):
            return n, x
    return 0, x


def collect_return_gaps(spec, ua, ub, x0, burn_in, n_samples, budget):
    """Successive entries of one orbit into U and the raw gaps between them.

    Returns (starts, gaps, steps_used); fewer than n_samples gaps means the
    post-burn-in step budget ran out.
    """
    kind, p0, p1, br, sl, ic = _unpack(spec)
    ua = ua.tolist()
    ub = ub.tolist()
    ncomp = len(ua)
    lat = kind <= KIND_TENT
    x = float(x0)
    k = 0
    if lat:
        k = _lat_seed(x)
        x = k / _QF
    for _ in range(burn_in):
        if lat:
            k = k + k
            if kind == KIND_DOUBLING:
                if k >= _Q:
                    k -= _Q
            else:
                if k >= _Q:
                    k = _Q2 - k
            x = k / _QF
        else:
            x = _step(kind, p0, p1, br, sl, ic, x)
    starts = []
    gaps = []
    steps = 0
    while not _in_set(ua, ub, ncomp, x) and steps < budget:
        if lat:
            k = k + k
            if kind == KIND_DOUBLING:
                if k >= _Q:
                    k -= _Q
            else:
                if k >= _Q:
                    k = _Q2 - k
            x = k / _QF
        else:
            x = _step(kind, p0, p1, br, sl, ic, x)
        steps += 1
    while len(gaps) < n_samples and steps < budget:
        s = x
        g = 0
        while steps < budget:
            if lat:
                k = k + k
                if kind == KIND_DOUBLING:
                    if k >= _Q:
                        k -= _Q
                else:
                    if k >= _Q:
                        k = _Q2 - k
                x = k / _QF
            else:
                x = _step(kind, p0, p1, br, sl, ic, x)
            steps += 1
            g += 1
            if _in_set(ua, ub, ncomp, x):
                starts.append(s)
                gaps.append(g)
                break
    return (np.asarray(starts, dtype=np.float64),
            np.asarray(gaps, dtype=np.int64), steps)


def collect_hitting_times(spec, ua, ub, x0, burn_in, n_samples, gap_steps,
                          budget):
    """Hitting times from orbit points spaced by a decorrelation gap."""
    kind, p0, p1, br, sl, ic = _unpack(spec)
    ua = ua.tolist()
    ub = ub.tolist()
    ncomp = len(ua)
    lat = kind <= KIND_TENT
    x = float(x0)
    k = 0
    if lat:
        k = _lat_seed(x)
        x = k / _QF
    for _ in range(burn_in):
        if lat:
            k = k + k
            if kind == KIND_DOUBLING:
                if k >= _Q:
                    k -= _Q
            else:
                if k >= _Q:
                    k = _Q2 - k
            x = k / _QF
        else:
            x = _step(kind, p0, p1, br, sl, ic, x)
    starts = []
    times = []
    steps = 0
    while len(times) < n_samples and steps < budget:
        for _ in range(gap_steps):
            if lat:
                k = k + k
                if kind == KIND_DOUBLING:
                    if k >= _Q:
                        k -= _Q
                else:
                    if k >= _Q:
                        k = _Q2 - k
                x = k / _QF
            else:
                x = _step(kind, p0, p1, br, sl, ic, x)
        steps += gap_steps
        s = x
        t = 0
        while steps < budget:
            if lat:
                k = k + k
                if kind == KIND_DOUBLING:
                    if k >= _Q:
                        k -= _Q
                else:
                    if k >= _Q:
                        k = _Q2 - k
                x = k / _QF
            else:
                x = _step(kind, p0, p1, br, sl, ic, x)
            steps += 1
            t += 1
            if _in_set(ua, ub, ncomp, x):
                starts.append(s)
                times.append(t)
                break
    return (np.asarray(starts, dtype=np.float64),
            np.asarray(times, dtype=np.int64), steps)


def collect_induced_gaps(spec, xa, xb, ua, ub, x0, burn_in, n_samples,
                         budget):
    """Return gaps to U counted in first-return-map steps over the domain
    (xa, xb); U must sit inside that domain."""
    kind, p0, p1, br, sl, ic = _unpack(spec)
    xa = xa.tolist()
    xb = xb.tolist()
    nx = len(xa)
    ua = ua.tolist()
    ub = ub.tolist()
    nu = len(ua)
    lat = kind <= KIND_TENT
    x = float(x0)
    k = 0
    if lat:
        k = _lat_seed(x)
        x = k / _QF

    def adv(k, x):
        if lat:
            k = k + k
            if kind == KIND_DOUBLING:
                if k >= _Q:
                    k -= _Q
            else:
                if k >= _Q:
                    k = _Q2 - k
            x = k / _QF
        else:
            x = _step(kind, p0, p1, br, sl, ic, x)
        return k, x

    for _ in range(burn_in):
        k, x = adv(k, x)
    steps = 0
    # reach the induced domain, then the first U entry
    while not _in_set(xa, xb, nx, x) and steps < budget:
        k, x = adv(k, x)
        steps += 1
    while not _in_set(ua, ub, nu, x) and steps < budget:
        k, x = adv(k, x)
        steps += 1
        while not _in_set(xa, xb, nx, x) and steps < budget:
            k, x = adv(k, x)
            steps += 1
    starts = []
    gaps = []
    while len(gaps) < n_samples and steps < budget:
        s = x
        g = 0
        done = False
        while steps < budget:
            k, x = adv(k, x)
            steps += 1
            while not _in_set(xa, xb, nx, x) and steps < budget:
                k, x = adv(k, x)
                steps += 1
            if not _in_set(xa, xb, nx, x):
                break
            g += 1
            if _in_set(ua, ub, nu, x):
                done = True
                break
        if done:
            starts.append(s)
            gaps.append(g)
    return (np.asarray(starts, dtype=np.float64),
            np.asarray(gaps, dtype=np.int64), steps)


def birkhoff_counts(spec, x0, n, burn_in, n_bins):
    """Histogram counts of n orbit points on a uniform grid."""
    kind, p0, p1, br, sl, ic = _unpack(spec)
    counts = np.zeros(n_bins, dtype=np.int64)
    lat = kind <= KIND_TENT
    x = float(x0)
    k = 0
    if lat:
        k = _lat_seed(x)
        x = k / _QF
    top = n_bins - 1
    for _ in range(burn_in):
        if lat:
            k = k + k
            if kind == KIND_DOUBLING:
                if k >= _Q:
                    k -= _Q
            else:
                if k >= _Q:
                    k = _Q2 - k
            x = k / _QF
        else:
            x = _step(kind, p0, p1, br, sl, ic, x)
    for _ in range(n):
        i = int(x * n_bins)
        if i > top:
            i = top
        counts[i] += 1
        if lat:
            k = k + k
            if kind == KIND_DOUBLING:
                if k >= _Q:
                    k -= _Q
            else:
                if k >= _Q:
                    k = _Q2 - k
            x = k / _QF
        else:
            x = _step(kind, p0, p1, br, sl, ic, x)
    return counts


def orbit_bin_indices(spec, x0, n, burn_in, n_bins):
    """Bin index of each of n successive orbit points."""
    kind, p0, p1, br, sl, ic = _unpack(spec)
    out = np.empty(n, dtype=np.int32)
    lat = kind <= KIND_TENT
    x = float(x0)
    k = 0
    if lat:
        k = _lat_seed(x)
        x = k / _QF
    top = n_bins - 1
    for _ in range(burn_in):
        if lat:
            k = k + k
            if kind == KIND_DOUBLING:
                if k >= _Q:
                    k -= _Q
            else:
                if k >= _Q:
                    k = _Q2 - k
            x = k / _QF
        else:
            x = _step(kind, p0, p1, br, sl, ic, x)
    for j in range(n):
        i = int(x * n_bins)
        if i > top:
            i = top
        out[j] = i
        if lat:
            k = k + k
            if kind == KIND_DOUBLING:
                if k >= _Q:
                    k -= _Q
            else:
                if k >= _Q:
                    k = _Q2 - k
            x = k / _QF
        else:
            x = _step(kind, p0, p1, br, sl, ic, x)
    return out


def set_mass_count(spec, ua, ub, x0, n, burn_in):
    """Number of the n orbit points lying in U."""
    kind, p0, p1, br, sl, ic = _unpack(spec)
    ua = ua.tolist()
    ub = ub.tolist()
    ncomp = len(ua)
    lat = kind <= KIND_TENT
    x = float(x0)
    k = 0
    if lat:
        k = _lat_seed(x)
        x = k / _QF
    for _ in range(burn_in):
        if lat:
            k = k + k
            if kind == KIND_DOUBLING:
                if k >= _Q:
                    k -= _Q
            else:
                if k >= _Q:
                    k = _Q2 - k
            x = k / _QF
        else:
            x = _step(kind, p0, p1, br, sl, ic, x)
    hits = 0
    for _ in range(n):
        if _in_set(ua, ub, ncomp, x):
            hits += 1
        if lat:
            k = k + k
            if kind == KIND_DOUBLING:
                if k >= _Q:
                    k -= _Q
            else:
                if k >= _Q:
                    k = _Q2 - k
            x = k / _QF
        else:
            x = _step(kind, p0, p1, br, sl, ic, x)
    return hits


def visit_window_counts(spec, ua, ub, x0, burn_in, window_len, n_windows):
    """U-visit counts in consecutive disjoint windows of the orbit."""
    kind, p0, p1, br, sl, ic = _unpack(spec)
    ua = ua.tolist()
    ub = ub.tolist()
    ncomp = len(ua)
    lat = kind <= KIND_TENT
    x = float(x0)
    k = 0
    if lat:
        k = _lat_seed(x)
        x = k / _QF
    for _ in range(burn_in):
        if lat:
            k = k + k
            if kind == KIND_DOUBLING:
                if k >= _Q:
                    k -= _Q
            else:
                if k >= _Q:
                    k = _Q2 - k
            x = k / _QF
        else:
            x = _step(kind, p0, p1, br, sl, ic, x)
    counts = np.zeros(n_windows, dtype=np.int64)
    for w in range(n_windows):
        c = 0
        for _ in range(window_len):
            if lat:
                k = k + k
                if kind == KIND_DOUBLING:
                    if k >= _Q:
                        k -= _Q
                else:
                    if k >= _Q:
                        k = _Q2 - k
                x = k / _QF
            else:
                x = _step(kind, p0, p1, br, sl, ic, x)
            if _in_set(ua, ub, ncomp, x):
                c += 1
        counts[w] = c
    return counts
