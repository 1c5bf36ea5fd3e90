# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend.

Expression-for-expression twin of ``pure.py``; the build deliberately
disables FP contraction so both backends emit bit-identical doubles.  See
pure.py for why the dyadic-linear maps sample on the rational lattice.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor, pow

BACKEND = "compiled"

_DUMMY = np.zeros(1, dtype=np.float64)

LATTICE_Q = 1125899906842589

cdef long long _Q = 1125899906842589
cdef long long _Q2 = 2 * 1125899906842589
cdef double _QF = <double>1125899906842589


cdef inline double c_step(int kind, double p0, double p1, int nb,
                          const double* breaks, const double* slopes,
                          const double* intercepts, double x) nogil:
    cdef int i, j
    if kind == 0:       # doubling
        return 2.0 * x if x < 0.5 else 2.0 * x - 1.0
    if kind == 1:       # tent
        return 2.0 * x if x < 0.5 else 2.0 * (1.0 - x)
    if kind == 2:       # logistic
        return p0 * x * (1.0 - x)
    if kind == 3:       # lsv
        return x * (1.0 + p1 * pow(x, p0)) if x < 0.5 else 2.0 * x - 1.0
    # piecewise linear: last branch also covers x == breaks[-1]
    i = nb - 1
    for j in range(nb):
        if x < breaks[j + 1]:
            i = j
            break
    return slopes[i] * x + intercepts[i]


cdef inline long long c_lat_seed(double x) nogil:
    cdef long long k = <long long>floor(x * _QF + 0.5)
    if k < 1:
        k = 1
    if k >= _Q:
        k = _Q - 1
    return k


cdef inline void c_advance(int kind, double p0, double p1, int nb,
                           const double* br, const double* sl,
                           const double* ic, bint lat, long long* k,
                           double* x) nogil:
    cdef long long kk
    if lat:
        kk = k[0] + k[0]
        if kind == 0:
            if kk >= _Q:
                kk -= _Q
        else:
            if kk >= _Q:
                kk = _Q2 - kk
        k[0] = kk
        x[0] = <double>kk / _QF
    else:
        x[0] = c_step(kind, p0, p1, nb, br, sl, ic, x[0])


cdef inline bint c_in_set(const double* ua, const double* ub, int ncomp,
                          double x) nogil:
    cdef int i
    for i in range(ncomp):
        if x < ua[i]:
            return False
        if x < ub[i]:
            return True
    return False


cdef class _Spec:
    cdef int kind, nb
    cdef bint lat
    cdef double p0, p1
    cdef double[::1] breaks, slopes, intercepts
    cdef const double* pbr
    cdef const double* psl
    cdef const double* pic


cdef _Spec _unpack(spec):
    cdef _Spec s = _Spec()
    s.kind = spec.kind
    s.lat = s.kind <= 1
    s.p0 = spec.p0
    s.p1 = spec.p1
    s.nb = spec.slopes.shape[0]
    s.breaks = spec.breaks if s.nb > 0 else _DUMMY
    s.slopes = spec.slopes if s.nb > 0 else _DUMMY
    s.intercepts = spec.intercepts if s.nb > 0 else _DUMMY
    s.pbr = &s.breaks[0]
    s.psl = &s.slopes[0]
    s.pic = &s.intercepts[0]
    return s


def step(spec, double x):
    """One application of the map (plain float semantics)."""
    cdef _Spec s = _unpack(spec)
    return c_step(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic, x)


def orbit_array(spec, double x0, long n):
    """Points x0, T(x0), ..., T^n(x0), plain float semantics."""
    cdef _Spec s = _unpack(spec)
    out_arr = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double x = x0
    cdef long k
    with nogil:
        out[0] = x
        for k in range(1, n + 1):
            x = c_step(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic, x)
            out[k] = x
    return out_arr


def sampling_orbit(spec, double x0, long n):
    """The orbit the sampling loops would walk: lattice-exact for the
    dyadic-linear kinds, plain float orbit otherwise."""
    cdef _Spec s = _unpack(spec)
    out_arr = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double x = x0
    cdef long long k = 0
    cdef long i
    with nogil:
        if s.lat:
            k = c_lat_seed(x)
            x = <double>k / _QF
        out[0] = x
        for i in range(1, n + 1):
            c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                      s.lat, &k, &x)
            out[i] = x
    return out_arr


def apply_map(spec, xs):
    """Elementwise map evaluation."""
    cdef _Spec s = _unpack(spec)
    xs_arr = np.ascontiguousarray(xs, dtype=np.float64)
    out_arr = np.empty_like(xs_arr)
    cdef const double[::1] xv = xs_arr
    cdef double[::1] out = out_arr
    cdef long i, m = xv.shape[0]
    with nogil:
        for i in range(m):
            out[i] = c_step(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                            xv[i])
    return out_arr


def first_return(spec, ua, ub, double x, long n_max):
    """Least n in [1, n_max] with T^n(x) in U, else 0; also the end point.

    Plain float semantics (pointwise queries on exact dyadic points rely
    on it)."""
    cdef _Spec s = _unpack(spec)
    cdef const double[::1] uav = np.ascontiguousarray(ua, dtype=np.float64)
    cdef const double[::1] ubv = np.ascontiguousarray(ub, dtype=np.float64)
    cdef int ncomp = uav.shape[0]
    cdef const double* pa = &uav[0]
    cdef const double* pb = &ubv[0]
    cdef long n, found = 0
    with nogil:
        for n in range(1, n_max + 1):
            x = c_step(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic, x)
            if c_in_set(pa, pb, ncomp, x):
                found = n
                break
    return found, x


def collect_return_gaps(spec, ua, ub, double x0, long burn_in,
                        long n_samples, long long budget):
    """Successive entries of one orbit into U and the raw gaps between them."""
    cdef _Spec s = _unpack(spec)
    cdef const double[::1] uav = np.ascontiguousarray(ua, dtype=np.float64)
    cdef const double[::1] ubv = np.ascontiguousarray(ub, dtype=np.float64)
    cdef int ncomp = uav.shape[0]
    cdef const double* pa = &uav[0]
    cdef const double* pb = &ubv[0]
    starts_arr = np.empty(n_samples, dtype=np.float64)
    gaps_arr = np.empty(n_samples, dtype=np.int64)
    cdef double[::1] starts = starts_arr
    cdef long long[::1] gaps = gaps_arr
    cdef double x = x0, sv
    cdef long long steps = 0, g, k = 0
    cdef long j, count = 0
    with nogil:
        if s.lat:
            k = c_lat_seed(x)
            x = <double>k / _QF
        for j in range(burn_in):
            c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                      s.lat, &k, &x)
        while not c_in_set(pa, pb, ncomp, x) and steps < budget:
            c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                      s.lat, &k, &x)
            steps += 1
        while count < n_samples and steps < budget:
            sv = x
            g = 0
            while steps < budget:
                c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                          s.lat, &k, &x)
                steps += 1
                g += 1
                if c_in_set(pa, pb, ncomp, x):
                    starts[count] = sv
                    gaps[count] = g
                    count += 1
                    break
    return starts_arr[:count].copy(), gaps_arr[:count].copy(), int(steps)


def collect_hitting_times(spec, ua, ub, double x0, long burn_in,
                          long n_samples, long gap_steps, long long budget):
    """Hitting times from orbit points spaced by a decorrelation gap."""
    cdef _Spec s = _unpack(spec)
    cdef const double[::1] uav = np.ascontiguousarray(ua, dtype=np.float64)
    cdef const double[::1] ubv = np.ascontiguousarray(ub, dtype=np.float64)
    cdef int ncomp = uav.shape[0]
    cdef const double* pa = &uav[0]
    cdef const double* pb = &ubv[0]
    starts_arr = np.empty(n_samples, dtype=np.float64)
    times_arr = np.empty(n_samples, dtype=np.int64)
    cdef double[::1] starts = starts_arr
    cdef long long[::1] times = times_arr
    cdef double x = x0, sv
    cdef long long steps = 0, t, k = 0
    cdef long j, count = 0
    with nogil:
        if s.lat:
            k = c_lat_seed(x)
            x = <double>k / _QF
        for j in range(burn_in):
            c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                      s.lat, &k, &x)
        while count < n_samples and steps < budget:
            for j in range(gap_steps):
                c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                          s.lat, &k, &x)
            steps += gap_steps
            sv = x
            t = 0
            while steps < budget:
                c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                          s.lat, &k, &x)
                steps += 1
                t += 1
                if c_in_set(pa, pb, ncomp, x):
                    starts[count] = sv
                    times[count] = t
                    count += 1
                    break
    return starts_arr[:count].copy(), times_arr[:count].copy(), int(steps)


def collect_induced_gaps(spec, xa, xb, ua, ub, double x0, long burn_in,
                         long n_samples, long long budget):
    """Return gaps to U counted in first-return-map steps over (xa, xb)."""
    cdef _Spec s = _unpack(spec)
    cdef const double[::1] xav = np.ascontiguousarray(xa, dtype=np.float64)
    cdef const double[::1] xbv = np.ascontiguousarray(xb, dtype=np.float64)
    cdef const double[::1] uav = np.ascontiguousarray(ua, dtype=np.float64)
    cdef const double[::1] ubv = np.ascontiguousarray(ub, dtype=np.float64)
    cdef int nx = xav.shape[0], nu = uav.shape[0]
    cdef const double* pxa = &xav[0]
    cdef const double* pxb = &xbv[0]
    cdef const double* pua = &uav[0]
    cdef const double* pub = &ubv[0]
    starts_arr = np.empty(n_samples, dtype=np.float64)
    gaps_arr = np.empty(n_samples, dtype=np.int64)
    cdef double[::1] starts = starts_arr
    cdef long long[::1] gaps = gaps_arr
    cdef double x = x0, sv
    cdef long long steps = 0, g, k = 0
    cdef long j, count = 0
    cdef bint done
    with nogil:
        if s.lat:
            k = c_lat_seed(x)
            x = <double>k / _QF
        for j in range(burn_in):
            c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                      s.lat, &k, &x)
        while not c_in_set(pxa, pxb, nx, x) and steps < budget:
            c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                      s.lat, &k, &x)
            steps += 1
        while not c_in_set(pua, pub, nu, x) and steps < budget:
            c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                      s.lat, &k, &x)
            steps += 1
            while not c_in_set(pxa, pxb, nx, x) and steps < budget:
                c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                          s.lat, &k, &x)
                steps += 1
        while count < n_samples and steps < budget:
            sv = x
            g = 0
            done = False
            while steps < budget:
                c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                          s.lat, &k, &x)
                steps += 1
                while not c_in_set(pxa, pxb, nx, x) and steps < budget:
                    c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl,
                              s.pic, s.lat, &k, &x)
                    steps += 1
                if not c_in_set(pxa, pxb, nx, x):
                    break
                g += 1
                if c_in_set(pua, pub, nu, x):
                    done = True
                    break
            if done:
                starts[count] = sv
                gaps[count] = g
                count += 1
    return starts_arr[:count].copy(), gaps_arr[:count].copy(), int(steps)


def birkhoff_counts(spec, double x0, long n, long burn_in, long n_bins):
    """Histogram counts of n orbit points on a uniform grid."""
    cdef _Spec s = _unpack(spec)
    counts_arr = np.zeros(n_bins, dtype=np.int64)
    cdef long long[::1] counts = counts_arr
    cdef double x = x0
    cdef long long k = 0
    cdef long j, i, top = n_bins - 1
    with nogil:
        if s.lat:
            k = c_lat_seed(x)
            x = <double>k / _QF
        for j in range(burn_in):
            c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                      s.lat, &k, &x)
        for j in range(n):
            i = <long>(x * n_bins)
            if i > top:
                i = top
            counts[i] += 1
            c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                      s.lat, &k, &x)
    return counts_arr


def orbit_bin_indices(spec, double x0, long n, long burn_in, long n_bins):
    """Bin index of each of n successive orbit points."""
    cdef _Spec s = _unpack(spec)
    out_arr = np.empty(n, dtype=np.int32)
    cdef int[::1] out = out_arr
    cdef double x = x0
    cdef long long k = 0
    cdef long j, i, top = n_bins - 1
    with nogil:
        if s.lat:
            k = c_lat_seed(x)
            x = <double>k / _QF
        for j in range(burn_in):
            c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                      s.lat, &k, &x)
        for j in range(n):
            i = <long>(x * n_bins)
            if i > top:
                i = top
            out[j] = <int>i
            c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                      s.lat, &k, &x)
    return out_arr


def set_mass_count(spec, ua, ub, double x0, long n, long burn_in):
    """Number of the n orbit points lying in U."""
    cdef _Spec s = _unpack(spec)
    cdef const double[::1] uav = np.ascontiguousarray(ua, dtype=np.float64)
    cdef const double[::1] ubv = np.ascontiguousarray(ub, dtype=np.float64)
    cdef int ncomp = uav.shape[0]
    cdef const double* pa = &uav[0]
    cdef const double* pb = &ubv[0]
    cdef double x = x0
    cdef long long k = 0, hits = 0
    cdef long j
    with nogil:
        if s.lat:
            k = c_lat_seed(x)
            x = <double>k / _QF
        for j in range(burn_in):
            c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                      s.lat, &k, &x)
        for j in range(n):
            if c_in_set(pa, pb, ncomp, x):
                hits += 1
            c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                      s.lat, &k, &x)
    return int(hits)


def visit_window_counts(spec, ua, ub, double x0, long burn_in,
                        long window_len, long n_windows):
    """U-visit counts in consecutive disjoint windows of the orbit."""
    cdef _Spec s = _unpack(spec)
    cdef const double[::1] uav = np.ascontiguousarray(ua, dtype=np.float64)
    cdef const double[::1] ubv = np.ascontiguousarray(ub, dtype=np.float64)
    cdef int ncomp = uav.shape[0]
    cdef const double* pa = &uav[0]
    cdef const double* pb = &ubv[0]
    counts_arr = np.zeros(n_windows, dtype=np.int64)
    cdef long long[::1] counts = counts_arr
    cdef double x = x0
    cdef long long k = 0, c
    cdef long w, j
    with nogil:
        if s.lat:
            k = c_lat_seed(x)
            x = <double>k / _QF
        for w in range(burn_in):
            c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                      s.lat, &k, &x)
        for w in range(n_windows):
            c = 0
            for j in range(window_len):
                c_advance(s.kind, s.p0, s.p1, s.nb, s.pbr, s.psl, s.pic,
                          s.lat, &k, &x)
                if c_in_set(pa, pb, ncomp, x):
                    c += 1
            counts[w] = c
    return counts_arr
