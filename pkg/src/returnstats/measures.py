"""Invariant-measure estimation and correlation-decay measurement.

Birkhoff orbit histograms are the primary estimator (they need nothing but
ergodicity); the Ulam discretization of the transfer operator is the
independent cross-check.  Correlations are measured for piecewise-constant
observables on the histogram bins and fitted to a geometric rate.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import InsufficientDecay, InvalidParameter, NoConvergence

_MASS_TOL = 1e-12


@dataclass(frozen=True)
class EmpiricalMeasure:
    bin_edges: np.ndarray
    masses: np.ndarray
    n_samples: int
    kind: str

    def __post_init__(self):
        if len(self.bin_edges) != len(self.masses) + 1:
            raise InvalidParameter("edges/masses lengths disagree")
        total = float(self.masses.sum())
        if abs(total - 1.0) > _MASS_TOL:
            raise InvalidParameter(f"masses sum to {total}, not 1")

    @property
    def n_bins(self):
        return len(self.masses)

    def density(self):
        widths = np.diff(self.bin_edges)
        return self.masses / widths

    def mass_of_interval(self, a, b):
        """Mass of [a, b), interpolating linearly inside boundary bins."""
        if b <= a:
            return 0.0
        edges = self.bin_edges
        lo = np.searchsorted(edges, a, side="right") - 1
        hi = np.searchsorted(edges, b, side="left") - 1
        lo = max(lo, 0)
        hi = min(hi, self.n_bins - 1)
        if lo == hi:
            width = edges[lo + 1] - edges[lo]
            return float(self.masses[lo] * (b - a) / width)
        total = float(self.masses[lo + 1:hi].sum())
        w_lo = edges[lo + 1] - edges[lo]
        total += float(self.masses[lo] * (edges[lo + 1] - a) / w_lo)
        w_hi = edges[hi + 1] - edges[hi]
        total += float(self.masses[hi] * (b - edges[hi]) / w_hi)
        return total

    def mass_of_set(self, iset):
        return sum(self.mass_of_interval(a, b) for a, b in iset.components)

    def l1_distance(self, other):
        if len(self.masses) != len(other.masses):
            raise InvalidParameter("measures binned differently")
        return float(np.abs(self.masses - other.masses).sum())


def uniform_edges(n_bins):
    # i/n_bins per edge, matching the kernels' int(x*n_bins) binning
    return np.arange(n_bins + 1, dtype=np.float64) / n_bins


def birkhoff_measure(pmap, x0, n, burn_in=10_000, n_bins=256):
    """Normalized histogram of an orbit segment after burn-in."""
    if n < 1:
        raise InvalidParameter("need a positive sample count")
    counts = kernels.birkhoff_counts(pmap.kernel_spec, float(x0), n,
                                     burn_in, n_bins)
    masses = counts.astype(np.float64) / n
    return EmpiricalMeasure(bin_edges=uniform_edges(n_bins), masses=masses,
                            n_samples=n, kind="birkhoff")


def birkhoff_measure_streams(pmap, seed, n, burn_in=10_000, n_bins=256,
                             n_streams=4, workers=1, stage="birkhoff"):
    """Birkhoff histogram pooled over independently seeded orbits; counts
    merge by summation, so the worker count never changes the result."""
    from .inducing import split_counts, _run_streams
    from .rng import draw_start, stream
    counts = split_counts(n, n_streams)

    def task(i):
        x0 = draw_start(stream(seed, stage, i))
        return kernels.birkhoff_counts(pmap.kernel_spec, x0, counts[i],
                                       burn_in, n_bins)

    parts = _run_streams(task, n_streams, workers)
    total = np.sum(parts, axis=0)
    return EmpiricalMeasure(bin_edges=uniform_edges(n_bins),
                            masses=total.astype(np.float64) / n,
                            n_samples=n, kind="birkhoff")


def invariant_mass(pmap, iset, x0, n, burn_in=10_000):
    """Birkhoff estimate of the invariant mass of an interval set, with a
    binomial-scale standard error (orbit correlations ignored)."""
    hits = kernels.set_mass_count(pmap.kernel_spec, iset.lower, iset.upper,
                                  float(x0), n, burn_in)
    p = hits / n
    return p, float(np.sqrt(max(p * (1.0 - p), 1.0 / n) / n))


@dataclass(frozen=True)
class UlamOperator:
    """Row-stochastic bin-to-bin transition matrix under the map."""
    n_bins: int
    matrix: sp.csr_matrix

    def __post_init__(self):
        sums = np.asarray(self.matrix.sum(axis=1)).ravel()
        if np.max(np.abs(sums - 1.0)) > 1e-10:
            raise InvalidParameter("operator rows must sum to 1")


def ulam_operator(pmap, n_bins, samples_per_bin=64):
    """Transition masses estimated by pushing a uniform grid of points per
    bin through the map."""
    if n_bins < 1:
        raise InvalidParameter("n_bins must be positive")
    if samples_per_bin < 1:
        raise InvalidParameter("samples_per_bin must be positive")
    offs = (np.arange(samples_per_bin) + 0.5) / samples_per_bin
    xs = ((np.arange(n_bins)[:, None] + offs[None, :]) / n_bins).ravel()
    ys = kernels.apply_map(pmap.kernel_spec, xs)
    cols = np.minimum((ys * n_bins).astype(np.int64), n_bins - 1)
    cols = np.maximum(cols, 0)
    rows = np.repeat(np.arange(n_bins, dtype=np.int64), samples_per_bin)
    data = np.full(len(xs), 1.0 / samples_per_bin)
    mat = sp.coo_matrix((data, (rows, cols)),
                        shape=(n_bins, n_bins)).tocsr()
    mat.sum_duplicates()
    return UlamOperator(n_bins=n_bins, matrix=mat)


def invariant_density(op, tol=1e-10, max_iters=100_000):
    """Stationary measure of the discretized operator by power iteration
    from the uniform vector."""
    n = op.n_bins
    pt = op.matrix.T.tocsr()
    v = np.full(n, 1.0 / n)
    diff = np.inf
    for _ in range(max_iters):
        w = pt @ v
        w /= w.sum()
        diff = float(np.abs(w - v).sum())
        v = w
        if diff < tol:
            return EmpiricalMeasure(bin_edges=uniform_edges(n),
                                    masses=v / v.sum(), n_samples=0,
                                    kind="ulam")
    raise NoConvergence(max_iters, diff)


def push_forward(measure, op):
    """One application of the operator to a binned measure."""
    if measure.n_bins != op.n_bins:
        raise InvalidParameter("binning mismatch")
    v = op.matrix.T @ measure.masses
    return EmpiricalMeasure(bin_edges=measure.bin_edges, masses=v / v.sum(),
                            n_samples=measure.n_samples, kind=measure.kind)


def save_operator_csv(op, path):
    """Serialize an operator: dense rows up to 1024 bins, sparse
    (row, col, value) triplets above."""
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if op.n_bins <= 1024:
            for row in op.matrix.toarray():
                w.writerow([repr(float(v)) for v in row])
        else:
            coo = op.matrix.tocoo()
            w.writerow(["row", "col", "value"])
            order = np.lexsort((coo.col, coo.row))
            for i in order:
                w.writerow([int(coo.row[i]), int(coo.col[i]),
                            repr(float(coo.data[i]))])


def load_operator_csv(path):
    """Inverse of save_operator_csv."""
    import csv
    with open(path, "r", newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and rows[0][:2] == ["row", "col"]:
        data = [(int(r), int(c), float(v)) for r, c, v in rows[1:]]
        n = 1 + max(max(r for r, _, _ in data),
                    max(c for _, c, _ in data))
        mat = sp.coo_matrix(
            ([v for _, _, v in data],
             ([r for r, _, _ in data], [c for _, c, _ in data])),
            shape=(n, n)).tocsr()
        return UlamOperator(n_bins=n, matrix=mat)
    dense = np.array([[float(v) for v in row] for row in rows])
    return UlamOperator(n_bins=dense.shape[0],
                        matrix=sp.csr_matrix(dense))


def bin_midpoint_observable(measure, func):
    """Per-bin observable values func(bin midpoint)."""
    edges = measure.bin_edges
    mids = 0.5 * (edges[:-1] + edges[1:])
    return np.array([func(m) for m in mids], dtype=np.float64)


def correlation_sequence(pmap, measure, phi, psi, n_max, orbit_len, x0,
                         burn_in=10_000):
    """Time-average correlations C_n, n = 1..n_max, of two per-bin
    observables along one orbit."""
    phi = np.asarray(phi, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    if len(phi) != measure.n_bins or len(psi) != measure.n_bins:
        raise InvalidParameter("observables must match the measure bins")
    if orbit_len <= 4 * n_max:
        raise InvalidParameter("orbit_len must be well above n_max")
    idx = kernels.orbit_bin_indices(pmap.kernel_spec, float(x0), orbit_len,
                                    burn_in, measure.n_bins)
    a = phi[idx]
    b = psi[idx]
    mean_a = a.mean()
    mean_b = b.mean()
    out = np.empty(n_max, dtype=np.float64)
    for n in range(1, n_max + 1):
        out[n - 1] = float(np.dot(a[n:], b[:-n]) / (orbit_len - n)
                           - mean_a * mean_b)
    return out


def estimate_noise_floor(corr):
    """Noise scale of a correlation sequence, from its trailing third."""
    corr = np.asarray(corr, dtype=np.float64)
    tail = corr[-max(3, len(corr) // 3):]
    return float(1.4826 * np.median(np.abs(tail)))


def decay_rate(corr, noise=None):
    """Geometric rate fitted to log |C_n| above the noise floor.

    Returns (theta, r_squared); theta = exp(slope).
    """
    corr = np.asarray(corr, dtype=np.float64)
    if noise is None:
        noise = estimate_noise_floor(corr)
    ns = []
    logs = []
    for i, c in enumerate(corr):
        if abs(c) < 3.0 * noise or c == 0.0:
            break
        ns.append(i + 1)
        logs.append(np.log(abs(c)))
    if len(ns) < 4:
        raise InsufficientDecay(
            f"only {len(ns)} correlation points above the noise floor")
    ns = np.asarray(ns, dtype=np.float64)
    logs = np.asarray(logs, dtype=np.float64)
    slope, intercept = np.polyfit(ns, logs, 1)
    fitted = slope * ns + intercept
    ss_res = float(np.sum((logs - fitted) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(np.exp(slope)), r2
