"""Return/hitting-time sampling and the statistical law checks.

Normalized return times are tested against the exponential survival e^{-t},
visit counts against the Poisson law, and the base-vs-induced distributions
against the two-sided inducing sandwich.  Sampling walks one long orbit and
uses its successive entries into U as start points; an independent-orbits
mode exists as a cross-check.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import (AllCensored, Censored, InvalidParameter,
                     TooFewEntries)
from .inducing import (InducedSystem, kac_constant, split_counts,
                       _run_streams)
from .measures import invariant_mass
from .rng import draw_start, stream


@dataclass(frozen=True)
class ReturnSample:
    start: float
    raw_time: int
    censored: bool
    normalized: float


@dataclass(frozen=True)
class EDFReport:
    """Empirical survival function of normalized times, with its exact
    sup-distance to e^{-t}."""
    times: np.ndarray            # sorted uncensored normalized times
    survival: np.ndarray         # value just after each jump, (n-i)/n
    ks_distance: float
    n_effective: int
    censored_fraction: float

    def survival_at(self, t):
        """Right-continuous step lookup S(t) = #{times > t} / n."""
        i = int(np.searchsorted(self.times, t, side="right"))
        return (self.n_effective - i) / self.n_effective


def _make_samples(starts, raw, mu_u, n_max):
    out = []
    for s, t in zip(starts.tolist(), raw.tolist()):
        censored = t > n_max
        rt = n_max if censored else t
        out.append(ReturnSample(start=s, raw_time=rt, censored=censored,
                                normalized=rt * mu_u))
    return out


def sample_return_times(pmap, U, mu_u_estimate, n_samples, n_max, seed,
                        burn_in=10_000, n_streams=1, workers=1,
                        budget=None, stage="return"):
    """Return times of the successive entries of a typical orbit into U,
    normalized by the supplied invariant-mass estimate."""
    if mu_u_estimate <= 0.0:
        raise InvalidParameter("mu_u_estimate must be positive")
    if budget is None:
        budget = int(50.0 * n_samples / mu_u_estimate) + 1_000_000
    counts = split_counts(n_samples, n_streams)

    def task(i):
        gen = stream(seed, stage, i)
        x0 = draw_start(gen)
        starts, gaps, _ = kernels.collect_return_gaps(
            pmap.kernel_spec, U.lower, U.upper, x0, burn_in, counts[i],
            budget)
        return starts, gaps

    parts = _run_streams(task, n_streams, workers)
    starts = np.concatenate([p[0] for p in parts])
    raw = np.concatenate([p[1] for p in parts])
    if len(raw) < n_samples:
        raise TooFewEntries(
            f"orbit produced {len(raw)} of {n_samples} entries in budget")
    return _make_samples(starts, raw, mu_u_estimate, n_max)


def sample_hitting_times(pmap, U, mu_u_estimate, n_samples, n_max, seed,
                         burn_in=10_000, gap_steps=64, n_streams=1,
                         workers=1, budget=None, stage="hitting"):
    """Hitting times of U from orbit points not conditioned on U."""
    if mu_u_estimate <= 0.0:
        raise InvalidParameter("mu_u_estimate must be positive")
    if budget is None:
        budget = int(50.0 * n_samples / mu_u_estimate) + 1_000_000
    counts = split_counts(n_samples, n_streams)

    def task(i):
        gen = stream(seed, stage, i)
        x0 = draw_start(gen)
        starts, times, _ = kernels.collect_hitting_times(
            pmap.kernel_spec, U.lower, U.upper, x0, burn_in, counts[i],
            gap_steps, budget)
        return starts, times

    parts = _run_streams(task, n_streams, workers)
    starts = np.concatenate([p[0] for p in parts])
    raw = np.concatenate([p[1] for p in parts])
    if len(raw) < n_samples:
        raise TooFewEntries(
            f"orbit produced {len(raw)} of {n_samples} hits in budget")
    return _make_samples(starts, raw, mu_u_estimate, n_max)


def independent_return_times(pmap, U, mu_u_estimate, n_samples, n_max, seed,
                             burn_in=10_000, stage="indep-return"):
    """Cross-check mode: one fresh burnt-in orbit per sample; the start is
    the orbit's first entry into U."""
    gen = stream(seed, stage)
    budget = int(200.0 / mu_u_estimate) + 1_000_000
    out = []
    while len(out) < n_samples:
        x0 = draw_start(gen)
        starts, gaps, _ = kernels.collect_return_gaps(
            pmap.kernel_spec, U.lower, U.upper, x0, burn_in, 1, budget)
        if len(gaps) == 0:
            continue
        out.extend(_make_samples(starts, gaps, mu_u_estimate, n_max))
    return out


def edf(samples):
    """Empirical survival report with the exact sup-distance to e^{-t},
    evaluated at the jump points of the step function."""
    total = len(samples)
    if total == 0:
        raise InvalidParameter("no samples")
    ts = np.sort([s.normalized for s in samples if not s.censored])
    n = len(ts)
    if n == 0:
        raise AllCensored("all samples censored")
    i = np.arange(1, n + 1, dtype=np.float64)
    target = np.exp(-ts)
    after = (n - i) / n            # S at the jump
    before = (n - i + 1.0) / n     # S just before it
    ks = float(np.max(np.maximum(np.abs(target - after),
                                 np.abs(target - before))))
    return EDFReport(times=ts, survival=after, ks_distance=ks,
                     n_effective=n, censored_fraction=1.0 - n / total)


def survival_sup_distance(report_a, report_b):
    """sup_t |S_a(t) - S_b(t)| between two step survival functions."""
    grid = np.union1d(report_a.times, report_b.times)
    ia = np.searchsorted(report_a.times, grid, side="right")
    ib = np.searchsorted(report_b.times, grid, side="right")
    sa = (report_a.n_effective - ia) / report_a.n_effective
    sb = (report_b.n_effective - ib) / report_b.n_effective
    # also compare just before each jump
    ja = np.searchsorted(report_a.times, grid, side="left")
    jb = np.searchsorted(report_b.times, grid, side="left")
    pa = (report_a.n_effective - ja) / report_a.n_effective
    pb = (report_b.n_effective - jb) / report_b.n_effective
    return float(max(np.max(np.abs(sa - sb)), np.max(np.abs(pa - pb))))


def short_return(pmap, U, n_max_scan, grid=1024, refine_rounds=2,
                 refine_factor=16):
    """Minimum first-return time over U, by grid scan with local
    bisection-style refinement around the minima.

    Probes use pointwise float orbits, which for the dyadic-linear maps
    (doubling, tent) are only faithful for ~50 steps; keep n_max_scan
    below that for those systems.
    """
    spec = pmap.kernel_spec
    lo, up = U.lower, U.upper

    def probe(x, cap):
        t, _ = kernels.first_return(spec, lo, up, x, cap)
        return t

    total = U.total_length
    cells = []
    for a, b in U.components:
        k = max(1, int(round(grid * (b - a) / total)))
        h = (b - a) / k
        cells.extend((a + j * h, a + (j + 1) * h) for j in range(k))
    best = n_max_scan + 1
    best_cells = []
    for a, b in cells:
        t = probe(0.5 * (a + b), min(best, n_max_scan))
        if t and t <= best:
            if t < best:
                best_cells = []
            best = t
            best_cells.append((a, b))
    if best > n_max_scan:
        raise Censored(n_max_scan)
    for _ in range(refine_rounds):
        next_cells = []
        for a, b in best_cells:
            h = (b - a) / refine_factor
            for j in range(refine_factor):
                ca, cb = a + j * h, a + (j + 1) * h
                t = probe(0.5 * (ca + cb), best)
                if t and t <= best:
                    if t < best:
                        next_cells = []
                        best = t
                    next_cells.append((ca, cb))
        if next_cells:
            best_cells = next_cells
    return best


class HSVQuantities(NamedTuple):
    a_n: float
    b_n: float
    c_sup: float
    a_n_stderr: float


def hsv_quantities(pmap, U, measure, N, partition_depth=8, n_mc=100_000,
                   seed=0, burn_in=10_000, stage="hsv"):
    """Short-return mass a_N, the mixing defect b_N over the depth-d dyadic
    bin algebra, and the return-vs-hitting survival gap c_sup."""
    if N < 0:
        raise InvalidParameter("N must be nonnegative")
    spec = pmap.kernel_spec
    gen = stream(seed, stage, 0)
    x0 = draw_start(gen)
    budget = int(50.0 * n_mc / max(U.total_length * 0.1, 1e-12)) + 1_000_000
    starts, gaps, _ = kernels.collect_return_gaps(
        spec, U.lower, U.upper, x0, burn_in, n_mc, budget)
    if len(gaps) < n_mc:
        raise TooFewEntries(f"{len(gaps)} of {n_mc} entries")

    a_n = float(np.mean(gaps <= N)) if N >= 1 else 0.0
    a_se = math.sqrt(max(a_n * (1.0 - a_n), 1.0 / n_mc) / n_mc)

    # defect of mixing: image of mu_U under T^N vs mu, over unions of
    # depth-d dyadic bins (the max over the finite algebra is attained at
    # the positive/negative parts)
    d_bins = 2 ** partition_depth
    ys = starts.copy()
    for _ in range(N):
        ys = kernels.apply_map(spec, ys)
    img_bins = np.minimum((ys * d_bins).astype(np.int64), d_bins - 1)
    p = np.bincount(img_bins, minlength=d_bins) / len(ys)
    q = np.array([measure.mass_of_interval(j / d_bins, (j + 1) / d_bins)
                  for j in range(d_bins)])
    diff = p - q
    b_n = float(max(diff[diff > 0].sum() if (diff > 0).any() else 0.0,
                    -diff[diff < 0].sum() if (diff < 0).any() else 0.0))

    gen_h = stream(seed, stage, 1)
    x0h = draw_start(gen_h)
    _, hits, _ = kernels.collect_hitting_times(
        spec, U.lower, U.upper, x0h, burn_in, n_mc, 64, budget)
    if len(hits) < n_mc:
        raise TooFewEntries(f"{len(hits)} of {n_mc} hitting samples")
    c_sup = _integer_survival_sup(gaps, hits)
    return HSVQuantities(a_n=a_n, b_n=b_n, c_sup=c_sup, a_n_stderr=a_se)


def _integer_survival_sup(times_a, times_b):
    ks = np.union1d(times_a, times_b)
    sa = 1.0 - np.searchsorted(np.sort(times_a), ks, side="right") \
        / len(times_a)
    sb = 1.0 - np.searchsorted(np.sort(times_b), ks, side="right") \
        / len(times_b)
    return float(np.max(np.abs(sa - sb)))


@dataclass(frozen=True)
class SandwichReport:
    holds: bool
    lower_margin: float
    upper_margin: float
    eps: float
    slack: float
    c: float
    c_stderr: float
    mu_u: float
    mu_hat_u: float
    base_edf: EDFReport
    induced_edf: EDFReport


def sandwich_check(pmap, x_hat, U, eps, n_samples, seed, n_max=10 ** 7,
                   burn_in=10_000, kac_entries=100_000, mass_iters=2_000_000,
                   mu_u=None, stage="sandwich"):
    """Two-sided check that the base-map return law is the induced-map
    return law up to the epsilon sandwich, with statistical slack."""
    for a, b in U.components:
        if not any(xa <= a and b <= xb for xa, xb in x_hat.components):
            raise InvalidParameter("U must sit inside the induced domain")
    sys = InducedSystem(base=pmap, domain=x_hat, max_steps=n_max)
    kac = kac_constant(sys, kac_entries, seed, burn_in=burn_in,
                       stage=f"{stage}-kac")
    c = kac.mean_return
    if mu_u is None:
        gen = stream(seed, f"{stage}-mass")
        mu_u, _ = invariant_mass(pmap, U, draw_start(gen), mass_iters,
                                 burn_in)
    mu_hat_u = mu_u * c

    base_samples = sample_return_times(pmap, U, mu_u, n_samples, n_max,
                                       seed, burn_in=burn_in,
                                       stage=f"{stage}-T")
    base = edf(base_samples)

    gen_i = stream(seed, f"{stage}-T", 0)
    x0 = draw_start(gen_i)
    budget = int(50.0 * n_samples / mu_u) + 1_000_000
    starts_hat, gaps_hat, _ = kernels.collect_induced_gaps(
        pmap.kernel_spec, x_hat.lower, x_hat.upper, U.lower, U.upper,
        x0, burn_in, n_samples, budget)
    if len(gaps_hat) < n_samples:
        raise TooFewEntries(
            f"induced orbit produced {len(gaps_hat)} of {n_samples} entries")
    induced = edf(_make_samples(starts_hat, gaps_hat, mu_hat_u, n_max))

    # margins change only at the jumps of either side; scan their union
    slack = 3.0 * 1.36 / math.sqrt(min(base.n_effective,
                                       induced.n_effective))
    eval_ts = np.union1d(base.times,
                         np.union1d(induced.times * (1.0 - eps / c),
                                    induced.times * (1.0 + eps / c)))
    lower_margin = math.inf
    upper_margin = math.inf
    for t in eval_ts.tolist():
        ft = base.survival_at(t)
        f_lo = induced.survival_at(t / (1.0 - eps / c))
        f_hi = induced.survival_at(t / (1.0 + eps / c))
        lower_margin = min(lower_margin, ft - (f_lo - 2.0 * eps - slack))
        upper_margin = min(upper_margin, (f_hi + 2.0 * eps + slack) - ft)
    return SandwichReport(
        holds=(lower_margin >= 0.0 and upper_margin >= 0.0),
        lower_margin=lower_margin, upper_margin=upper_margin, eps=eps,
        slack=slack, c=c, c_stderr=kac.stderr, mu_u=mu_u,
        mu_hat_u=mu_hat_u, base_edf=base, induced_edf=induced)


def visit_counts(pmap, U, mu_u_estimate, t, n_windows, seed,
                 burn_in=10_000, stage="visits"):
    """Histogram of U-visit counts over disjoint orbit windows of expected
    visit intensity t."""
    if t <= 0.0:
        raise InvalidParameter("t must be positive")
    window = max(1, int(round(t / mu_u_estimate)))
    gen = stream(seed, stage)
    x0 = draw_start(gen)
    counts = kernels.visit_window_counts(
        pmap.kernel_spec, U.lower, U.upper, x0, burn_in, window, n_windows)
    return np.bincount(counts)


class ChebyshevResult(NamedTuple):
    ok: bool
    worst_t: float
    worst_value: float
    bound: float


def chebyshev_check(report):
    """Verify t * survival(t) stays within the Kac-normalized Chebyshev
    bound 1 + 5/sqrt(n) at every jump of the survival function."""
    n = report.n_effective
    bound = 1.0 + 5.0 / math.sqrt(n)
    i = np.arange(1, n + 1, dtype=np.float64)
    before = (n - i + 1.0) / n          # S just left of each jump
    vals = report.times * before
    worst = int(np.argmax(vals))
    return ChebyshevResult(ok=bool(vals[worst] <= bound),
                           worst_t=float(report.times[worst]),
                           worst_value=float(vals[worst]), bound=bound)
