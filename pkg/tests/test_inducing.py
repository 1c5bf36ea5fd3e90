"""First-return machinery: times, branches, Kac, pullbacks, certificate."""

import numpy as np
import pytest

from returnstats import inducing, kernels, maps
from returnstats.errors import (Censored, InvalidParameter, NoVisit,
                                PullbackDegenerate)
from returnstats.inducing import InducedSystem, IntervalSet
from returnstats.rng import stream


@pytest.fixture(scope="module")
def doubling():
    return maps.builtin("doubling")


@pytest.fixture(scope="module")
def lsv_half():
    return maps.builtin("lsv_alpha", [0.5])


@pytest.fixture(scope="module")
def logistic4():
    return maps.builtin("logistic", [4.0])


class TestIntervalSet:
    def test_basic(self):
        s = IntervalSet(components=((0.1, 0.2), (0.5, 0.75)))
        assert s.total_length == pytest.approx(0.35)
        assert s.contains(0.15) and s.contains(0.5) and s.contains(0.7)
        assert not s.contains(0.2) and not s.contains(0.3)
        assert not s.contains(0.75)

    def test_ball_clipped(self):
        s = IntervalSet.ball(0.01, 0.05)
        assert s.components[0][0] == 0.0
        assert s.components[0][1] == pytest.approx(0.06)
        assert IntervalSet.ball(0.99, 0.05).components[0][1] == 1.0

    def test_validation(self):
        with pytest.raises(InvalidParameter):
            IntervalSet(components=((0.5, 0.4),))
        with pytest.raises(InvalidParameter):
            IntervalSet(components=((0.1, 0.5), (0.4, 0.6)))
        with pytest.raises(InvalidParameter):
            IntervalSet.ball(0.5, 0.0)


class TestFirstReturnTime:
    def test_one_fifth(self, doubling):
        U = IntervalSet.interval(0.0, 0.25)
        assert inducing.first_return_time(doubling, U, 0.2, 100) == 4

    def test_half_open_membership(self, doubling):
        # 1/8 -> 1/4 (not in [0,1/4)) -> 1/2 -> 0 (in): dyadic-exact floats
        U = IntervalSet.interval(0.0, 0.25)
        assert inducing.first_return_time(doubling, U, 0.125, 100) == 3

    def test_fixed_point_in_target(self, lsv_half):
        U = IntervalSet.interval(0.0, 0.1)
        assert inducing.first_return_time(lsv_half, U, 0.0, 10) == 1

    def test_censored(self, doubling):
        U = IntervalSet.interval(0.5, 0.5 + 2.0 ** -20)
        with pytest.raises(Censored):
            inducing.first_return_time(doubling, U, 0.5 + 2.0 ** -21, 3)


class TestInducedStep:
    def test_doubling_half_domain(self, doubling):
        sys_ = InducedSystem(base=doubling,
                             domain=IntervalSet.interval(0.5, 1.0))
        assert inducing.induced_step(sys_, 0.75) == (0.5, 1)

    def test_full_space_is_the_map(self, doubling):
        sys_ = InducedSystem(base=doubling, domain=IntervalSet.unit())
        for x in (0.1, 0.3, 0.77):
            y, t = inducing.induced_step(sys_, x)
            assert t == 1 and y == maps.evaluate(doubling, x)

    def test_lsv_leaves_and_returns(self, lsv_half):
        # T(0.7) = 0.4 leaves the domain, then climbs the left branch back
        sys_ = InducedSystem(base=lsv_half,
                             domain=IntervalSet.interval(0.5, 1.0))
        y, t = inducing.induced_step(sys_, 0.7)
        assert t >= 2 and sys_.domain.contains(y)
        orb = maps.orbit(lsv_half, 0.7, t)
        assert all(not sys_.domain.contains(p) for p in orb.points[1:-1])
        assert orb.points[-1] == y

    def test_requires_domain_point(self, doubling):
        sys_ = InducedSystem(base=doubling,
                             domain=IntervalSet.interval(0.5, 1.0))
        with pytest.raises(InvalidParameter):
            inducing.induced_step(sys_, 0.25)


def _doubling_branch_oracle(p_max, grid_exp=20):
    """Brute-force return-time scan of [1/2, 1) on a 2^-grid_exp grid.

    Vectorized replay of the doubling map; exact for these dyadic points
    over <= p_max steps."""
    n = 2 ** (grid_exp - 1)
    xs = 0.5 + np.arange(n) / 2.0 ** grid_exp
    cur = xs.copy()
    times = np.zeros(n, dtype=np.int64)
    for step in range(1, p_max + 1):
        cur = np.where(cur < 0.5, 2.0 * cur, 2.0 * cur - 1.0)
        hit = (times == 0) & (cur >= 0.5) & (cur < 1.0)
        times[hit] = step
    return xs, times


class TestReturnBranches:
    def test_doubling_dyadic_oracle(self, doubling):
        sys_ = InducedSystem(base=doubling,
                             domain=IntervalSet.interval(0.5, 1.0))
        branches = inducing.return_branches(sys_, 3)
        ends = {br.time: (br.left, br.right) for br in branches}
        assert set(ends) == {1, 2, 3}
        assert ends[1] == (pytest.approx(0.75, abs=1e-11),
                           pytest.approx(1.0, abs=1e-11))
        assert ends[2] == (pytest.approx(0.625, abs=1e-11),
                           pytest.approx(0.75, abs=1e-11))
        assert ends[3] == (pytest.approx(0.5625, abs=1e-11),
                           pytest.approx(0.625, abs=1e-11))

    def test_against_grid_scan(self, doubling):
        p_max = 8
        sys_ = InducedSystem(base=doubling,
                             domain=IntervalSet.interval(0.5, 1.0))
        branches = inducing.return_branches(sys_, p_max)
        xs, times = _doubling_branch_oracle(p_max)
        for br in branches:
            inside = (xs >= br.left + 1e-9) & (xs < br.right - 1e-9)
            assert np.all(times[inside] == br.time)

    def test_full_space_single_branch(self, doubling):
        sys_ = InducedSystem(base=doubling, domain=IntervalSet.unit())
        branches = inducing.return_branches(sys_, 3)
        assert len(branches) == 1
        assert branches[0].time == 1
        assert branches[0].left == 0.0
        assert branches[0].right == 1.0

    def test_lsv_leading_branches_onto(self, lsv_half):
        sys_ = InducedSystem(base=lsv_half,
                             domain=IntervalSet.interval(0.5, 1.0))
        branches = inducing.return_branches(sys_, 2, tol=1e-12)
        assert sorted(br.time for br in branches) == [1, 2]
        for br in branches:
            assert br.image_left == pytest.approx(0.5, abs=1e-9)
            assert br.image_right == pytest.approx(1.0, abs=1e-9)

    def test_partition_consistency(self, lsv_half):
        sys_ = InducedSystem(base=lsv_half,
                             domain=IntervalSet.interval(0.5, 1.0))
        branches = inducing.return_branches(sys_, 12)
        branches.sort(key=lambda b: b.left)
        # disjoint, ordered, covering [leftmost, 1) with the unresolved
        # remainder accumulating at the domain's left end
        for a, b in zip(branches[:-1], branches[1:]):
            assert a.right <= b.left + 1e-12
            assert b.left - a.right <= 1e-9
        assert branches[-1].right == pytest.approx(1.0, abs=1e-12)
        x_hat = IntervalSet.interval(0.5, 1.0)
        for br in branches:
            assert inducing.first_return_time(
                lsv_half, x_hat, br.midpoint, br.time + 1) == br.time

    def test_multi_component_rejected(self, doubling):
        sys_ = InducedSystem(
            base=doubling,
            domain=IntervalSet(components=((0.1, 0.2), (0.5, 0.6))))
        with pytest.raises(InvalidParameter):
            inducing.return_branches(sys_, 3)


class TestKac:
    def test_full_space_exact_one(self, doubling):
        sys_ = InducedSystem(base=doubling, domain=IntervalSet.unit())
        kac = inducing.kac_constant(sys_, 1000, seed=5)
        assert kac.mean_return == 1.0
        assert kac.stderr == 0.0

    def test_doubling_half(self, doubling):
        sys_ = InducedSystem(base=doubling,
                             domain=IntervalSet.interval(0.5, 1.0))
        kac = inducing.kac_constant(sys_, 50_000, seed=5)
        assert abs(kac.mean_return - 2.0) <= 4.0 * kac.stderr

    def test_lsv_cross_validates_birkhoff(self, lsv_half):
        from returnstats import measures
        x_hat = IntervalSet.interval(0.5, 1.0)
        sys_ = InducedSystem(base=lsv_half, domain=x_hat)
        kac = inducing.kac_constant(sys_, 50_000, seed=5, burn_in=100_000)
        gen = stream(5, "lsv-mass")
        mass, mass_se = measures.invariant_mass(
            lsv_half, x_hat, float(gen.uniform(0.1, 0.9)), 2_000_000,
            burn_in=100_000)
        combined = 3.0 * (kac.stderr + mass_se / mass ** 2)
        assert abs(kac.mean_return - 1.0 / mass) <= combined

    def test_streams_merge_is_worker_independent(self, doubling):
        sys_ = InducedSystem(base=doubling,
                             domain=IntervalSet.interval(0.5, 1.0))
        a = inducing.kac_constant(sys_, 10_000, seed=9, n_streams=4,
                                  workers=1)
        b = inducing.kac_constant(sys_, 10_000, seed=9, n_streams=4,
                                  workers=3)
        assert a == b


class TestMarkovNeighborhood:
    def test_logistic_fixed_point(self, logistic4):
        mn = inducing.markov_neighborhood(logistic4, 0.75, (0.5, 1.0), 50,
                                          forbidden=(0.5, 1.0, 0.0))
        assert mn.n == 1
        assert mn.left == pytest.approx(0.5, abs=1e-9)
        assert mn.right == pytest.approx((2.0 + np.sqrt(2.0)) / 4.0,
                                         abs=1e-9)

    def test_doubling_dyadic_pullback(self, doubling):
        # T^n(0.3) first lands in (1/4, 1/2) at some n; the pullback is a
        # dyadic interval of length |Y| 2^-n around 0.3
        Y = (0.25, 0.5)
        mn = inducing.markov_neighborhood(doubling, 0.3, Y, 20)
        assert mn.left <= 0.3 <= mn.right
        assert mn.right - mn.left == pytest.approx(0.25 * 2.0 ** -mn.n,
                                                   rel=1e-9)
        orb = maps.orbit(doubling, 0.3, mn.n)
        assert Y[0] < orb.points[-1] < Y[1]

    def test_single_branch_pullback(self, logistic4):
        # T(x) in Y with x interior to the increasing branch
        Y = (0.6, 0.9)
        mn = inducing.markov_neighborhood(logistic4, 0.3, Y, 5)
        assert mn.n == 1
        lo = maps.evaluate(logistic4, mn.left)
        hi = maps.evaluate(logistic4, mn.right)
        assert min(lo, hi) == pytest.approx(0.6, abs=1e-12)
        assert max(lo, hi) == pytest.approx(0.9, abs=1e-12)

    def test_no_visit(self, doubling):
        with pytest.raises(NoVisit):
            inducing.markov_neighborhood(doubling, 0.0, (0.5, 0.75), 10)

    def test_forbidden_start(self, logistic4):
        with pytest.raises(InvalidParameter):
            inducing.markov_neighborhood(logistic4, 0.5, (0.5, 1.0), 10,
                                         forbidden=(0.5,))


class TestAbramovIdentity:
    @pytest.mark.parametrize("mapname,params,u_lo,u_hi,horizon", [
        ("doubling", [], 0.78, 0.82, 200),
        ("lsv_alpha", [0.5], 0.74, 0.76, 100_000),
    ])
    def test_tower_accounting(self, mapname, params, u_lo, u_hi, horizon):
        pmap = maps.builtin(mapname, params)
        x_hat = IntervalSet.interval(0.5, 1.0)
        U = IntervalSet.interval(u_lo, u_hi)
        sys_ = InducedSystem(base=pmap, domain=x_hat, max_steps=horizon)
        gen = stream(31, f"abramov-{mapname}")
        compared = 0
        for _ in range(500):
            x = float(gen.uniform(u_lo, u_hi))
            try:
                tau = inducing.first_return_time(pmap, U, x, horizon)
            except Censored:
                continue
            total = 0
            y = x
            while total < tau:
                y, n = inducing.induced_step(sys_, y)
                total += n
                if U.contains(y):
                    break
            compared += 1
            assert total == tau and U.contains(y)
        assert compared >= 300


class TestCertificate:
    def test_full_space_doubling(self, doubling):
        cert = inducing.rmap_certificate(
            InducedSystem(base=doubling, domain=IntervalSet.unit()), 3)
        assert cert.expansion_inf == 2.0
        assert cert.distortion_K == 1.0
        assert cert.weight_tail == (0.5,)
        assert cert.branches_checked == 1

    def test_doubling_chain_rule_powers(self, doubling):
        cert = inducing.rmap_certificate(
            InducedSystem(base=doubling,
                          domain=IntervalSet.interval(0.5, 1.0)), 10)
        assert cert.expansion_inf == 2.0
        assert cert.distortion_K == 1.0
        for row in cert.branch_rows:
            assert row[5] == row[6] == 2.0 ** row[0]

    def test_lsv_summability_evidence(self, lsv_half):
        cert = inducing.rmap_certificate(
            InducedSystem(base=lsv_half,
                          domain=IntervalSet.interval(0.5, 1.0)), 30,
            grid=32)
        assert cert.expansion_inf > 1.0
        assert np.isfinite(cert.distortion_K)
        incs = cert.weight_increments()
        assert all(a > b for a, b in zip(incs[:-1], incs[1:]))
        assert cert.variation_estimate < cert.klogk_bound * 2

    @pytest.mark.parametrize("domain", [(0.5, 1.0)])
    def test_grid_stability(self, doubling, lsv_half, domain):
        for pmap in (doubling, lsv_half):
            sys_ = InducedSystem(base=pmap,
                                 domain=IntervalSet.interval(*domain))
            a = inducing.rmap_certificate(sys_, 10, grid=64)
            b = inducing.rmap_certificate(sys_, 10, grid=128)
            assert abs(a.expansion_inf - b.expansion_inf) \
                <= 0.01 * a.expansion_inf
            assert abs(a.distortion_K - b.distortion_K) \
                <= 0.01 * a.distortion_K

    def test_json_round_trip(self, doubling):
        import json
        cert = inducing.rmap_certificate(
            InducedSystem(base=doubling,
                          domain=IntervalSet.interval(0.5, 1.0)), 5)
        blob = json.loads(json.dumps(cert.to_dict()))
        assert blob["branches_checked"] == 5
        assert len(blob["weight_tail"]) == 5
        assert len(blob["branches"]) == 5
        assert {"time", "left", "right", "deriv_inf",
                "deriv_sup"} <= set(blob["branches"][0])


class TestFirstReturnReplay:
    """Sampler gaps replay exactly on the sampling orbit."""

    @pytest.mark.parametrize("mapname,params", [
        ("doubling", []), ("lsv_alpha", [0.5])])
    def test_gap_replay(self, mapname, params):
        pmap = maps.builtin(mapname, params)
        U = IntervalSet.interval(0.5, 0.55)
        starts, gaps, _ = kernels.collect_return_gaps(
            pmap.kernel_spec, U.lower, U.upper, 0.3111, 500, 50, 10 ** 7)
        assert len(gaps) == 50
        orbit = kernels.sampling_orbit(
            pmap.kernel_spec, 0.3111, 500 + 10 ** 5 + int(gaps.sum()))
        # locate the first entry (bitwise equality: same replayed orbit)
        idx = 500
        while orbit[idx] != starts[0]:
            idx += 1
        for s, g in zip(starts.tolist(), gaps.tolist()):
            assert orbit[idx] == s
            assert U.contains(orbit[idx])
            for k in range(idx + 1, idx + g):
                assert not U.contains(orbit[k])
            assert U.contains(orbit[idx + g])
            idx += g
