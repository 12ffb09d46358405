import math
from datetime import date
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from adrpairs.errors import ValidationError
from adrpairs.marketdata import PriceSeries, adjust
from adrpairs.returns import (
    Component,
    ReturnSeries,
    SpreadSeries,
    compute_returns,
    correlation,
    q_diagnostics,
    qq_data,
    spread,
    summary_stats,
)

from conftest import business_days, random_series


def rs(values, component="DD", start=date(2020, 1, 1)):
    return ReturnSeries(component, business_days(start, len(values)), values)


class TestComputeReturns:
    def test_constant_prices(self):
        days = business_days(date(2020, 1, 1), 6)
        s = PriceSeries.from_arrays("C", days, [100.0] * 6, [100.0] * 6)
        for c in Component:
            r = compute_returns(s, c)
            assert len(r) == 5
            assert np.all(r.values == 0.0)
            assert r.dates == tuple(days[1:])

    def test_two_day_example(self):
        days = business_days(date(2020, 1, 1), 2)
        s = PriceSeries.from_arrays("X", days, [99.0, 102.0], [100.0, 101.0])
        assert compute_returns(s, "ON").values[0] == pytest.approx(0.02, abs=1e-15)
        assert compute_returns(s, "ID").values[0] == pytest.approx(-1 / 102, abs=1e-15)
        assert compute_returns(s, "ID").values[0] == pytest.approx(-0.009803921568627, abs=1e-14)
        assert compute_returns(s, "DD").values[0] == pytest.approx(0.01, abs=1e-15)

    def test_compounding_identity_random(self, rng):
        s = random_series(rng, 10)
        on, id_, dd = (compute_returns(s, c).values for c in "ON ID DD".split())
        # independent evaluation from price ratios
        o, c = s.opens, s.closes
        np.testing.assert_allclose(1 + dd, c[1:] / c[:-1], rtol=0, atol=1e-12)
        assert np.max(np.abs((1 + on) * (1 + id_) - (1 + dd))) <= 1e-12

    def test_requires_two_days_and_adjustment(self, rng):
        s = random_series(rng, 1)
        with pytest.raises(ValidationError):
            compute_returns(s, "DD")
        with pytest.raises(ValidationError, match="adjust"):
            compute_returns(random_series(rng, 5, factors=True), "DD")
        assert len(compute_returns(adjust(random_series(rng, 5, factors=True)), "DD")) == 4

    def test_bad_component(self, rng):
        with pytest.raises(ValidationError):
            compute_returns(random_series(rng, 5), "XX")


class TestSummaryStats:
    def test_constant(self):
        st_ = summary_stats(rs([0.01, 0.01, 0.01]))
        assert (st_.mean, st_.std, st_.n) == (0.01, 0.0, 3)

    def test_hand_computed(self):
        st_ = summary_stats(rs([-0.02, 0.02]))
        assert st_.mean == 0.0
        # sqrt(((-0.02)^2 + 0.02^2) / 1)
        assert st_.std == pytest.approx(0.0282842712, abs=1e-10)

    def test_too_short(self):
        with pytest.raises(ValidationError):
            summary_stats(rs([0.01]))

    @given(
        st.lists(st.floats(-0.5, 0.5), min_size=2, max_size=50),
        st.floats(-0.1, 0.1),
    )
    def test_shift_invariance(self, values, c):
        a = summary_stats(np.array(values))
        b = summary_stats(np.array(values) + c)
        assert b.mean == pytest.approx(a.mean + c, abs=1e-12)
        assert b.std == pytest.approx(a.std, abs=1e-12)


class TestCorrelation:
    def test_self_and_anti(self, rng):
        v = rng.normal(0, 0.01, 100)
        assert correlation(rs(v), rs(v)) == pytest.approx(1.0, abs=1e-15)
        assert correlation(rs(v), rs(-v)) == pytest.approx(-1.0, abs=1e-15)

    def test_errors(self, rng):
        v = rng.normal(0, 0.01, 10)
        with pytest.raises(ValidationError):
            correlation(rs(v), rs(v[:9]))
        with pytest.raises(ValidationError):
            correlation(rs(v), rs(v, start=date(2021, 1, 1)))
        with pytest.raises(ValidationError):
            correlation(rs(v), rs(np.full(10, 0.01)))
        with pytest.raises(ValidationError):
            correlation(rs(v, "ON"), rs(v, "ID"))

    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 10), st.floats(-0.05, 0.05), st.floats(0.1, 10))
    def test_symmetry_and_affine_invariance(self, seed, scale_a, shift, scale_b):
        r = np.random.default_rng(seed)
        a = r.normal(0, 0.01, 60)
        b = 0.5 * a + r.normal(0, 0.01, 60)
        rho = correlation(rs(a), rs(b))
        assert correlation(rs(b), rs(a)) == pytest.approx(rho, abs=1e-12)
        assert correlation(rs(scale_a * a + shift), rs(scale_b * b)) == pytest.approx(rho, abs=1e-12)


class TestSpread:
    def test_identical_legs(self, rng):
        v = rng.normal(0, 0.01, 20)
        assert np.all(spread(rs(v), rs(v)).values == 0.0)

    def test_example(self):
        x = spread(rs([0.01, 0.02]), rs([0.005, -0.01]))
        np.testing.assert_allclose(x.values, [0.005, 0.03], rtol=0, atol=1e-15)
        assert x.component is Component.DD

    def test_antisymmetry(self, rng):
        a, b = rs(rng.normal(0, 0.01, 50)), rs(rng.normal(0, 0.01, 50))
        assert np.all(spread(a, b).values + spread(b, a).values == 0.0)

    def test_mismatch(self, rng):
        v = rng.normal(0, 0.01, 5)
        with pytest.raises(ValidationError):
            spread(rs(v), rs(v, "ON"))
        with pytest.raises(ValidationError):
            spread(rs(v), rs(v[:4]))

    def test_spread_series_validation(self):
        with pytest.raises(ValidationError):
            SpreadSeries([1.0, 2.0], dates=[date(2020, 1, 1)])
        with pytest.raises(ValidationError):
            SpreadSeries([])


class TestQDiagnostics:
    def test_all_overnight(self):
        q = q_diagnostics(rs([0.01], "ON"), rs([0.0], "ID"))
        assert q.q_values.tolist() == [1.0]
        assert q.q_bar == 1.0
        assert q.counts[-1] == 1  # right-closed last bin

    def test_symmetric(self):
        q = q_diagnostics(rs([0.01], "ON"), rs([0.01], "ID"))
        assert q.q_values.tolist() == [0.5]

    def test_exclusions(self):
        q = q_diagnostics(rs([0.0, 0.01, 0.0], "ON"), rs([0.0, -0.02, 0.03], "ID"), bins=4)
        assert q.excluded_days == 1
        assert len(q.q_values) == 2
        assert q.q_values[1] == 0.0
        assert q.q_bar == pytest.approx((0.0001 / 0.0005) / 2)
        assert q.counts.sum() == 2
        np.testing.assert_array_equal(q.bin_edges, [0, 0.25, 0.5, 0.75, 1.0])

    def test_all_excluded(self):
        q = q_diagnostics(rs([0.0, 0.0], "ON"), rs([0.0, 0.0], "ID"))
        assert q.q_bar is None
        assert q.excluded_days == 2

    def test_errors(self):
        with pytest.raises(ValidationError):
            q_diagnostics(rs([0.01], "ON"), rs([0.01, 0.0], "ID"))
        with pytest.raises(ValidationError):
            q_diagnostics(rs([0.01], "ON"), rs([0.01], "ID"), bins=0)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 80))
    def test_bounds_and_bookkeeping(self, seed, bins):
        r = np.random.default_rng(seed)
        n = 200
        on = r.normal(0, 0.01, n) * (r.random(n) < 0.8)
        id_ = r.normal(0, 0.01, n) * (r.random(n) < 0.8)
        q = q_diagnostics(rs(on, "ON"), rs(id_, "ID"), bins)
        assert np.all((q.q_values >= 0) & (q.q_values <= 1))
        assert q.excluded_days + len(q.q_values) == n
        assert q.counts.sum() == len(q.q_values)
        if q.q_bar is not None:
            assert 0 <= q.q_bar <= 1


class TestQQ:
    def test_fixed_point(self):
        n = 101
        z = np.array([NormalDist().inv_cdf((k - 0.5) / n) for k in range(1, n + 1)])
        qq = qq_data(z)
        # standardisation is idempotent: feeding the output back changes nothing
        np.testing.assert_allclose(qq_data(qq.empirical).empirical, qq.empirical, rtol=0, atol=1e-9)
        # exact normal quantiles land on a line through the origin whose slope
        # is 1 / (sample std of the quantiles), i.e. the identity up to that factor
        s = np.std(z, ddof=1)
        np.testing.assert_allclose(qq.empirical, qq.theoretical / s, rtol=0, atol=1e-9)
        assert abs(s - 1) < 0.02

    def test_three_points(self):
        qq = qq_data([1.0, -1.0, 0.0])
        oracle = [NormalDist().inv_cdf(p) for p in (1 / 6, 1 / 2, 5 / 6)]
        np.testing.assert_allclose(qq.theoretical, oracle, rtol=0, atol=1e-12)
        np.testing.assert_allclose(qq.empirical, [-1.0, 0.0, 1.0], atol=1e-15)
        assert len(qq.points) == 3

    def test_heavy_tails(self):
        # Standardised Student-t(3) sits inside the identity line around the
        # 10% shoulders; the tail direction shows in the outer 1% of points.
        t = np.random.default_rng(3).standard_t(3, 2000)
        qq = qq_data(t / math.sqrt(3.0))
        tail = 20
        assert np.all(qq.empirical[:tail] < qq.theoretical[:tail])
        assert np.all(qq.empirical[-tail:] > qq.theoretical[-tail:])

    def test_heavy_tails_monte_carlo(self):
        r = np.random.default_rng(11)
        lo, hi = [], []
        for _ in range(200):
            qq = qq_data(r.standard_t(3, 2000))
            lo.append(qq.empirical[0] - qq.theoretical[0])
            hi.append(qq.empirical[-1] - qq.theoretical[-1])
        assert np.median(lo) < 0 < np.median(hi)

    def test_errors(self):
        with pytest.raises(ValidationError):
            qq_data([0.1, 0.1, 0.1])
        with pytest.raises(ValidationError):
            qq_data([0.1, 0.2])

    @given(st.lists(st.floats(-1, 1), min_size=3, max_size=30))
    def test_x_depends_only_on_n(self, values):
        assume(np.ptp(values) > 1e-6)
        qq = qq_data(values)
        ref = qq_data(np.arange(len(values), dtype=float))
        assert np.array_equal(qq.theoretical, ref.theoretical)
        assert np.all(np.diff(qq.theoretical) > 0)
        assert np.all(np.diff(qq.empirical) >= 0)
