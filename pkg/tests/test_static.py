import math

import numpy as np
import pytest

from tandem_pricing import (BoundInapplicable, Exponential, MarketModel, Normal, SystemConfig,
                            optimal_static, simple_policy_gain, theorem1_lower_bound,
                            upper_bound_price)
from tandem_pricing.static import bound_report, log10_gap, relative_gap


def test_upper_bound_price_exponential(exp_market):
    ub = upper_bound_price(exp_market)
    assert ub.price == 500
    # a e^{-a/500} peaks at the mean
    assert ub.value == pytest.approx(1800 * math.exp(-1.0), rel=1e-14)
    assert ub.value == pytest.approx(662.18, abs=0.01)


def test_upper_bound_price_normal(normal_market):
    ub = upper_bound_price(normal_market)
    vals = dict(ub.table)
    assert ub.price == 400
    assert vals[400] == pytest.approx(1407.24, abs=0.01)
    assert vals[600] < vals[400]
    assert ub.value == max(vals.values())


def test_ties_break_to_smallest_price():
    cfg = SystemConfig((1.0,), (0,))
    # nobody buys at either price, so every objective is zero
    m = MarketModel(2.0, Normal(0.0, 1e-9), (0.0, 1.0))
    assert upper_bound_price(m).price == 0.0
    assert optimal_static(cfg, m).price == 0.0


def test_two_price_single_buffer():
    # M/M/1/1: gain(a) = a lam_a / (1 + lam_a / mu)
    m = MarketModel(10.0, Exponential(0.01), (50.0, 150.0))
    cfg = SystemConfig((2.0,), (0,))
    res = optimal_static(cfg, m)
    want = [a * 10 * math.exp(-0.01 * a) / (1 + 10 * math.exp(-0.01 * a) / 2.0) for a in m.prices]
    np.testing.assert_allclose(res.gains, want, rtol=1e-13)
    assert res.price == m.prices[int(np.argmax(want))]


def test_simple_equals_static_for_large_buffers(normal_market):
    for b in (8, 12, 20):
        cfg = SystemConfig((8.0, 8.0), (b, 0))
        st = optimal_static(cfg, normal_market)
        assert st.price == upper_bound_price(normal_market).price
        assert simple_policy_gain(cfg, normal_market) == st.gain


def test_lower_bound_sandwich(normal_market):
    cfg = SystemConfig((8.0, 8.0), (50, 0))
    a = upper_bound_price(normal_market).price
    lb = theorem1_lower_bound(a, cfg, normal_market)
    simple = simple_policy_gain(cfg, normal_market)
    assert 0 < lb <= simple <= upper_bound_price(normal_market).value


def test_lower_bound_needs_stable_load():
    m = MarketModel(20.0, Exponential(1e-6), (1.0,))
    with pytest.raises(BoundInapplicable):
        theorem1_lower_bound(1.0, SystemConfig((8.0, 8.0), (30, 0)), m)


def test_lower_bound_zero_rate():
    m = MarketModel(1.0, Normal(0.0, 1e-3), (0.0, 10.0))
    assert theorem1_lower_bound(10.0, SystemConfig((2.0,), (3,)), m) == 0.0


def test_bound_report_fields(two_station, exp_market):
    rep = bound_report(two_station, exp_market)
    assert rep.simple_gain <= rep.static_gain <= rep.upper_bound
    assert rep.relative_gap is None
    rep.true_gain = rep.static_gain
    assert rep.relative_gap == pytest.approx(relative_gap(rep.static_gain, rep.simple_gain))


def test_gap_helpers():
    assert math.isnan(relative_gap(0.0, 0.0))
    assert log10_gap(0.0) == -16.0
    assert log10_gap(1e-3) == pytest.approx(-3.0)
    assert log10_gap(None) is None
