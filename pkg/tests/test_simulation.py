import math

import numpy as np
import pytest

from tandem_pricing import (MarketModel, Normal, SystemConfig, estimate_gain, finite_blocking, generate_primitives,
                            mhypo_path, solve_static, tandem_path, verify_coupling)
from tandem_pricing.simulation import CAPACITY1, QUEUE


def test_primitives_are_deterministic():
    a = generate_primitives(11, 500, 2.0, (3.0, 4.0))
    b = generate_primitives(11, 500, 2.0, (3.0, 4.0))
    np.testing.assert_array_equal(a.V, b.V)
    np.testing.assert_array_equal(a.U, b.U)
    c = generate_primitives(12, 500, 2.0, (3.0, 4.0))
    assert not np.array_equal(a.V, c.V)


def test_arrival_count_clt():
    lam, n = 2.5, 40_000
    prim = generate_primitives(5, n, lam, (1.0,))
    t = prim.V[-1]
    # n-th epoch of a rate-lam Poisson process: mean n/lam, sd sqrt(n)/lam
    assert abs(t - n / lam) <= 4 * math.sqrt(n) / lam
    assert np.all(np.diff(prim.V) > 0)


def test_first_customer_recursion():
    prim = generate_primitives(1, 10, 1.0, (2.0, 3.0, 4.0))
    path = tandem_path(prim, (0, 0, 0))
    np.testing.assert_allclose(path.T[0], np.concatenate(([prim.V[0]], prim.V[0] + np.cumsum(prim.U[0]))))


def test_huge_buffers_admit_everyone():
    prim = generate_primitives(2, 2000, 3.0, (5.0, 5.0))
    path = tandem_path(prim, (10 ** 6, 10 ** 6))
    assert path.n_admitted == prim.count
    np.testing.assert_array_equal(path.admissions, prim.V)


def test_single_station_paths_coincide():
    prim = generate_primitives(3, 5000, 4.0, (5.0,))
    for B in (0, 2, 7):
        a = tandem_path(prim, (B,))
        b = mhypo_path(prim, B, QUEUE)
        np.testing.assert_array_equal(a.T, b.T)


def test_no_arrivals():
    nobody_buys = MarketModel(2.0, Normal(-1e6, 1.0), (1.0,))
    prim = generate_primitives(4, 100, 0.0, (1.0, 1.0))
    assert prim.count == 0
    assert tandem_path(prim, (1, 1)).n_admitted == 0
    assert estimate_gain(SystemConfig((1.0, 1.0), (1, 1)),
                         nobody_buys, 1.0, 100.0, 3, 0).estimate == 0.0


def test_blocked_fraction_matches_mhypo_blocking():
    lam, mu, B1 = 3.0, (5.0, 6.0), 2
    prim = generate_primitives(9, 400_000, lam, mu)
    path = mhypo_path(prim, B1, QUEUE)
    blocked = 1 - path.n_admitted / prim.count
    beta = finite_blocking(lam, mu, B1).beta_direct
    assert blocked == pytest.approx(beta, abs=0.005)


@pytest.mark.parametrize("variant", [QUEUE, CAPACITY1])
def test_coupling_holds(variant):
    cfg = SystemConfig((8.0, 8.0, 6.0), (2, 1, 0))
    for seed in range(20):
        rep = verify_coupling(generate_primitives(seed, 3000, 3.0, cfg.mu), cfg, variant)
        assert rep.passed and rep.departures_ordered


def test_estimate_covers_exact(exp_market):
    cfg = SystemConfig((8.0, 8.0), (3, 1))
    est = estimate_gain(cfg, exp_market, 500, 2000.0, 20, 123)
    exact = solve_static(cfg, exp_market, 500).gain
    assert abs(est.estimate - exact) <= 4 * est.half_width
    assert len(est.rows) == 20
