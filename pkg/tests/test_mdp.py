import itertools

import numpy as np
import pytest

from tandem_pricing import (Exponential, MarketModel, Normal, PricingPolicy, SystemConfig,
                            batch_gains, enumerate_states, policy_evaluation, policy_iteration,
                            solve_dynamic, solve_policy, uniformize)
from tandem_pricing.static import optimal_static


def test_uniformization_rate(exp_market):
    cfg = SystemConfig((8.0, 8.0), (1, 0))
    mdp = uniformize(enumerate_states(cfg.buffers), exp_market, cfg)
    assert mdp.rate == pytest.approx(19.6)


def test_transition_rows_are_stochastic_with_self_loops(exp_market):
    cfg = SystemConfig((8.0, 8.0), (1, 1))
    mdp = uniformize(enumerate_states(cfg.buffers), exp_market, cfg)
    for k in range(mdp.n_actions):
        P = mdp.action_matrix(k).toarray()
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-14)
        assert P.min() >= 0
        assert np.all(np.diag(P) > 0)


def test_evaluation_gain_matches_ctmc(normal_market):
    cfg = SystemConfig((8.0, 6.0), (3, 1))
    sp = enumerate_states(cfg.buffers)
    mdp = uniformize(sp, normal_market, cfg)
    acts = np.random.default_rng(3).integers(0, mdp.n_actions, sp.size)
    g, h = policy_evaluation(mdp, acts)
    want = solve_policy(cfg, normal_market, PricingPolicy(acts, normal_market.prices), sp).gain
    assert g == pytest.approx(want, rel=1e-11)
    assert h[0] == 0.0


@pytest.mark.parametrize("buffers", [(4,), (1, 0), (0, 2)])
def test_brute_force_small(buffers):
    m = MarketModel(3.6, Normal(500, 50), (350, 500, 650))
    cfg = SystemConfig((8.0,) * len(buffers), buffers)
    sp = enumerate_states(buffers)
    acts = np.array(list(itertools.product(range(3), repeat=sp.size)))
    best = batch_gains(cfg, m, acts, sp).max()
    assert solve_dynamic(cfg, m, sp).gain == pytest.approx(best, rel=1e-9)


def test_single_price_equals_static():
    m = MarketModel(3.6, Exponential(0.002), (450,))
    cfg = SystemConfig((8.0, 8.0), (2, 1))
    res = solve_dynamic(cfg, m)
    assert res.policy.is_static
    assert res.gain == pytest.approx(solve_policy(cfg, m, res.policy).gain, rel=1e-12)


def test_dynamic_dominates_static(two_station, uni_market):
    assert solve_dynamic(two_station, uni_market).gain >= optimal_static(two_station, uni_market).gain * (1 - 1e-12)


def test_iteration_gains_non_decreasing(normal_market):
    cfg = SystemConfig((8.0, 8.0), (6, 2))
    mdp = uniformize(enumerate_states(cfg.buffers), normal_market, cfg)
    res = policy_iteration(mdp, initial=np.zeros(mdp.n_states, dtype=int))
    assert all(b >= a - 1e-9 for a, b in zip(res.gains, res.gains[1:]))
    assert res.iterations == len(res.gains)


def test_optimal_gain_non_decreasing_in_b1(exp_market):
    gains = [solve_dynamic(SystemConfig((8.0, 8.0), (b, 1)), exp_market).gain for b in range(8)]
    assert all(b >= a - 1e-9 for a, b in zip(gains, gains[1:]))


def test_starting_policy_does_not_change_gain(uni_market):
    cfg = SystemConfig((8.0, 8.0), (3, 0))
    mdp = uniformize(enumerate_states(cfg.buffers), uni_market, cfg)
    g0 = policy_iteration(mdp).gain
    for k in (0, mdp.n_actions - 1):
        assert policy_iteration(mdp, np.full(mdp.n_states, k)).gain == pytest.approx(g0, rel=1e-10)
