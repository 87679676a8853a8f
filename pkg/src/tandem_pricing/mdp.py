"""Gain-optimal dynamic pricing by unichain average-reward policy iteration.

The CTMC is uniformised at ``Lambda = lambda + sum(mu)``. The continuized rate
reward is charged per step as ``a * lambda_a / Lambda``, so the per-step gain
times ``Lambda`` is the gain per unit time, and the bias of the uniformised
chain coincides with the CTMC bias.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ctmc import PricingPolicy, enumerate_states, tandem_transitions
from .errors import DomainError, NumericalError

IMPROVEMENT_TOL = 1e-10
MAX_ITERATIONS = 10_000


@dataclass(frozen=True)
class UniformizedMDP:
    space: object
    config: object
    market: object
    transitions: object
    rate: float            # uniformisation constant Lambda
    lam_a: np.ndarray      # potential arrival rate per action
    rewards: np.ndarray    # (|S|, |A|) expected one-step reward

    @property
    def n_states(self):
        return self.space.size

    @property
    def n_actions(self):
        return len(self.market.prices)

    def transition_matrix(self, actions):
        """Sparse one-step matrix ``P`` of the stationary policy ``actions``."""
        tr = self.transitions
        n = self.n_states
        lam = self.lam_a[np.asarray(actions)[tr.arrival_from]]
        off = tr.service + sp.csr_matrix((lam, (tr.arrival_from, tr.arrival_to)), shape=(n, n))
        off = off / self.rate
        stay = 1.0 - np.asarray(off.sum(axis=1)).ravel()
        return (off + sp.diags(stay)).tocsr()

    def action_matrix(self, k):
        return self.transition_matrix(np.full(self.n_states, k))

    def reward_vector(self, actions):
        return self.rewards[np.arange(self.n_states), np.asarray(actions)]


def uniformize(space, market, config):
    tr = tandem_transitions(space, config)
    rate = market.lam + sum(config.mu)
    lam_a = market.potential_rates()
    prices = np.asarray(market.prices)
    rewards = np.zeros((space.size, len(prices)))
    rewards[tr.arrival_from, :] = prices * lam_a / rate
    return UniformizedMDP(space, config, market, tr, rate, lam_a, rewards)


def policy_evaluation(mdp, actions, anchor=0):
    """Solve ``g + h = r_pi + P_pi h`` with ``h[anchor] = 0``.

    Returns ``(gain per unit time, bias)``.
    """
    actions = np.asarray(actions)
    if actions.shape != (mdp.n_states,):
        raise DomainError("policy must assign an action to every state")
    n = mdp.n_states
    P = mdp.transition_matrix(actions)
    r = mdp.reward_vector(actions)
    # unknowns: h with column `anchor` replaced by g
    M = (sp.identity(n, format="csc") - P.tocsc()).tolil()
    M[:, anchor] = np.ones((n, 1))
    x = spla.spsolve(M.tocsc(), r)
    if not np.all(np.isfinite(x)):
        raise NumericalError("policy evaluation system is singular")
    g = x[anchor]
    h = x.copy()
    h[anchor] = 0.0
    res = np.abs(g + h - r - P @ h).max()
    if res > 1e-8 * max(1.0, np.abs(h).max()):
        raise NumericalError("policy evaluation residual too large", residual=float(res))
    return float(g * mdp.rate), h


def _lookahead(mdp, h):
    """Action-dependent part of ``r(s,a) + sum_s' P(s'|s,a) h(s')``.

    Only the arrival transition depends on the price, so the comparison
    reduces to ``lambda_a * (a + h(s+e1) - h(s)) / Lambda`` where station 1
    has room; in full states every action scores the same.
    """
    tr = mdp.transitions
    val = np.zeros((mdp.n_states, mdp.n_actions))
    dh = h[tr.arrival_to] - h[tr.arrival_from]
    prices = np.asarray(mdp.market.prices)
    val[tr.arrival_from, :] = mdp.lam_a[None, :] * (prices[None, :] + dh[:, None]) / mdp.rate
    return val


@dataclass
class PolicyIterationResult:
    policy: PricingPolicy
    gain: float
    bias: np.ndarray
    iterations: int
    gains: list = field(default_factory=list)

    def to_dict(self, space=None):
        d = {"gain": self.gain, "iterations": self.iterations, "gains": list(self.gains)}
        if space is not None:
            d["policy"] = self.policy.table(space)
        return d


def policy_iteration(mdp, initial=None, max_iterations=MAX_ITERATIONS, tol=IMPROVEMENT_TOL):
    """Howard's policy iteration for the unichain average-reward model.

    Starts from the myopic policy (maximise immediate reward) unless
    ``initial`` is given. A state switches action only on a strict
    improvement larger than ``tol``; ties go to the lowest price.
    """
    n = mdp.n_states
    rows = np.arange(n)
    if initial is None:
        actions = np.full(n, int(np.argmax(mdp.rewards.max(axis=0))), dtype=np.int64)
    else:
        actions = np.asarray(initial, dtype=np.int64).copy()
    gains = []
    for it in range(1, max_iterations + 1):
        g, h = policy_evaluation(mdp, actions)
        gains.append(g)
        val = _lookahead(mdp, h)
        best = np.argmax(val, axis=1)
        scale = max(1.0, float(np.abs(val).max()))
        improve = val[rows, best] > val[rows, actions] + tol * scale
        if not improve.any():
            policy = PricingPolicy(actions, mdp.market.prices)
            return PolicyIterationResult(policy, g, h, it, gains)
        actions = np.where(improve, best, actions)
    raise NumericalError(f"policy iteration did not converge in {max_iterations} iterations")


def solve_dynamic(config, market, space=None):
    space = space or enumerate_states(config.buffers)
    return policy_iteration(uniformize(space, market, config))
