"""Exact CTMC analysis of the tandem line under a state-dependent price.

States are vectors ``s = (s_1, ..., s_J)`` with ``0 <= s_j <= B_j + 1``,
encoded mixed-radix with station 1 as the most significant digit, so the
empty system has index 0.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CapacityError, DomainError, NumericalError

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class StateSpace:
    dims: tuple

    def __post_init__(self):
        size = 1
        for d in self.dims:
            size *= d
        if size > sys.maxsize or size > np.iinfo(np.int64).max:
            raise CapacityError(f"state space of {size} states cannot be indexed")
        strides = [1] * len(self.dims)
        for j in range(len(self.dims) - 2, -1, -1):
            strides[j] = strides[j + 1] * self.dims[j + 1]
        object.__setattr__(self, "strides", tuple(strides))
        object.__setattr__(self, "size", size)

    @property
    def J(self):
        return len(self.dims)

    @property
    def buffers(self):
        return tuple(d - 2 for d in self.dims)

    def index(self, state):
        state = tuple(int(x) for x in state)
        if len(state) != self.J or any(not 0 <= x < d for x, d in zip(state, self.dims)):
            raise DomainError(f"state {state} outside {self.dims}")
        return sum(x * s for x, s in zip(state, self.strides))

    def state(self, i):
        if not 0 <= i < self.size:
            raise DomainError(f"index {i} outside [0, {self.size})")
        return tuple(int(x) for x in np.unravel_index(i, self.dims))

    def states(self):
        """All states as an ``(|S|, J)`` integer array in index order (read-only)."""
        cached = self.__dict__.get("_states")
        if cached is None:
            cached = np.indices(self.dims).reshape(self.J, -1).T.copy()
            cached.setflags(write=False)
            object.__setattr__(self, "_states", cached)
        return cached


def enumerate_states(buffers):
    if len(buffers) < 1:
        raise DomainError("need at least one station")
    return StateSpace(tuple(int(b) + 2 for b in buffers))


@dataclass(frozen=True)
class Transitions:
    """Action-independent structure of the tandem dynamics on a state space.

    ``service`` holds the internal moves and departures as a sparse matrix of
    off-diagonal rates; arrivals go from ``arrival_from`` to ``arrival_to`` at
    the price-dependent rate ``lambda_a``.
    """

    service: sp.csr_matrix
    arrival_from: np.ndarray
    arrival_to: np.ndarray
    full_mask: np.ndarray


def tandem_transitions(space, config):
    if tuple(config.buffers) != space.buffers:
        raise DomainError("config buffers do not match the state space")
    S = space.states()
    idx = np.arange(space.size)
    J = space.J
    B = np.asarray(config.buffers)
    rows, cols, rates = [], [], []
    for j in range(J - 1):
        ok = (S[:, j] >= 1) & (S[:, j + 1] <= B[j + 1])
        rows.append(idx[ok])
        cols.append(idx[ok] - space.strides[j] + space.strides[j + 1])
        rates.append(np.full(ok.sum(), config.mu[j]))
    ok = S[:, J - 1] >= 1
    rows.append(idx[ok])
    cols.append(idx[ok] - space.strides[J - 1])
    rates.append(np.full(ok.sum(), config.mu[J - 1]))
    service = sp.csr_matrix(
        (np.concatenate(rates), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.size, space.size),
    )
    can_enter = S[:, 0] <= B[0]
    return Transitions(service, idx[can_enter], idx[can_enter] + space.strides[0], ~can_enter)


@dataclass(frozen=True)
class PricingPolicy:
    """Price index (into ``prices``) quoted in each state."""

    actions: np.ndarray
    prices: tuple

    def __post_init__(self):
        a = np.asarray(self.actions, dtype=np.int64)
        if a.ndim != 1 or np.any(a < 0) or np.any(a >= len(self.prices)):
            raise DomainError("policy assigns a price outside the admissible set")
        a.setflags(write=False)
        object.__setattr__(self, "actions", a)

    @classmethod
    def static(cls, space, market, price):
        k = market.price_index(price)
        return cls(np.full(space.size, k, dtype=np.int64), market.prices)

    @property
    def quoted(self):
        return np.asarray(self.prices)[self.actions]

    @property
    def is_static(self):
        return bool(np.all(self.actions == self.actions[0]))

    def table(self, space):
        return {str(space.state(i)): float(p) for i, p in enumerate(self.quoted)}


def arrival_rates(policy, market):
    """Per-state ``lambda * (1 - F(pi(s)-))`` (before the full-buffer check)."""
    return market.potential_rates()[policy.actions]


def build_generator(space, policy, market, config, transitions=None):
    """Sparse generator ``Q^pi`` (CSR) with diagonal equal to minus the row sum."""
    tr = transitions or tandem_transitions(space, config)
    if policy.actions.size != space.size:
        raise DomainError("policy is not defined on the whole state space")
    lam = arrival_rates(policy, market)[tr.arrival_from]
    arr = sp.csr_matrix((lam, (tr.arrival_from, tr.arrival_to)), shape=(space.size, space.size))
    off = (tr.service + arr).tocsr()
    off.eliminate_zeros()
    out = np.asarray(off.sum(axis=1)).ravel()
    return (off - sp.diags(out)).tocsr()


def stationary_distribution(Q):
    """Solve ``eta Q = 0, sum(eta) = 1`` with one balance row replaced by normalisation.

    States that are transient (zero arrival rate toward them) get zero mass;
    the chain drains to the empty state, so there is always a single closed class.
    """
    n = Q.shape[0]
    if n == 1:
        return np.ones(1)
    QT = sp.csr_matrix(Q.T)
    A = sp.vstack([QT[: n - 1], sp.csr_matrix(np.ones((1, n)))], format="csc")
    rhs = np.zeros(n)
    rhs[n - 1] = 1.0
    eta = spla.spsolve(A, rhs)
    if not np.all(np.isfinite(eta)):
        raise NumericalError("stationary solve produced non-finite values")
    if eta.min() < -1e-12:
        raise NumericalError("stationary solve produced negative mass", residual=float(-eta.min()))
    eta = np.clip(eta, 0.0, None)
    eta /= eta.sum()
    res = np.abs(Q.T @ eta).max()
    if res > RESIDUAL_TOL:
        raise NumericalError("stationary residual above tolerance", residual=float(res))
    return eta


def continuized_reward(space, policy, market, config):
    """Rate reward ``pi(s) * lambda_pi(s)`` where station 1 has room, else 0."""
    r = policy.quoted * arrival_rates(policy, market)
    S = space.states()
    r[S[:, 0] > config.buffers[0]] = 0.0
    return r


def gain(eta, space, policy, market, config):
    return float(continuized_reward(space, policy, market, config) @ eta)


def blocking_probability(eta, space):
    S = space.states()
    return float(eta[S[:, 0] == space.dims[0] - 1].sum())


@dataclass(frozen=True)
class SteadyState:
    eta: np.ndarray
    blocking: float
    gain: float
    residual: float

    def to_dict(self, space=None):
        d = {"blocking": self.blocking, "gain": self.gain, "residual": self.residual}
        if space is not None:
            d["eta"] = {str(space.state(i)): float(x) for i, x in enumerate(self.eta)}
        else:
            d["eta"] = self.eta.tolist()
        return d


def solve_policy(config, market, policy, space=None):
    space = space or enumerate_states(config.buffers)
    Q = build_generator(space, policy, market, config)
    eta = stationary_distribution(Q)
    res = float(np.abs(Q.T @ eta).max())
    return SteadyState(eta, blocking_probability(eta, space),
                       gain(eta, space, policy, market, config), res)


def solve_static(config, market, price, space=None):
    space = space or enumerate_states(config.buffers)
    return solve_policy(config, market, PricingPolicy.static(space, market, price), space)


def batch_gains(config, market, actions, space=None):
    """Gains of many policies at once by dense batched solves.

    ``actions`` is a ``(P, |S|)`` array of price indices. Meant for small
    state spaces, e.g. exhaustive enumeration of all deterministic policies.
    """
    space = space or enumerate_states(config.buffers)
    actions = np.asarray(actions, dtype=np.int64)
    if actions.ndim != 2 or actions.shape[1] != space.size:
        raise DomainError("actions must have shape (P, |S|)")
    if np.any(actions < 0) or np.any(actions >= len(market.prices)):
        raise DomainError("policy assigns a price outside the admissible set")
    n = space.size
    tr = tandem_transitions(space, config)
    rates = market.potential_rates()[actions]                       # (P, n)
    Q = np.broadcast_to(tr.service.toarray(), (actions.shape[0], n, n)).copy()
    Q[:, tr.arrival_from, tr.arrival_to] += rates[:, tr.arrival_from]
    Q[:, np.arange(n), np.arange(n)] -= Q.sum(axis=2)
    A = np.swapaxes(Q, 1, 2).copy()
    A[:, n - 1, :] = 1.0
    rhs = np.zeros((actions.shape[0], n))
    rhs[:, n - 1] = 1.0
    eta = np.linalg.solve(A, rhs[..., None])[..., 0]
    res = np.abs(np.einsum("pi,pij->pj", eta, Q)).max() if n > 1 else 0.0
    if not np.all(np.isfinite(eta)) or res > RESIDUAL_TOL:
        raise NumericalError("batched stationary solve failed", residual=float(res))
    reward = np.asarray(market.prices)[actions] * rates
    reward[:, tr.full_mask] = 0.0
    return np.einsum("pi,pi->p", reward, eta)
