"""Matrix-geometric analysis of the M/Hypo/1 queue.

The hypoexponential server runs phases ``1..J`` in order with rates
``mu_1..mu_J``. Levels count customers; within a level the phase of the
customer in service is tracked. Vectors are rows (``eta(n+1) = eta(n) R``), so
the operator norm that bounds ``||eta(1) R^n||_1`` is the max row sum of
``R^n``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .ctmc import stationary_distribution
from .errors import BoundInapplicable, NumericalError

R_TOL = 1e-14
R_MAX_ITER = 1_000_000
SP_TOL = 1e-13
N_CAP = 10_000
N_WINDOW = 200
DENOM_GUARD = 1e-9


@dataclass(frozen=True)
class HypoPH:
    mu: tuple

    @property
    def J(self):
        return len(self.mu)

    @property
    def mean(self):
        return sum(1.0 / m for m in self.mu)

    @property
    def alpha(self):
        a = np.zeros(self.J)
        a[0] = 1.0
        return a

    @property
    def subgenerator(self):
        T = np.diag(-np.asarray(self.mu, dtype=float))
        for j in range(self.J - 1):
            T[j, j + 1] = self.mu[j]
        return T

    @property
    def exit_rates(self):
        return -self.subgenerator.sum(axis=1)


@dataclass(frozen=True)
class QBDBlocks:
    A0: np.ndarray   # level up (arrival)
    A1: np.ndarray   # within level
    A2: np.ndarray   # level down (service completion, next customer starts phase 1)
    lam: float
    service: HypoPH

    @property
    def load(self):
        return self.lam * self.service.mean


def qbd_blocks(lam, mu):
    ph = HypoPH(tuple(float(m) for m in mu))
    J = ph.J
    T = ph.subgenerator
    A0 = lam * np.eye(J)
    A1 = T - lam * np.eye(J)
    A2 = np.outer(ph.exit_rates, ph.alpha)
    return QBDBlocks(A0, A1, A2, float(lam), ph)


def spectral_radius(R, tol=SP_TOL, max_iter=100_000):
    """Perron root of a non-negative matrix by power iteration."""
    if not np.any(R):
        return 0.0
    x = np.ones(R.shape[0])
    est = 0.0
    for _ in range(max_iter):
        y = x @ R
        s = y.sum()
        if s == 0.0:
            return 0.0
        new = s / x.sum()
        y /= s
        if abs(new - est) <= tol * max(1.0, new) and np.abs(y - x).max() <= 1e-12:
            return float(new)
        x, est = y, new
    # fall back on eigenvalues when the dominant root is not well separated
    return float(np.abs(np.linalg.eigvals(R)).max())


def compute_R(blocks, tol=R_TOL, max_iter=R_MAX_ITER):
    """Minimal non-negative solution of ``A0 + R A1 + R^2 A2 = 0``.

    Neuts' natural iteration ``R <- -(A0 + R^2 A2) A1^{-1}`` from ``R = 0``.
    Returns ``(R, sp(R))``.
    """
    if blocks.load >= 1.0:
        raise BoundInapplicable(f"load {blocks.load:.6g} >= 1; the infinite-buffer queue is unstable")
    J = blocks.A0.shape[0]
    if blocks.lam == 0.0:
        return np.zeros((J, J)), 0.0
    A1inv = np.linalg.inv(blocks.A1)
    R = np.zeros((J, J))
    for _ in range(max_iter):
        R_new = -(blocks.A0 + R @ R @ blocks.A2) @ A1inv
        delta = np.abs(R_new - R).max()
        R = R_new
        if delta < tol:
            break
    else:
        raise NumericalError("R iteration did not converge", residual=quadratic_residual(R, blocks))
    return R, spectral_radius(R)


def quadratic_residual(R, blocks):
    return float(np.abs(blocks.A0 + R @ blocks.A1 + R @ R @ blocks.A2).max())


@dataclass(frozen=True)
class InfiniteBufferDistribution:
    empty: float
    level1: np.ndarray
    R: np.ndarray

    def level(self, n):
        """Row vector ``eta(n, .)`` for ``n >= 1``."""
        return self.level1 @ np.linalg.matrix_power(self.R, n - 1)

    def level_mass(self, n):
        return self.empty if n == 0 else float(self.level(n).sum())

    def tail_mass(self, n):
        """``sum_{m >= n} ||eta(m, .)||`` for ``n >= 1`` via ``(I - R)^{-1}``."""
        J = self.R.shape[0]
        v = self.level(n)
        return float(np.linalg.solve((np.eye(J) - self.R).T, v).sum())

    @property
    def total(self):
        return self.empty + self.tail_mass(1)


def infinite_buffer_distribution(R, blocks):
    """Boundary ``(eta(0), eta(1, .))`` from the level-0/1 balance equations."""
    J = R.shape[0]
    lam = blocks.lam
    if lam == 0.0:
        return InfiniteBufferDistribution(1.0, np.zeros(J), R)
    # unknowns x = [eta0, eta1(1..J)]; columns of M are the balance equations
    M = np.zeros((J + 1, J + 1))
    M[0, 0] = -lam
    M[1:, 0] = blocks.A2.sum(axis=1)           # level 1 -> empty
    M[0, 1:] = lam * blocks.service.alpha       # empty -> (1, phase 1)
    M[1:, 1:] = blocks.A1 + R @ blocks.A2
    norm = np.concatenate(([1.0], np.linalg.solve(np.eye(J) - R, np.ones(J))))
    M[:, 0] = norm
    rhs = np.zeros(J + 1)
    rhs[0] = 1.0
    try:
        x = np.linalg.solve(M.T, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"boundary system is singular: {exc}") from None
    if x.min() < -1e-12:
        raise NumericalError("boundary solve produced negative mass", residual=float(-x.min()))
    x = np.clip(x, 0.0, None)
    return InfiniteBufferDistribution(float(x[0]), x[1:], R)


def mhypo_generator(lam, mu, B1):
    """Generator of the finite M/Hypo/1/B1 queue (capacity ``B1 + 1``).

    State 0 is empty; state ``1 + (n-1) J + (j-1)`` is level ``n``, phase ``j``.
    """
    J = len(mu)
    K = B1 + 1
    n_states = 1 + K * J

    def idx(n, j):
        return 1 + (n - 1) * J + j

    rows, cols, vals = [], [], []
    if lam > 0:
        rows.append(0), cols.append(idx(1, 0)), vals.append(lam)
    for n in range(1, K + 1):
        for j in range(J):
            s = idx(n, j)
            if n < K and lam > 0:
                rows.append(s), cols.append(idx(n + 1, j)), vals.append(lam)
            if j < J - 1:
                rows.append(s), cols.append(idx(n, j + 1)), vals.append(mu[j])
            else:
                rows.append(s), cols.append(0 if n == 1 else idx(n - 1, 0)), vals.append(mu[j])
    off = sp.csr_matrix((vals, (rows, cols)), shape=(n_states, n_states))
    return (off - sp.diags(np.asarray(off.sum(axis=1)).ravel())).tocsr()


@dataclass(frozen=True)
class FiniteBlocking:
    beta_direct: float
    beta_formula: float
    beta_mg1k: float

    @property
    def difference(self):
        return abs(self.beta_direct - self.beta_formula)

    def to_dict(self):
        return {"beta_direct": self.beta_direct, "beta_formula": self.beta_formula,
                "beta_mg1k": self.beta_mg1k, "difference": self.difference}


def finite_blocking(lam_a, mu, B1):
    """Blocking probability of M/Hypo/1/B1 by three routes.

    ``beta_direct`` solves the finite chain and is authoritative.
    ``beta_formula`` truncates the infinite-buffer distribution as
    ``||eta(B1+1)|| / (1 - sum_{n >= B1+2} ||eta(n)||)``.
    ``beta_mg1k`` is the classical M/G/1/K identity
    ``(1 - rho) P(>=K) / (1 - rho P(>=K))`` with ``K = B1 + 1``.
    The last two need ``rho < 1`` and are NaN otherwise.
    """
    if B1 < 0:
        raise ValueError("B1 must be >= 0")
    mu = tuple(float(m) for m in mu)
    if lam_a == 0.0:
        return FiniteBlocking(0.0, 0.0, 0.0)
    Q = mhypo_generator(lam_a, mu, B1)
    eta = stationary_distribution(Q)
    J = len(mu)
    beta_direct = float(eta[1 + B1 * J:].sum())
    blocks = qbd_blocks(lam_a, mu)
    if blocks.load >= 1.0:
        return FiniteBlocking(beta_direct, float("nan"), float("nan"))
    R, _ = compute_R(blocks)
    dist = infinite_buffer_distribution(R, blocks)
    top = dist.level_mass(B1 + 1)
    beta_formula = top / (1.0 - dist.tail_mass(B1 + 2))
    rho = blocks.load
    x = dist.tail_mass(B1 + 1)
    beta_mg1k = (1.0 - rho) * x / (1.0 - rho * x)
    return FiniteBlocking(beta_direct, float(beta_formula), float(beta_mg1k))


@dataclass(frozen=True)
class BoundConstants:
    R: np.ndarray
    sp: float
    p: float
    c: float
    N: int
    eta1_mass: float
    c_source: str          # "closed-form" or "tail"

    def bound(self, B1):
        """``c * p^(B1 - 1)``; meaningful for ``B1 >= N``."""
        return self.c * self.p ** (B1 - 1)

    def to_dict(self):
        return {"sp": self.sp, "p": self.p, "c": self.c, "N": self.N,
                "eta1_mass": self.eta1_mass, "c_source": self.c_source,
                "R": self.R.tolist()}


def power_norms(R, n_max, scale=1.0):
    """``||(R/scale)^n||`` (max row sum) for ``n = 1..n_max``."""
    M = R / scale
    out = np.empty(n_max)
    P = np.eye(R.shape[0])
    for n in range(n_max):
        P = P @ M
        out[n] = np.abs(P).sum(axis=1).max()
    return out


def certify_N(R, p, cap=N_CAP, window=N_WINDOW):
    """Smallest ``N`` such that ``||R^n|| <= p^n`` for every scanned ``n >= N``.

    The scan runs to ``cap + window``; any violation inside it pushes ``N``
    past it, so the returned ``N`` satisfies the window condition on
    ``[N, N + window]`` and everything scanned beyond.
    """
    ratios = power_norms(R, cap + window, scale=p)
    bad = np.nonzero(ratios > 1.0)[0]
    N = 1 if bad.size == 0 else int(bad[-1]) + 2
    if N > cap:
        raise BoundInapplicable(f"no N <= {cap} certifies ||R^n|| <= p^n")
    return N


def bound_constants(lam_a, mu):
    """``(R, sp, p, c, N)`` behind the exponential blocking bound.

    ``p = (sp + 1) / 2``. ``c = m1 / (1 - m1 / (1 - p))`` with ``m1 = ||eta(1,.)||``
    when that denominator exceeds ``DENOM_GUARD``; otherwise the tail constant
    ``m1 p / (1 - p)``, which bounds ``P(level >= B1 + 1) >= beta``.
    """
    blocks = qbd_blocks(lam_a, mu)
    R, sp_R = compute_R(blocks)
    p = (sp_R + 1.0) / 2.0
    dist = infinite_buffer_distribution(R, blocks)
    m1 = float(dist.level1.sum())
    N = 1 if sp_R == 0.0 else certify_N(R, p)
    denom = 1.0 - m1 / (1.0 - p)
    if denom > DENOM_GUARD:
        c, source = m1 / denom, "closed-form"
    else:
        c, source = m1 * p / (1.0 - p), "tail"
    return BoundConstants(R, sp_R, p, c, N, m1, source)
