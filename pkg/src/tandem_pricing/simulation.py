"""Sample-path recursions for the tandem line and the coupled M/Hypo/1/B1 queue.

Both systems are driven by the same primitives: potential arrival epochs
``V`` and service draws ``U[n, j]`` for the ``n``-th admitted customer at
station ``j``. The M/Hypo/1/B1 customer consumes the whole row ``U[n, :]`` as
one hypoexponential service time. Arrays are 0-based: row ``i`` is customer
``i + 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

QUEUE = "queue"          # M/Hypo/1/B1: admission frees when customer n-B1-1 departs
CAPACITY1 = "capacity1"  # literal reading: admission waits for customer n-1 to depart
VARIANTS = (QUEUE, CAPACITY1)


@dataclass(frozen=True)
class RandomPrimitives:
    seed: object
    lam: float
    mu: tuple
    V: np.ndarray   # increasing potential arrival epochs
    U: np.ndarray   # (count, J) service draws

    @property
    def count(self):
        return self.V.size


def _streams(seed, J):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(1 + J)]


def generate_primitives(seed, count, lambda_pi, mu):
    """``count`` potential arrivals and as many rows of service draws.

    Streams for ``V`` and for each station's ``U`` column are independent
    children of ``seed``. With ``lambda_pi == 0`` there are no arrivals.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if lambda_pi < 0 or any(m <= 0 for m in mu):
        raise ValueError("rates must be positive")
    rngs = _streams(seed, len(mu))
    if lambda_pi == 0:
        V = np.empty(0)
    else:
        V = np.cumsum(rngs[0].exponential(1.0 / lambda_pi, count))
    U = np.column_stack([r.exponential(1.0 / m, count) for r, m in zip(rngs[1:], mu)])
    return RandomPrimitives(seed, float(lambda_pi), tuple(float(m) for m in mu), V, U)


@numba.njit(cache=True)
def _tandem_kernel(V, U, buffers, limit):
    M = V.size
    J = U.shape[1]
    n_max = min(M, U.shape[0], limit)
    T = np.zeros((n_max, J + 1))
    m = 0
    n = 0
    while n < n_max:
        thr = 0.0
        k = n - buffers[0] - 1
        if k >= 0:
            thr = T[k, 1]
        while m < M and V[m] <= thr:
            m += 1
        if m == M:
            break
        T[n, 0] = V[m]
        m += 1
        for j in range(1, J + 1):
            start = T[n, j - 1]
            if n >= 1 and T[n - 1, j] > start:
                start = T[n - 1, j]
            if j < J:
                k = n - buffers[j] - 1
                if k >= 0 and T[k, j + 1] > start:
                    start = T[k, j + 1]
            T[n, j] = start + U[n, j - 1]
        n += 1
    return T[:n]


@numba.njit(cache=True)
def _mhypo_kernel(V, U, B1, capacity1, limit):
    M = V.size
    n_max = min(M, U.shape[0], limit)
    T = np.zeros((n_max, 2))
    m = 0
    n = 0
    while n < n_max:
        thr = 0.0
        k = n - 1 if capacity1 else n - B1 - 1
        if k >= 0:
            thr = T[k, 1]
        while m < M and V[m] <= thr:
            m += 1
        if m == M:
            break
        T[n, 0] = V[m]
        m += 1
        t = T[n, 0]
        if not capacity1 and n >= 1 and T[n - 1, 1] > t:
            t = T[n - 1, 1]
        # phase by phase, same association as the tandem recursion
        for j in range(U.shape[1]):
            t += U[n, j]
        T[n, 1] = t
        n += 1
    return T[:n]


@dataclass(frozen=True)
class SamplePath:
    """Admission epochs ``T[:, 0]`` and station exit epochs ``T[:, j]``.

    For the single-queue system ``T`` has two columns (admission, departure).
    ``A(t)`` is exact for ``t <= horizon`` (the last potential arrival).
    """

    T: np.ndarray
    horizon: float
    truncated: bool

    @property
    def admissions(self):
        return self.T[:, 0]

    @property
    def departures(self):
        return self.T[:, -1]

    @property
    def n_admitted(self):
        return self.T.shape[0]

    def A(self, t):
        return np.searchsorted(self.admissions, t, side="right")


def _limit(n_customers):
    return np.iinfo(np.int64).max if n_customers is None else int(n_customers)


def tandem_path(primitives, buffers, n_customers=None):
    """Tandem line with communication blocking.

    ``T(n,0)`` is the first unused potential arrival after customer
    ``n-B1-1`` left station 1; ``T(n,j) = max(T(n,j-1), T(n-1,j),
    T(n-B_{j+1}-1, j+1)) + U(n,j)``.
    """
    buffers = np.asarray(buffers, dtype=np.int64)
    if buffers.size != primitives.U.shape[1]:
        raise ValueError("one buffer per station required")
    T = _tandem_kernel(primitives.V, primitives.U, buffers, _limit(n_customers))
    horizon = float(primitives.V[-1]) if primitives.count else math.inf
    truncated = n_customers is not None and T.shape[0] < n_customers
    return SamplePath(T, horizon, truncated)


def mhypo_path(primitives, B1, variant=QUEUE, n_customers=None):
    """Single hypoexponential server fed by the same potential arrivals.

    ``variant=QUEUE`` holds up to ``B1 + 1`` customers (service starts at
    ``max(T~(n,0), T~(n-1,J))``); ``variant=CAPACITY1`` admits only into an
    empty system.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    T = _mhypo_kernel(primitives.V, primitives.U, int(B1), variant == CAPACITY1,
                      _limit(n_customers))
    horizon = float(primitives.V[-1]) if primitives.count else math.inf
    truncated = n_customers is not None and T.shape[0] < n_customers
    return SamplePath(T, horizon, truncated)


@dataclass(frozen=True)
class CouplingReport:
    passed: bool
    epochs_checked: int
    first_violation: tuple | None   # (t, A(t), A~(t))
    departures_ordered: bool

    def to_dict(self):
        return {"passed": self.passed, "epochs_checked": self.epochs_checked,
                "first_violation": self.first_violation,
                "departures_ordered": self.departures_ordered}


def verify_coupling(primitives, config, variant=QUEUE):
    """Check ``A(t) >= A~(t)`` at every admission epoch of either path."""
    tp = tandem_path(primitives, config.buffers)
    hp = mhypo_path(primitives, config.buffers[0], variant)
    epochs = np.union1d(tp.admissions, hp.admissions)
    a, at = tp.A(epochs), hp.A(epochs)
    bad = np.nonzero(a < at)[0]
    first = None
    if bad.size:
        i = bad[0]
        first = (float(epochs[i]), int(a[i]), int(at[i]))
    n = min(tp.n_admitted, hp.n_admitted)
    dep_ok = bool(np.all(tp.departures[:n] <= hp.departures[:n]))
    return CouplingReport(bad.size == 0, int(epochs.size), first, dep_ok)


def _primitives_for_horizon(seed, lam, mu, horizon):
    """Primitives whose potential arrivals cover ``[0, horizon]``."""
    if lam == 0:
        return generate_primitives(seed, 1, 0.0, mu)
    mean = lam * horizon
    count = int(mean + 10.0 * math.sqrt(mean) + 10)
    while True:
        prim = generate_primitives(seed, count, lam, mu)
        if prim.V[-1] > horizon:
            return prim
        count *= 2


@dataclass(frozen=True)
class ReplicationRow:
    replication: int
    horizon: float
    admitted: int
    admitted_mhypo: int
    estimate: float


@dataclass(frozen=True)
class GainEstimate:
    estimate: float
    half_width: float
    rows: tuple

    def to_dict(self):
        return {"estimate": self.estimate, "half_width": self.half_width,
                "replications": len(self.rows)}


def estimate_gain(config, market, price, horizon, replications, seed):
    """Mean of ``price * A(T) / T`` over replications, with a 95% half-width."""
    if horizon <= 0 or replications < 1:
        raise ValueError("horizon and replications must be positive")
    lam = market.potential_rate(price)
    rows = []
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(replications)):
        prim = _primitives_for_horizon(child, lam, config.mu, horizon)
        adm = int(tandem_path(prim, config.buffers).A(horizon))
        adm_h = int(mhypo_path(prim, config.buffers[0]).A(horizon))
        rows.append(ReplicationRow(r, float(horizon), adm, adm_h, price * adm / horizon))
    est = np.array([row.estimate for row in rows])
    hw = 1.96 * est.std(ddof=1) / math.sqrt(replications) if replications > 1 else math.inf
    return GainEstimate(float(est.mean()), float(hw), tuple(rows))
