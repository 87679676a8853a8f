"""Static pricing: the optimal static price, the upper-bound price and bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ctmc import enumerate_states, solve_static
from .errors import BoundInapplicable, TandemPricingError
from .qbd import bound_constants


@dataclass(frozen=True)
class StaticRecord:
    price: float
    potential_rate: float
    blocking: float
    gain: float


@dataclass(frozen=True)
class StaticSweepResult:
    records: tuple

    @property
    def gains(self):
        return np.array([r.gain for r in self.records])

    @property
    def best(self):
        # np.argmax returns the first maximiser, i.e. the smallest price
        return self.records[int(np.argmax(self.gains))]

    @property
    def price(self):
        return self.best.price

    @property
    def gain(self):
        return self.best.gain

    def csv_rows(self):
        return [(r.price, r.potential_rate, r.blocking, r.gain) for r in self.records]


def optimal_static(config, market, space=None):
    """Evaluate every static policy exactly and pick the best (ties: smallest price)."""
    space = space or enumerate_states(config.buffers)
    records = []
    for a, lam_a in zip(market.prices, market.potential_rates()):
        try:
            ss = solve_static(config, market, a, space)
        except TandemPricingError as exc:
            raise type(exc)(f"static price {a}: {exc}") from exc
        records.append(StaticRecord(a, float(lam_a), ss.blocking, ss.gain))
    return StaticSweepResult(tuple(records))


@dataclass(frozen=True)
class UpperBoundResult:
    price: float
    value: float            # M = a* lambda (1 - F(a*-))
    table: tuple            # (price, a * lambda_a) for every admissible price

    @property
    def potential_rate(self):
        return self.value / self.price if self.price > 0 else None


def upper_bound_price(market):
    """Maximise ``a * lambda * (1 - F(a-))`` over the price set."""
    values = np.asarray(market.prices) * market.potential_rates()
    k = int(np.argmax(values))
    table = tuple(zip(market.prices, values.tolist()))
    return UpperBoundResult(market.prices[k], float(values[k]), table)


def simple_policy_gain(config, market, space=None):
    """Gain of the static policy at the upper-bound price ``a*``."""
    a_star = upper_bound_price(market).price
    return solve_static(config, market, a_star, space).gain


def theorem1_lower_bound(a, config, market, constants=None):
    """``a * lambda_a * (1 - c p^(B1 - 1))``, clamped at zero.

    Raises ``BoundInapplicable`` when ``rho_a >= 1`` or when ``B1 < N``
    (the bound is not yet valid at that buffer size).
    """
    lam_a = market.potential_rate(a)
    if lam_a == 0.0:
        return 0.0
    rho_a = config.utilization(lam_a)
    if rho_a >= 1.0:
        raise BoundInapplicable(f"rho_a = {rho_a:.6g} >= 1 at price {a}")
    bc = constants or bound_constants(lam_a, config.mu)
    B1 = config.buffers[0]
    if B1 < bc.N:
        raise BoundInapplicable(f"bound not yet valid: B1 = {B1} < N = {bc.N}")
    return max(0.0, a * lam_a * (1.0 - bc.bound(B1)))


def relative_gap(true_gain, simple_gain):
    """``(true - simple) / true``; NaN when the true gain is zero."""
    if true_gain == 0:
        return float("nan")
    return (true_gain - simple_gain) / true_gain


@dataclass
class BoundReport:
    upper_bound: float
    lower_bound: float | None
    simple_gain: float | None = None
    static_gain: float | None = None
    true_gain: float | None = None
    notes: list = field(default_factory=list)

    @property
    def relative_gap(self):
        if self.true_gain is None or self.simple_gain is None or self.true_gain <= 0:
            return None
        return relative_gap(self.true_gain, self.simple_gain)

    @property
    def ratio_floor(self):
        """Guaranteed floor on ``simple / true``: ``1 - c p^(B1-1)``."""
        if self.lower_bound is None or self.upper_bound <= 0:
            return None
        return self.lower_bound / self.upper_bound

    def to_dict(self):
        return {
            "upper_bound": self.upper_bound, "lower_bound": self.lower_bound,
            "simple_gain": self.simple_gain, "static_gain": self.static_gain,
            "true_gain": self.true_gain, "relative_gap": self.relative_gap,
            "notes": list(self.notes),
        }


def bound_report(config, market, static=None, true_gain=None, space=None):
    space = space or enumerate_states(config.buffers)
    ub = upper_bound_price(market)
    static = static or optimal_static(config, market, space)
    simple = next(r.gain for r in static.records if r.price == ub.price)
    notes = []
    try:
        lower = theorem1_lower_bound(ub.price, config, market)
    except BoundInapplicable as exc:
        lower = None
        notes.append(str(exc))
    return BoundReport(ub.value, lower, simple, static.gain, true_gain, notes)


def log10_gap(gap, floor=-16.0):
    if gap is None or not math.isfinite(gap):
        return None
    return floor if gap <= 10.0 ** floor else max(floor, math.log10(gap))
