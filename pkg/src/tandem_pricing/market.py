"""Customer reservation prices, the admissible price set and the tandem line.

Survival is always the left limit ``1 - F(a-)``: a customer whose reservation
price equals the quote still enters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, DomainError


def _finite_positive(x, name):
    if not (isinstance(x, (int, float, np.floating, np.integer)) and math.isfinite(x) and x > 0):
        raise ConfigError(f"{name} must be finite and > 0, got {x!r}")


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        _finite_positive(self.rate, "rate")

    def survival(self, a):
        a = float(a)
        return 1.0 if a <= 0 else math.exp(-self.rate * a)

    def to_dict(self):
        return {"kind": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ConfigError(f"uniform needs lo < hi, got ({self.lo}, {self.hi})")

    def survival(self, a):
        a = float(a)
        if a <= self.lo:
            return 1.0
        if a >= self.hi:
            return 0.0
        return (self.hi - a) / (self.hi - self.lo)

    def to_dict(self):
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Normal:
    mean: float
    sd: float

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ConfigError("normal mean must be finite")
        _finite_positive(self.sd, "sd")

    def survival(self, a):
        return float(ndtr((self.mean - float(a)) / self.sd))

    def to_dict(self):
        return {"kind": "normal", "mean": self.mean, "sd": self.sd}


@dataclass(frozen=True)
class Empirical:
    """Weighted point masses; ``survival(a)`` includes the mass sitting at ``a``."""

    points: tuple
    weights: tuple

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 1 or pts.size == 0 or pts.shape != w.shape:
            raise ConfigError("empirical needs equally long, nonempty points and weights")
        if np.any(w <= 0) or not np.all(np.isfinite(pts)):
            raise ConfigError("empirical weights must be positive and points finite")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ConfigError(f"empirical weights sum to {w.sum()!r}, not 1")
        order = np.argsort(pts, kind="stable")
        object.__setattr__(self, "points", tuple(pts[order]))
        object.__setattr__(self, "weights", tuple(w[order]))

    def survival(self, a):
        pts = np.asarray(self.points)
        w = np.asarray(self.weights)
        return float(min(1.0, w[pts >= float(a)].sum()))

    def to_dict(self):
        return {"kind": "empirical", "points": list(self.points), "weights": list(self.weights)}


ReservationDistribution = Exponential | Uniform | Normal | Empirical

_KINDS = {
    "exponential": (Exponential, ("rate",)),
    "uniform": (Uniform, ("lo", "hi")),
    "normal": (Normal, ("mean", "sd")),
    "empirical": (Empirical, ("points", "weights")),
}


def distribution_from_dict(d):
    """Build a reservation-price distribution from ``{"kind": ..., params}``."""
    try:
        cls, keys = _KINDS[str(d["kind"]).lower()]
    except (KeyError, TypeError):
        raise ConfigError(f"unknown reservation distribution {d!r}") from None
    missing = [k for k in keys if k not in d]
    if missing:
        raise ConfigError(f"reservation {d['kind']!r} missing {missing}")
    args = [tuple(d[k]) if k in ("points", "weights") else float(d[k]) for k in keys]
    return cls(*args)


def survival(dist, a):
    """``1 - F(a-)``, the probability that a customer accepts quote ``a``."""
    if a < 0:
        raise DomainError(f"price must be non-negative, got {a}")
    return dist.survival(a)


@dataclass(frozen=True)
class MarketModel:
    lam: float
    distribution: object
    prices: tuple

    def __post_init__(self):
        _finite_positive(self.lam, "lambda")
        p = tuple(float(x) for x in self.prices)
        if not p:
            raise ConfigError("price set is empty")
        if any(x < 0 or not math.isfinite(x) for x in p):
            raise ConfigError("prices must be finite and non-negative")
        if any(b <= a for a, b in zip(p, p[1:])):
            raise ConfigError("prices must be strictly increasing")
        object.__setattr__(self, "prices", p)

    def price_index(self, a):
        try:
            return self.prices.index(float(a))
        except ValueError:
            raise DomainError(f"price {a} is not in the admissible set {self.prices}") from None

    def potential_rate(self, a):
        self.price_index(a)
        return self.lam * survival(self.distribution, a)

    def potential_rates(self):
        """Vector of ``lambda_a`` aligned with ``prices``."""
        return np.array([self.lam * survival(self.distribution, a) for a in self.prices])

    def with_prices(self, prices):
        return MarketModel(self.lam, self.distribution, tuple(prices))

    def with_lambda(self, lam):
        return MarketModel(lam, self.distribution, self.prices)


def potential_rate(market, a):
    """``lambda * (1 - F(a-))`` for an admissible price ``a``."""
    return market.potential_rate(a)


@dataclass(frozen=True)
class SystemConfig:
    mu: tuple
    buffers: tuple

    def __post_init__(self):
        mu = tuple(float(m) for m in self.mu)
        buf = tuple(self.buffers)
        if len(mu) < 1 or len(mu) != len(buf):
            raise ConfigError("need J >= 1 service rates and as many buffers")
        for m in mu:
            _finite_positive(m, "service rate")
        for b in buf:
            if isinstance(b, bool) or int(b) != b or b < 0:
                raise ConfigError(f"buffers must be non-negative integers, got {b!r}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "buffers", tuple(int(b) for b in buf))

    @property
    def J(self):
        return len(self.mu)

    @property
    def mean_service(self):
        return sum(1.0 / m for m in self.mu)

    def utilization(self, lam):
        return lam * self.mean_service

    def with_b1(self, b1):
        return SystemConfig(self.mu, (int(b1),) + self.buffers[1:])


def utilization(config, lam):
    """``lam * sum(1 / mu_j)``."""
    return config.utilization(lam)


def load_fragment(d):
    """Parse the shared JSON fragment into ``(SystemConfig, MarketModel)``."""
    try:
        config = SystemConfig(tuple(d["mu"]), tuple(d["buffers"]))
        market = MarketModel(float(d["lambda"]), distribution_from_dict(d["reservation"]),
                             tuple(d["prices"]))
    except KeyError as exc:
        raise ConfigError(f"config missing key {exc.args[0]!r}") from None
    except TypeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return config, market


def dump_fragment(config, market):
    return {
        "lambda": market.lam,
        "mu": list(config.mu),
        "buffers": list(config.buffers),
        "prices": list(market.prices),
        "reservation": market.distribution.to_dict(),
    }
