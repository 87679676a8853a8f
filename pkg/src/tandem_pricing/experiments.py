"""Experiment drivers behind the ``tandem-pricer`` command line.

Each driver takes an :class:`ExperimentConfig` and returns plain rows or a
JSON-ready dict; writing files is left to the CLI.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .ctmc import enumerate_states, solve_policy, solve_static
from .errors import BoundInapplicable, ConfigError, TandemPricingError
from .market import MarketModel, SystemConfig, dump_fragment, load_fragment
from .mdp import solve_dynamic
from .qbd import bound_constants, finite_blocking
from .simulation import VARIANTS, estimate_gain, generate_primitives, verify_coupling
from .static import (log10_gap, optimal_static, relative_gap, theorem1_lower_bound,
                     upper_bound_price)

log = logging.getLogger(__name__)

COMMANDS = ("sweep-b1", "sensitivity", "verify", "solve")
AXES = ("b1", "rho", "stations")
DEFAULT_DYNAMIC_BUDGET = 5_000_000
ORDER_SLACK = 1e-9


@dataclass
class ExperimentConfig:
    config: SystemConfig
    market: MarketModel
    command: str | None = None
    axis: str | None = None
    grid: tuple = ()
    output: str | None = None
    seed: int = 0
    dynamic_budget: int = DEFAULT_DYNAMIC_BUDGET
    skip_dynamic: bool = False
    reference_gaps: dict = field(default_factory=dict)
    coupling_paths: int = 100
    coupling_events: int = 10_000
    sim_horizon: float = 1e4
    sim_replications: int = 30

    def __post_init__(self):
        if self.command is not None and self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}, got {self.command!r}")
        if self.axis is not None:
            if self.axis not in AXES:
                raise ConfigError(f"sweep axis must be one of {AXES}, got {self.axis!r}")
            g = tuple(self.grid)
            if not g:
                raise ConfigError("sweep grid is empty")
            if any(b <= a for a, b in zip(g, g[1:])):
                raise ConfigError("sweep grid must be strictly increasing")
            if self.axis in ("b1", "stations") and any(int(x) != x or x < (0 if self.axis == "b1" else 1) for x in g):
                raise ConfigError(f"{self.axis} grid needs integers")
            if self.axis == "rho" and any(not 0 < x for x in g):
                raise ConfigError("rho grid must be positive")
            self.grid = g

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        config, market = load_fragment(d.get("system", d))
        sweep = d.get("sweep") or {}
        sim = d.get("simulation") or {}
        refs = {int(k): float(v) for k, v in (d.get("reference_gaps") or {}).items()}
        try:
            return cls(
                config, market,
                command=d.get("command"),
                axis=sweep.get("axis"),
                grid=tuple(sweep.get("grid", ())),
                output=d.get("output"),
                seed=int(d.get("seed", 0)),
                dynamic_budget=int(d.get("dynamic_budget", DEFAULT_DYNAMIC_BUDGET)),
                skip_dynamic=bool(d.get("skip_dynamic", False)),
                reference_gaps=refs,
                coupling_paths=int(sim.get("coupling_paths", 100)),
                coupling_events=int(sim.get("coupling_events", 10_000)),
                sim_horizon=float(sim.get("horizon", 1e4)),
                sim_replications=int(sim.get("replications", 30)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config: {exc}") from None

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None

    def fragment(self):
        return dump_fragment(self.config, self.market)


@dataclass
class SweepRow:
    axis_value: float
    rho: float | None = None
    J: int | None = None
    b1: int | None = None
    true_gain: float | None = None
    static_gain: float | None = None
    static_price: float | None = None
    simple_gain: float | None = None
    simple_price: float | None = None
    upper_bound: float | None = None
    theorem1_lower: float | None = None
    relative_gap: float | None = None
    log10_relative_gap: float | None = None
    reference_gap: float | None = None
    ordering_ok: bool | None = None
    error: str = ""

    @classmethod
    def header(cls):
        return [f.name for f in fields(cls)]

    def values(self):
        return [getattr(self, f.name) for f in fields(self)]


def ordering_holds(simple, static, true, M, slack=ORDER_SLACK):
    """``simple <= static <= true <= M`` up to a relative slack; ``None`` entries are skipped."""
    chain = [x for x in (simple, static, true, M) if x is not None]
    return all(a <= b + slack * max(1.0, abs(b)) for a, b in zip(chain, chain[1:]))


def evaluate_point(config, market, axis_value, *, budget=DEFAULT_DYNAMIC_BUDGET,
                   skip_dynamic=False, reference_gap=None):
    """All gains and bounds for one system; solver failures land in ``error``."""
    row = SweepRow(axis_value, rho=config.utilization(market.lam), J=config.J,
                   b1=config.buffers[0], reference_gap=reference_gap)
    try:
        space = enumerate_states(config.buffers)
        ub = upper_bound_price(market)
        row.upper_bound, row.simple_price = ub.value, ub.price
        static = optimal_static(config, market, space)
        row.static_gain, row.static_price = static.gain, static.price
        row.simple_gain = next(r.gain for r in static.records if r.price == ub.price)
        if not skip_dynamic and space.size * len(market.prices) <= budget:
            row.true_gain = solve_dynamic(config, market, space).gain
            gap = relative_gap(row.true_gain, row.simple_gain)
            if math.isfinite(gap):
                row.relative_gap = gap
                row.log10_relative_gap = log10_gap(gap)
        try:
            row.theorem1_lower = theorem1_lower_bound(ub.price, config, market)
        except BoundInapplicable:
            row.theorem1_lower = None
        row.ordering_ok = ordering_holds(row.simple_gain, row.static_gain, row.true_gain,
                                         row.upper_bound)
    except TandemPricingError as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def sweep_b1(exp):
    grid = exp.grid if exp.axis == "b1" else (exp.config.buffers[0],)
    rows = []
    for b1 in grid:
        cfg = exp.config.with_b1(int(b1))
        rows.append(evaluate_point(cfg, exp.market, int(b1), budget=exp.dynamic_budget,
                                   skip_dynamic=exp.skip_dynamic,
                                   reference_gap=exp.reference_gaps.get(int(b1))))
    return rows


def scale_to_utilization(config, lam, rho):
    """Scale every service rate so that ``lam * sum(1/mu) == rho``."""
    f = config.utilization(lam) / rho
    return SystemConfig(tuple(m * f for m in config.mu), config.buffers)


def with_stations(config, J):
    """Truncate or extend the line to ``J`` stations; added stations copy the
    last rate and get ``B_j = 0``."""
    mu = list(config.mu[:J]) + [config.mu[-1]] * max(0, J - config.J)
    buf = list(config.buffers[:J]) + [0] * max(0, J - config.J)
    return SystemConfig(tuple(mu), tuple(buf))


def sensitivity(exp):
    """Relative gap along ``rho`` (service rates rescaled) or ``stations``
    (utilization held at the base value)."""
    if exp.axis not in ("rho", "stations"):
        raise ConfigError("sensitivity needs sweep axis 'rho' or 'stations'")
    base_rho = exp.config.utilization(exp.market.lam)
    rows = []
    for v in exp.grid:
        if exp.axis == "rho":
            cfg = scale_to_utilization(exp.config, exp.market.lam, float(v))
        else:
            cfg = scale_to_utilization(with_stations(exp.config, int(v)), exp.market.lam, base_rho)
        rows.append(evaluate_point(cfg, exp.market, v, budget=exp.dynamic_budget,
                                   skip_dynamic=exp.skip_dynamic))
    return rows


def trend_fraction(rows, increasing):
    """Share of adjacent grid pairs whose relative gap moves in the expected direction."""
    gaps = [r.relative_gap for r in rows]
    pairs = [(a, b) for a, b in zip(gaps, gaps[1:]) if a is not None and b is not None]
    if not pairs:
        return None
    ok = sum((b >= a) if increasing else (b <= a) for a, b in pairs)
    return ok / len(pairs)


def format_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path_or_file, header, rows):
    """Comma separated, header row, 17 significant digits, LF endings."""
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([format_value(v) for v in r])
    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)


def write_sweep_csv(path_or_file, rows):
    write_csv(path_or_file, SweepRow.header(), [r.values() for r in rows])


def _check(name, passed, **detail):
    return {"name": name, "passed": bool(passed), **detail}


def mm1k_closed_form(r, K):
    """Stationary distribution of M/M/1/K with load ``r``."""
    if r == 1.0:
        return np.full(K + 1, 1.0 / (K + 1))
    n = np.arange(K + 1)
    return (1 - r) * r ** n / (1 - r ** (K + 1))


def verify(exp):
    """Run the invariant checks on one system and report measured slack."""
    cfg, mk = exp.config, exp.market
    checks = []
    space = enumerate_states(cfg.buffers)
    ub = upper_bound_price(mk)
    static = optimal_static(cfg, mk, space)
    simple = next(r for r in static.records if r.price == ub.price)
    true = None
    if not exp.skip_dynamic and space.size * len(mk.prices) <= exp.dynamic_budget:
        true = solve_dynamic(cfg, mk, space).gain
    chain = [simple.gain, static.gain] + ([true] if true is not None else []) + [ub.value]
    checks.append(_check("ordering_chain", ordering_holds(simple.gain, static.gain, true, ub.value),
                         values=chain, slack=min(b - a for a, b in zip(chain, chain[1:]))))
    best = true if true is not None else static.gain
    checks.append(_check("upper_bound", best <= ub.value * (1 + ORDER_SLACK),
                         slack=ub.value - best))

    for rec in static.records:
        identity = rec.price * rec.potential_rate * (1 - rec.blocking)
        if abs(identity - rec.gain) > 1e-10 * max(1.0, abs(rec.gain)):
            checks.append(_check(f"static_gain_identity@{rec.price:g}", False,
                                 slack=identity - rec.gain))
            break
    else:
        checks.append(_check("static_gain_identity", True))

    lam_star = mk.potential_rate(ub.price)
    rho_star = cfg.utilization(lam_star)
    if lam_star == 0.0:
        checks.append(_check("theorem1_sandwich", simple.gain == 0.0, note="no potential arrivals"))
    elif rho_star < 1.0:
        bc = bound_constants(lam_star, cfg.mu)
        B1 = cfg.buffers[0]
        fb = finite_blocking(lam_star, cfg.mu, B1)
        report = {"sp": bc.sp, "p": bc.p, "c": bc.c, "N": bc.N, "c_source": bc.c_source,
                  **fb.to_dict()}
        checks.append(_check("mg1k_identity", abs(fb.beta_direct - fb.beta_mg1k) <= 1e-9,
                             slack=fb.beta_direct - fb.beta_mg1k))
        checks.append(_check("blocking_formula_comparison", True, informational=True, **report))
        if B1 >= bc.N:
            lower = theorem1_lower_bound(ub.price, cfg, mk, bc)
            checks.append(_check("theorem1_sandwich",
                                 lower <= simple.gain * (1 + ORDER_SLACK) and simple.gain <= ub.value * (1 + ORDER_SLACK),
                                 lower=lower, simple=simple.gain, upper=ub.value))
            checks.append(_check("blocking_bound", fb.beta_direct <= bc.bound(B1),
                                 slack=bc.bound(B1) - fb.beta_direct))
        else:
            checks.append(_check("theorem1_sandwich", True, note=f"bound not yet valid: B1 < N = {bc.N}"))
    else:
        checks.append(_check("theorem1_sandwich", True, note=f"rho_a = {rho_star:.6g} >= 1"))

    if cfg.J == 1:
        K = cfg.buffers[0] + 1
        worst = 0.0
        for rec in static.records:
            r = rec.potential_rate / cfg.mu[0]
            eta = solve_static(cfg, mk, rec.price, space).eta
            closed = mm1k_closed_form(r, K)
            worst = max(worst, float(np.abs(eta - closed).max()),
                        abs(rec.blocking - closed[-1]),
                        abs(rec.gain - rec.price * rec.potential_rate * (1 - closed[-1])))
        checks.append(_check("mm1k_closed_form", worst <= 1e-12, max_abs_error=worst))

    if lam_star > 0:
        violations = {v: 0 for v in VARIANTS}
        for k, child in enumerate(np.random.SeedSequence(exp.seed).spawn(exp.coupling_paths)):
            prim = generate_primitives(child, exp.coupling_events, lam_star, cfg.mu)
            for v in VARIANTS:
                rep = verify_coupling(prim, cfg, v)
                violations[v] += (not rep.passed) or (not rep.departures_ordered)
        checks.append(_check("coupling", not any(violations.values()), violations=violations,
                             paths=exp.coupling_paths, events=exp.coupling_events))
    else:
        checks.append(_check("coupling", True, note="no potential arrivals"))

    return {
        "system": exp.fragment(),
        "simple_price": ub.price, "static_price": static.price,
        "gains": {"simple": simple.gain, "static": static.gain, "true": true, "upper_bound": ub.value},
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }


def solve(exp):
    """Optimal static, simple and (budget permitting) dynamic policies."""
    cfg, mk = exp.config, exp.market
    space = enumerate_states(cfg.buffers)
    ub = upper_bound_price(mk)
    static = optimal_static(cfg, mk, space)
    out = {
        "system": exp.fragment(),
        "utilization": cfg.utilization(mk.lam),
        "upper_bound": {"price": ub.price, "value": ub.value,
                        "table": [{"price": a, "value": v} for a, v in ub.table]},
        "static": {"price": static.price, "gain": static.gain,
                   "table": [{"price": r.price, "potential_rate": r.potential_rate,
                              "blocking": r.blocking, "gain": r.gain} for r in static.records]},
        "simple": solve_static(cfg, mk, ub.price, space).to_dict() | {"price": ub.price},
    }
    out["simple"].pop("eta")
    if not exp.skip_dynamic and space.size * len(mk.prices) <= exp.dynamic_budget:
        res = solve_dynamic(cfg, mk, space)
        ss = solve_policy(cfg, mk, res.policy, space)
        out["dynamic"] = res.to_dict(space) | {"blocking": ss.blocking}
        out["relative_gap"] = relative_gap(res.gain, out["simple"]["gain"])
    else:
        out["dynamic"] = None
    return out


def simulate(exp, prices=None):
    """Simulated gain per static price next to the exact value."""
    cfg, mk = exp.config, exp.market
    space = enumerate_states(cfg.buffers)
    rows = []
    for a in prices or mk.prices:
        est = estimate_gain(cfg, mk, a, exp.sim_horizon, exp.sim_replications, exp.seed)
        exact = solve_static(cfg, mk, a, space).gain
        rows.append({"price": a, "estimate": est.estimate, "half_width": est.half_width,
                     "exact": exact,
                     "covered": abs(est.estimate - exact) <= 3 * est.half_width})
    return rows
