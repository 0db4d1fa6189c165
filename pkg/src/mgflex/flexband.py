"""Acceptable trading-power range around the economic-dispatch targets.

The single-interval dispatch problem is rebuilt with every commitment and
mode binary fixed at its dispatch value, each adjustable resource confined
to a band around its target, and the objective replaced by the signed
trade ``buy - sell``. Maximising gives the upper bound and minimising the
lower bound. Among trade-optimal points the cheapest is reported.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Mapping

import numpy as np

from .dispatch import DispatchError, DispatchSolution, EdIndex, Forecast, SystemState, _build
from .lp import GE, LE
from .milp import MilpOptions, MilpProblem, solve_milp
from .model import AlphaParams, IntervalDecision, MicrogridConfig, interval_costs

MAX, MIN = "max", "min"


@dataclass(frozen=True)
class DgTarget:
    target_kw: float
    on: int
    started: int = 0


@dataclass(frozen=True)
class BessTarget:
    net_kw: float       # positive discharging, negative charging
    charging: int
    discharging: int


@dataclass
class TargetProfile:
    dg: dict[str, DgTarget] = field(default_factory=dict)
    bess: dict[str, BessTarget] = field(default_factory=dict)
    wt: dict[str, float] = field(default_factory=dict)
    trade_kw: float = 0.0

    @classmethod
    def from_decision(cls, decision: IntervalDecision) -> "TargetProfile":
        return cls(
            dg={k: DgTarget(d.output_kw, d.on, d.started) for k, d in decision.dg.items()},
            bess={k: BessTarget(b.net_kw, b.charging, b.discharging) for k, b in decision.bess.items()},
            wt=dict(decision.wt),
            trade_kw=decision.trade_kw,
        )

    @classmethod
    def from_dispatch(cls, dispatch: DispatchSolution) -> "TargetProfile":
        return cls.from_decision(dispatch.first)

    def to_dict(self) -> dict[str, Any]:
        return {
            "dg": {k: {"target_kw": _num(t.target_kw), "on": t.on} for k, t in self.dg.items()},
            "bess": {k: {"target_kw": _num(t.net_kw),
                         "mode": "charging" if t.charging else "discharging" if t.discharging else "idle"}
                     for k, t in self.bess.items()},
            "wt": {k: {"target_kw": _num(v)} for k, v in self.wt.items()},
        }


@dataclass
class TradingRange:
    lower_kw: float
    upper_kw: float
    cost_at_lower: float
    cost_at_upper: float
    cost_at_target: float
    alpha: AlphaParams

    @property
    def size_kw(self) -> float:
        return self.upper_kw - self.lower_kw

    @property
    def cost_span(self) -> float:
        return abs(self.cost_at_upper - self.cost_at_lower)


@dataclass
class DataPackage:
    target_kw: float
    range: TradingRange
    targets: TargetProfile
    interval_start: datetime | None = None
    dt_hours: float = 0.25
    test: int | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "interval_start": self.interval_start.isoformat() if self.interval_start else None,
            "dt_hours": self.dt_hours,
            "target_kw": _num(self.target_kw),
            "lower_kw": _num(self.range.lower_kw),
            "upper_kw": _num(self.range.upper_kw),
            "cost_target": _num(self.range.cost_at_target),
            "cost_lower": _num(self.range.cost_at_lower),
            "cost_upper": _num(self.range.cost_at_upper),
            "alpha": {"dg": _alpha_json(self.range.alpha.dg), "bess": _alpha_json(self.range.alpha.bess),
                      "wt": _alpha_json(self.range.alpha.wt)},
            "devices": self.targets.to_dict(),
        }
        if self.test is not None:
            d["test"] = self.test
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False, ensure_ascii=False)


def _num(v: float) -> float:
    # 12 significant digits keeps output stable against last-bit noise
    out = float(f"{v:.12g}")
    return 0.0 if out == 0 else out


def _alpha_json(value):
    if isinstance(value, Mapping):
        return {k: float(v) for k, v in value.items()}
    return float(value)


def _single_interval(config: MicrogridConfig, forecast_interval: Forecast) -> Forecast:
    if len(forecast_interval) < 1:
        raise ValueError("forecast interval is empty")
    return forecast_interval.window(0, 1) if len(forecast_interval) > 1 else forecast_interval


def build_release_constraints(config: MicrogridConfig, state: SystemState, forecast_interval: Forecast,
                              targets: TargetProfile, alpha: AlphaParams) -> tuple[MilpProblem, EdIndex]:
    """Single-interval dispatch problem with binaries fixed and release bands added.

    The objective is left as the interval cost; :func:`solve_bound` swaps it.
    """
    fc = _single_interval(config, forecast_interval)
    fc.check_against(config)
    state.validate(config)
    milp, ix = _build(config, state, fc, 1)
    lp = milp.base
    t = 0
    for g in config.dgs:
        tgt = targets.dg[g.name]
        v = ix.dg[t][g.name]
        lp.set_bounds(v["u"], tgt.on, tgt.on)
        lp.set_bounds(v["v"], tgt.started, tgt.started)
        band = alpha.for_dg(g.name) * g.p_max_kw
        lp.add_constraint({v["p"]: 1.0}, LE, tgt.target_kw + band, f"{g.name}.release_up")
        lp.add_constraint({v["p"]: 1.0}, GE, tgt.target_kw - band, f"{g.name}.release_dn")
    for b in config.bess:
        tgt = targets.bess[b.name]
        v = ix.bess[t][b.name]
        lp.set_bounds(v["uc"], tgt.charging, tgt.charging)
        lp.set_bounds(v["ud"], tgt.discharging, tgt.discharging)
        # energy band read as a power band (time factor of one hour)
        band = alpha.for_bess(b.name) * b.e_max_kwh
        net = {v["pd"]: 1.0, v["pc"]: -1.0}
        lp.add_constraint(net, LE, tgt.net_kw + band, f"{b.name}.release_up")
        lp.add_constraint(net, GE, tgt.net_kw - band, f"{b.name}.release_dn")
    for w in config.wts:
        j = ix.wt[t][w.name]
        tgt = targets.wt[w.name]
        lo = max(0.0, tgt - alpha.for_wt(w.name) * w.rated_kw)
        hi = min(tgt, lp.upper[j])
        if lo > hi:
            raise ValueError(f"wind target {tgt} for {w.name} exceeds available power {lp.upper[j]}")
        lp.set_bounds(j, lo, hi)
    fixed = set()
    for v in ix.dg[t].values():
        fixed.update((v["u"], v["v"]))
    for v in ix.bess[t].values():
        fixed.update((v["uc"], v["ud"]))
    milp.binary_vars = [j for j in milp.binary_vars if j not in fixed]
    return milp, ix


def _interval_cost(config, fc: Forecast, decision: IntervalDecision) -> float:
    return float(sum(interval_costs(config, decision, float(fc.buy_price[0]), float(fc.sell_price[0]),
                                    fc.dt_hours)))


def _solve_lexicographic(milp: MilpProblem, ix: EdIndex, sign: float, options: MilpOptions | None):
    """Optimise ``sign * trade`` (minimised), then cost among the optima."""
    lp = milp.base
    cost = list(lp.objective)
    tr = ix.trade[0]
    trade_obj = [0.0] * lp.n_vars
    trade_obj[tr["buy"]] = sign
    trade_obj[tr["sell"]] = -sign
    lp.objective = trade_obj
    first = solve_milp(milp, options)
    if not first.optimal:
        raise DispatchError(f"trading-range problem {first.status.value}", first.status.value)
    best = sign * first.objective_value
    lp.objective = cost
    tol = 1e-7 * (1.0 + abs(best))
    con = {tr["buy"]: 1.0, tr["sell"]: -1.0}
    if sign < 0:
        lp.add_constraint(con, GE, best - tol, "trade_at_bound")
    else:
        lp.add_constraint(con, LE, best + tol, "trade_at_bound")
    second = solve_milp(milp, options)
    lp.constraints.pop()
    if not second.optimal:
        raise DispatchError("cost tie-break at trading bound failed", second.status.value)
    return best, second


def solve_bound(direction: str, config: MicrogridConfig, state: SystemState, forecast_interval: Forecast,
                targets: TargetProfile, alpha: AlphaParams,
                options: MilpOptions | None = None) -> tuple[float, float, IntervalDecision]:
    """Extreme signed trade in ``direction`` and the interval cost there.

    Returns ``(bound_kw, cost_at_bound, decision_at_bound)``.
    """
    if direction not in (MAX, MIN):
        raise ValueError(f"direction must be {MAX!r} or {MIN!r}")
    fc = _single_interval(config, forecast_interval)
    milp, ix = build_release_constraints(config, state, fc, targets, alpha)
    best, sol = _solve_lexicographic(milp, ix, -1.0 if direction == MAX else 1.0, options)
    decision = ix.decode(sol.x, 0)
    return best, _interval_cost(config, fc, decision), decision


def cost_at_target(config: MicrogridConfig, state: SystemState, forecast_interval: Forecast,
                   targets: TargetProfile, options: MilpOptions | None = None) -> float:
    """Cheapest interval cost with every resource held at its target."""
    fc = _single_interval(config, forecast_interval)
    milp, ix = build_release_constraints(config, state, fc, targets, AlphaParams())
    sol = solve_milp(milp, options)
    if not sol.optimal:
        raise DispatchError("targets are not feasible for this interval", sol.status.value)
    return _interval_cost(config, fc, ix.decode(sol.x, 0))


def trading_range(config: MicrogridConfig, state: SystemState, forecast_interval: Forecast,
                  targets: TargetProfile, alpha: AlphaParams,
                  options: MilpOptions | None = None) -> TradingRange:
    c_tar = cost_at_target(config, state, forecast_interval, targets, options)
    lo, c_lo, _ = solve_bound(MIN, config, state, forecast_interval, targets, alpha, options)
    hi, c_hi, _ = solve_bound(MAX, config, state, forecast_interval, targets, alpha, options)
    if alpha.is_zero():
        # with no release the band is the target point by definition
        if not (math.isclose(lo, targets.trade_kw, abs_tol=1e-5) and math.isclose(hi, targets.trade_kw, abs_tol=1e-5)):
            raise DispatchError(f"zero-release range ({lo}, {hi}) does not contain target {targets.trade_kw}")
        lo = hi = targets.trade_kw
        c_lo = c_hi = c_tar
    return TradingRange(lo, hi, c_lo, c_hi, c_tar, alpha)


def make_data_package(config: MicrogridConfig, state: SystemState, forecast_interval: Forecast,
                      dispatch: DispatchSolution | TargetProfile, alpha: AlphaParams,
                      options: MilpOptions | None = None, test: int | None = None) -> DataPackage:
    targets = dispatch if isinstance(dispatch, TargetProfile) else TargetProfile.from_dispatch(dispatch)
    rng = trading_range(config, state, forecast_interval, targets, alpha, options)
    return DataPackage(targets.trade_kw, rng, targets, forecast_interval.start, forecast_interval.dt_hours, test)


def range_efficiency(rng: TradingRange | tuple[float, float]) -> float | None:
    """Power-range size per dollar of cost span; ``None`` when the span is zero.

    Accepts a :class:`TradingRange` or a ``(power_size, cost_size)`` pair.
    """
    if isinstance(rng, TradingRange):
        power, cost = rng.size_kw, rng.cost_span
    else:
        power, cost = float(rng[0]), abs(float(rng[1]))
    if cost == 0 or not np.isfinite(cost):
        return None
    return power / cost


def package_from_dict(d: Mapping[str, Any]) -> dict[str, Any]:
    """Validate a decoded package record; returns it with numeric fields as floats."""
    out = dict(d)
    for key in ("target_kw", "lower_kw", "upper_kw", "cost_target", "cost_lower", "cost_upper"):
        if key not in d:
            raise ValueError(f"missing field {key!r}")
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ValueError(f"field {key!r} is not a finite number")
        out[key] = float(v)
    if out["lower_kw"] > out["upper_kw"]:
        raise ValueError("lower_kw exceeds upper_kw")
    return out
