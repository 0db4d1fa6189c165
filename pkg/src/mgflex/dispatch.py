"""Multi-interval economic dispatch MILP and the rolling-horizon step."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from typing import Mapping

import numpy as np

from .lp import EQ, GE, LE, LpProblem
from .milp import MilpOptions, MilpProblem, MilpSolution, solve_milp
from .model import (BessDecision, DgDecision, IntervalDecision, MicrogridConfig, bess_step,
                    interval_costs)

log = logging.getLogger(__name__)


class DispatchError(RuntimeError):
    """The dispatch MILP has no usable solution."""

    def __init__(self, message: str, status: str = "", interval_start: datetime | None = None):
        super().__init__(message)
        self.status = status
        self.interval_start = interval_start


@dataclass
class SystemState:
    """Boundary values at the start of a horizon."""

    bess_energy_kwh: dict[str, float] = field(default_factory=dict)
    dg_previous_output_kw: dict[str, float] = field(default_factory=dict)
    dg_previous_on: dict[str, int] = field(default_factory=dict)

    @classmethod
    def initial(cls, config: MicrogridConfig, soc: float = 0.5) -> "SystemState":
        return cls(
            bess_energy_kwh={b.name: soc * b.e_max_kwh for b in config.bess},
            dg_previous_output_kw={g.name: 0.0 for g in config.dgs},
            dg_previous_on={g.name: 0 for g in config.dgs},
        )

    def validate(self, config: MicrogridConfig) -> None:
        for b in config.bess:
            e = self.bess_energy_kwh.get(b.name)
            if e is None or not 0 <= e <= b.e_max_kwh:
                raise ValueError(f"state energy for {b.name} must lie in [0, {b.e_max_kwh}], got {e}")
        for g in config.dgs:
            on = int(self.dg_previous_on.get(g.name, 0))
            p = float(self.dg_previous_output_kw.get(g.name, 0.0))
            if on not in (0, 1):
                raise ValueError(f"previous on-status of {g.name} must be 0 or 1")
            if (on and not 0 <= p <= g.p_max_kw) or (not on and p != 0):
                raise ValueError(f"previous output of {g.name} inconsistent with its status")


@dataclass
class Forecast:
    """Per-interval exogenous inputs over one window."""

    demand_kw: np.ndarray
    buy_price: np.ndarray
    sell_price: np.ndarray
    wt_available_kw: dict[str, np.ndarray] = field(default_factory=dict)
    pv_kw: dict[str, np.ndarray] = field(default_factory=dict)
    start: datetime | None = None
    dt_hours: float = 0.25

    def __post_init__(self):
        self.demand_kw = np.asarray(self.demand_kw, dtype=float)
        self.buy_price = np.asarray(self.buy_price, dtype=float)
        self.sell_price = np.asarray(self.sell_price, dtype=float)
        self.wt_available_kw = {k: np.asarray(v, dtype=float) for k, v in self.wt_available_kw.items()}
        self.pv_kw = {k: np.asarray(v, dtype=float) for k, v in self.pv_kw.items()}
        n = len(self.demand_kw)
        series = [self.buy_price, self.sell_price, *self.wt_available_kw.values(), *self.pv_kw.values()]
        if any(len(s) != n for s in series):
            raise ValueError("forecast series must all have the same length")
        for s in (self.demand_kw, *series):
            if not np.all(np.isfinite(s)) or np.any(s < 0):
                raise ValueError("forecast values must be finite and nonnegative")

    def __len__(self) -> int:
        return len(self.demand_kw)

    def interval_start(self, t: int) -> datetime | None:
        return None if self.start is None else self.start + timedelta(hours=self.dt_hours * t)

    def window(self, t0: int, n: int) -> "Forecast":
        if t0 < 0 or t0 + n > len(self):
            raise ValueError(f"window [{t0}, {t0 + n}) outside forecast of length {len(self)}")
        sl = slice(t0, t0 + n)
        return Forecast(self.demand_kw[sl], self.buy_price[sl], self.sell_price[sl],
                        {k: v[sl] for k, v in self.wt_available_kw.items()},
                        {k: v[sl] for k, v in self.pv_kw.items()},
                        self.interval_start(t0), self.dt_hours)

    def check_against(self, config: MicrogridConfig) -> None:
        missing = [w.name for w in config.wts if w.name not in self.wt_available_kw]
        missing += [p.name for p in config.pvs if p.name not in self.pv_kw]
        if missing:
            raise ValueError(f"forecast lacks series for devices {missing}")


@dataclass
class EdIndex:
    """Column positions of every decision variable in a built problem."""

    n_intervals: int
    dg: list[dict[str, dict[str, int]]] = field(default_factory=list)
    bess: list[dict[str, dict[str, int]]] = field(default_factory=list)
    bess_slack: dict[str, dict[str, int]] = field(default_factory=dict)
    wt: list[dict[str, int]] = field(default_factory=list)
    pv: list[dict[str, int]] = field(default_factory=list)
    trade: list[dict[str, int]] = field(default_factory=list)

    def decode(self, x: np.ndarray, t: int) -> IntervalDecision:
        d = IntervalDecision()
        for name, v in self.dg[t].items():
            d.dg[name] = DgDecision(float(x[v["p"]]), int(round(x[v["u"]])), int(round(x[v["v"]])))
        for name, v in self.bess[t].items():
            s = self.bess_slack[name]
            d.bess[name] = BessDecision(
                charge_kw=float(x[v["pc"]]), discharge_kw=float(x[v["pd"]]),
                charging=int(round(x[v["uc"]])), discharging=int(round(x[v["ud"]])),
                energy_kwh=float(x[v["e"]]), soc=float(x[v["soc"]]),
                oc_slack=float(x[s["oc"]]), od_slack=float(x[s["od"]]))
        d.wt = {name: float(x[j]) for name, j in self.wt[t].items()}
        d.pv = {name: float(x[j]) for name, j in self.pv[t].items()}
        tr = self.trade[t]
        d.buy_kw, d.sell_kw = float(x[tr["buy"]]), float(x[tr["sell"]])
        d.buying, d.selling = int(round(x[tr["ub"]])), int(round(x[tr["us"]]))
        return d

    def binaries(self) -> list[int]:
        out = []
        for t in range(self.n_intervals):
            out += [v["u"] for v in self.dg[t].values()]
            out += [v[k] for v in self.bess[t].values() for k in ("uc", "ud")]
            out += [self.trade[t]["ub"], self.trade[t]["us"]]
        return out


def _build(config: MicrogridConfig, state: SystemState, forecast: Forecast, n: int) -> tuple[MilpProblem, EdIndex]:
    dt = forecast.dt_hours
    lp = LpProblem()
    ix = EdIndex(n)
    p_grid = config.tie_line.p_max_kw

    for b in config.bess:
        ix.bess_slack[b.name] = {
            # one slack pair per battery over the horizon, charged every interval
            "od": lp.add_var(f"{b.name}.od_slack", 0.0, b.soc_low, n * b.soc_penalty_cost),
            "oc": lp.add_var(f"{b.name}.oc_slack", 0.0, 1.0 - b.soc_high, n * b.soc_penalty_cost),
        }

    for t in range(n):
        tag = f"[{t}]"
        dgv: dict[str, dict[str, int]] = {}
        for g in config.dgs:
            dgv[g.name] = {
                "p": lp.add_var(f"{g.name}.p{tag}", 0.0, g.p_max_kw, g.energy_cost_per_kwh * dt),
                "u": lp.add_var(f"{g.name}.u{tag}", 0.0, 1.0, g.no_load_cost * dt),
                "v": lp.add_var(f"{g.name}.v{tag}", 0.0, 1.0, g.startup_cost),
            }
        bv: dict[str, dict[str, int]] = {}
        for b in config.bess:
            bv[b.name] = {
                "pc": lp.add_var(f"{b.name}.pc{tag}", 0.0, b.p_max_kw, b.eta_charge * b.power_cost_per_kwh * dt),
                "pd": lp.add_var(f"{b.name}.pd{tag}", 0.0, b.p_max_kw, b.power_cost_per_kwh / b.eta_discharge * dt),
                "uc": lp.add_var(f"{b.name}.uc{tag}", 0.0, 1.0),
                "ud": lp.add_var(f"{b.name}.ud{tag}", 0.0, 1.0),
                "e": lp.add_var(f"{b.name}.e{tag}", b.e_min_kwh, b.e_max_kwh),
                "soc": lp.add_var(f"{b.name}.soc{tag}", 0.0, 1.0),
            }
        wv = {w.name: lp.add_var(f"{w.name}.p{tag}", 0.0, float(forecast.wt_available_kw[w.name][t]))
              for w in config.wts}
        pvv = {}
        for p in config.pvs:
            val = float(forecast.pv_kw[p.name][t])
            pvv[p.name] = lp.add_var(f"{p.name}.p{tag}", val, val)
        tr = {
            "buy": lp.add_var(f"buy{tag}", 0.0, p_grid, float(forecast.buy_price[t]) * dt),
            "sell": lp.add_var(f"sell{tag}", 0.0, p_grid, -float(forecast.sell_price[t]) * dt),
            "ub": lp.add_var(f"ub{tag}", 0.0, 1.0),
            "us": lp.add_var(f"us{tag}", 0.0, 1.0),
        }
        ix.dg.append(dgv)
        ix.bess.append(bv)
        ix.wt.append(wv)
        ix.pv.append(pvv)
        ix.trade.append(tr)

        for g in config.dgs:
            v = dgv[g.name]
            lp.add_constraint({v["p"]: 1.0, v["u"]: -g.p_max_kw}, LE, 0.0, f"{g.name}.pmax{tag}")
            lp.add_constraint({v["p"]: 1.0, v["u"]: -g.p_min_kw}, GE, 0.0, f"{g.name}.pmin{tag}")
            ramp = dt * g.ramp_kw_per_h
            if t == 0:
                prev = float(state.dg_previous_output_kw.get(g.name, 0.0))
                lp.add_constraint({v["p"]: 1.0}, LE, prev + ramp, f"{g.name}.ramp_up{tag}")
                lp.add_constraint({v["p"]: 1.0}, GE, prev - ramp, f"{g.name}.ramp_dn{tag}")
                prev_on = float(state.dg_previous_on.get(g.name, 0))
                lp.add_constraint({v["v"]: 1.0, v["u"]: -1.0}, GE, -prev_on, f"{g.name}.start{tag}")
            else:
                w = ix.dg[t - 1][g.name]
                lp.add_constraint({v["p"]: 1.0, w["p"]: -1.0}, LE, ramp, f"{g.name}.ramp_up{tag}")
                lp.add_constraint({w["p"]: 1.0, v["p"]: -1.0}, LE, ramp, f"{g.name}.ramp_dn{tag}")
                lp.add_constraint({v["v"]: 1.0, v["u"]: -1.0, w["u"]: 1.0}, GE, 0.0, f"{g.name}.start{tag}")

        for b in config.bess:
            v = bv[b.name]
            s = ix.bess_slack[b.name]
            lp.add_constraint({v["pc"]: 1.0, v["uc"]: -b.p_max_kw}, LE, 0.0, f"{b.name}.pc_max{tag}")
            lp.add_constraint({v["pc"]: 1.0, v["uc"]: -b.p_min_kw}, GE, 0.0, f"{b.name}.pc_min{tag}")
            lp.add_constraint({v["pd"]: 1.0, v["ud"]: -b.p_max_kw}, LE, 0.0, f"{b.name}.pd_max{tag}")
            lp.add_constraint({v["pd"]: 1.0, v["ud"]: -b.p_min_kw}, GE, 0.0, f"{b.name}.pd_min{tag}")
            lp.add_constraint({v["uc"]: 1.0, v["ud"]: 1.0}, LE, 1.0, f"{b.name}.mode{tag}")
            flows = {v["e"]: 1.0, v["pc"]: -dt * b.eta_charge, v["pd"]: dt / b.eta_discharge}
            if t == 0:
                rhs = float(state.bess_energy_kwh[b.name])
            else:
                flows[ix.bess[t - 1][b.name]["e"]] = -1.0
                rhs = 0.0
            lp.add_constraint(flows, EQ, rhs, f"{b.name}.energy{tag}")
            lp.add_constraint({v["soc"]: 1.0, v["e"]: -1.0 / b.e_max_kwh}, EQ, 0.0, f"{b.name}.soc{tag}")
            lp.add_constraint({v["soc"]: 1.0, s["od"]: 1.0}, GE, b.soc_low, f"{b.name}.soc_low{tag}")
            lp.add_constraint({v["soc"]: 1.0, s["oc"]: -1.0}, LE, b.soc_high, f"{b.name}.soc_high{tag}")

        lp.add_constraint({tr["buy"]: 1.0, tr["ub"]: -p_grid}, LE, 0.0, f"buy_max{tag}")
        lp.add_constraint({tr["sell"]: 1.0, tr["us"]: -p_grid}, LE, 0.0, f"sell_max{tag}")
        lp.add_constraint({tr["ub"]: 1.0, tr["us"]: 1.0}, LE, 1.0, f"trade_mode{tag}")

        bal = {tr["buy"]: 1.0, tr["sell"]: -1.0}
        for g in config.dgs:
            bal[dgv[g.name]["p"]] = 1.0
        for j in wv.values():
            bal[j] = 1.0
        for j in pvv.values():
            bal[j] = 1.0
        for b in config.bess:
            bal[bv[b.name]["pd"]] = 1.0
            bal[bv[b.name]["pc"]] = -1.0
        lp.add_constraint(bal, EQ, float(forecast.demand_kw[t]), f"balance{tag}")

        res = {tr["buy"]: -1.0, tr["sell"]: 1.0}
        for g in config.dgs:
            res[dgv[g.name]["p"]] = -1.0
        headroom = p_grid + sum(g.p_max_kw for g in config.dgs)
        lp.add_constraint(res, GE, config.reserve.reserve_fraction * float(forecast.demand_kw[t]) - headroom,
                          f"reserve{tag}")

    milp = MilpProblem(lp, [])
    milp.binary_vars = sorted(ix.binaries())
    return milp, ix


def build_ed(config: MicrogridConfig, state: SystemState, forecast: Forecast) -> tuple[MilpProblem, EdIndex]:
    """Economic dispatch MILP over the configured horizon."""
    n = config.horizon.n_intervals
    if len(forecast) != n:
        raise ValueError(f"forecast has {len(forecast)} intervals, horizon needs {n}")
    if not math.isclose(forecast.dt_hours, config.horizon.dt_hours):
        raise ValueError("forecast interval length differs from the configured horizon")
    forecast.check_against(config)
    state.validate(config)
    return _build(config, state, forecast, n)


@dataclass
class DispatchSolution:
    intervals: list[IntervalDecision]
    total_cost: float
    costs: list[tuple[float, float, float]]  # (dg, grid, bess) per interval
    objective_value: float
    nodes_explored: int = 0
    start: datetime | None = None

    @property
    def first(self) -> IntervalDecision:
        return self.intervals[0]


def _solution_from(config: MicrogridConfig, forecast: Forecast, ix: EdIndex, sol: MilpSolution) -> DispatchSolution:
    intervals = [ix.decode(sol.x, t) for t in range(ix.n_intervals)]
    costs = [interval_costs(config, d, float(forecast.buy_price[t]), float(forecast.sell_price[t]),
                            forecast.dt_hours) for t, d in enumerate(intervals)]
    total = float(sum(sum(c) for c in costs))
    return DispatchSolution(intervals, total, costs, sol.objective_value, sol.nodes_explored, forecast.start)


def solve_ed(config: MicrogridConfig, state: SystemState, forecast: Forecast,
             options: MilpOptions | None = None) -> DispatchSolution:
    milp, ix = build_ed(config, state, forecast)
    sol = solve_milp(milp, options)
    if not sol.optimal:
        raise DispatchError(f"economic dispatch {sol.status.value}", sol.status.value, forecast.start)
    return _solution_from(config, forecast, ix, sol)


def advance_state(config: MicrogridConfig, state: SystemState, decision: IntervalDecision,
                  dt_hours: float) -> SystemState:
    energy = {}
    for b in config.bess:
        d = decision.bess[b.name]
        energy[b.name], _ = bess_step(b, state.bess_energy_kwh[b.name], d.charge_kw, d.discharge_kw, dt_hours)
    return SystemState(
        bess_energy_kwh=energy,
        dg_previous_output_kw={g.name: decision.dg[g.name].output_kw if decision.dg[g.name].on else 0.0
                               for g in config.dgs},
        dg_previous_on={g.name: decision.dg[g.name].on for g in config.dgs},
    )


def mpc_step(config: MicrogridConfig, state: SystemState, forecast_window: Forecast,
             options: MilpOptions | None = None) -> tuple[DispatchSolution, IntervalDecision, SystemState]:
    """Solve the horizon and commit only its first interval."""
    sol = solve_ed(config, state, forecast_window, options)
    committed = sol.first
    return sol, committed, advance_state(config, state, committed, forecast_window.dt_hours)


def with_horizon(config: MicrogridConfig, n_intervals: int | None = None, dt_hours: float | None = None) -> MicrogridConfig:
    h = config.horizon
    return replace(config, horizon=replace(h, n_intervals=n_intervals or h.n_intervals,
                                           dt_hours=dt_hours or h.dt_hours))


def state_from_mapping(data: Mapping) -> SystemState:
    return SystemState(
        bess_energy_kwh={k: float(v) for k, v in data.get("bess_energy_kwh", {}).items()},
        dg_previous_output_kw={k: float(v) for k, v in data.get("dg_previous_output_kw", {}).items()},
        dg_previous_on={k: int(v) for k, v in data.get("dg_previous_on", {}).items()},
    )
