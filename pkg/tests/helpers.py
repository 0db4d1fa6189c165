"""Shared fleets, scenario fixtures and reference values."""

from __future__ import annotations

from datetime import datetime

import numpy as np

from mgflex.dispatch import DispatchError, Forecast, SystemState, build_ed, solve_ed
from mgflex.flexband import BessTarget, DgTarget, TargetProfile
from mgflex.lp import EQ, GE, INF, LE, LpProblem
from mgflex.model import (AlphaParams, BessSpec, DieselGenSpec, HorizonSpec, MicrogridConfig, PvSpec,
                          ReservePolicy, TieLineSpec, WindTurbineSpec)

# (alpha_dg, alpha_bess, alpha_wt) rows 0..10
ALPHA_ROWS = [
    (0.0, 0.0, 0.0),
    (0.05, 0.01, 0.05),
    (0.05, 0.02, 0.05),
    (0.05, 0.02, 0.08),
    (0.08, 0.02, 0.08),
    (0.08, 0.05, 0.1),
    (0.1, 0.05, 0.1),
    (0.1, 0.08, 0.1),
    (0.12, 0.08, 0.1),
    (0.15, 0.08, 0.1),
    (0.15, 0.1, 0.1),
]

# reference power ranges (lower, upper), trade sign positive = import
RANGES_A = [
    (-242.33, -242.33),
    (-247.33, -193.33),
    (-252.33, -193.33),
    (-252.33, -169.33),
    (-252.33, -163.93),
    (-267.33, -147.93),
    (-267.33, -144.33),
    (-282.33, -144.33),
    (-282.33, -140.73),
    (-282.33, -135.33),
    (-292.33, -135.33),
]
RANGES_B = [
    (814.33, 814.33),
    (809.33, 863.33),
    (804.33, 863.33),
    (804.33, 887.33),
    (804.33, 892.73),
    (789.33, 908.73),
    (789.33, 912.33),
    (774.33, 912.33),
    (774.33, 915.93),
    (774.33, 921.33),
    (764.33, 921.33),
]
RANGE_SIZES = [54, 59, 83, 88.4, 119.4, 123, 138, 141.6, 147, 157]

# (power range size, cost range size, range efficiency) for tests 1..10
EFFICIENCY_A = [
    (54, 1.19, 45.37815),
    (59, 1.345, 43.86617),
    (83, 1.965, 42.23919),
    (88.4, 1.971, 44.85033),
    (119.4, 2.845, 41.96837),
    (123, 2.851, 43.14276),
    (138, 3.311, 41.67925),
    (141.6, 3.314, 42.72782),
    (147, 3.318, 44.3038),
    (157, 3.625, 43.31),
]
EFFICIENCY_B = [
    (54, 1.37, 39.41606),
    (59, 1.49, 39.59732),
    (83, 2.21, 37.55656),
    (88.4, 2.24, 39.46429),
    (119.4, 3.1, 38.51613),
    (123, 3.12, 39.42308),
    (138, 3.49, 39.54155),
    (141.6, 3.51, 40.34188),
    (147, 3.53, 41.64306),
    (157, 3.78, 41.53439),
]

WT_NAMES = ("wt1", "wt2", "wt3", "wt4")


def alpha(row: int) -> AlphaParams:
    return AlphaParams.scalar(*ALPHA_ROWS[row])


def reference_fleet(n_intervals: int = 1, soc_penalty: float = 10.0) -> MicrogridConfig:
    """180 kW DG, four 200 kW turbines, 500 kWh battery, 2 MW tie-line."""
    return MicrogridConfig(
        dgs=(DieselGenSpec("dg"),),
        bess=(BessSpec("bess", soc_penalty_cost=soc_penalty),),
        # 1.25 kg/m3 makes 10 m/s give exactly 100 kW per turbine
        wts=tuple(WindTurbineSpec(n, 200.0, 320.0, 1.25, 0.5) for n in WT_NAMES),
        tie_line=TieLineSpec(2000.0),
        reserve=ReservePolicy(0.1),
        horizon=HorizonSpec(0.25, n_intervals),
    )


def single_interval(load: float, price: float = 0.14, wt_kw: float = 100.0,
                    start: datetime | None = None) -> Forecast:
    return Forecast([load], [price], [0.8 * price], {n: [wt_kw] for n in WT_NAMES}, {}, start, 0.25)


def scenario_a():
    """Selling interval: DG at max, battery charging at max power."""
    config = reference_fleet()
    state = SystemState({"bess": 250.0}, {"dg": 180.0}, {"dg": 1})
    fc = single_interval(262.67, start=datetime(2019, 7, 1, 15, 15))
    targets = TargetProfile({"dg": DgTarget(180.0, 1)}, {"bess": BessTarget(-75.0, 1, 0)},
                            {n: 100.0 for n in WT_NAMES}, -242.33)
    return config, state, fc, targets


def scenario_b():
    """Buying interval: DG at max, battery discharging at its minimum power."""
    config = reference_fleet()
    state = SystemState({"bess": 250.0}, {"dg": 180.0}, {"dg": 1})
    fc = single_interval(1414.33, start=datetime(2019, 7, 1, 19, 45))
    targets = TargetProfile({"dg": DgTarget(180.0, 1)}, {"bess": BessTarget(20.0, 0, 1)},
                            {n: 100.0 for n in WT_NAMES}, 814.33)
    return config, state, fc, targets


def check_interval(config: MicrogridConfig, fc: Forecast, t: int, decision, prev_output: dict[str, float],
                   tol: float = 1e-5) -> list[str]:
    """Physical invariants of one committed interval; returns the violations found."""
    bad = []
    dt = fc.dt_hours
    supply = decision.buy_kw + sum(d.output_kw for d in decision.dg.values()) + sum(decision.wt.values()) \
        + sum(decision.pv.values()) + sum(b.discharge_kw for b in decision.bess.values())
    use = decision.sell_kw + float(fc.demand_kw[t]) + sum(b.charge_kw for b in decision.bess.values())
    if abs(supply - use) > tol:
        bad.append(f"balance off by {supply - use}")
    if decision.buying + decision.selling > 1:
        bad.append("buy and sell together")
    if decision.buy_kw > tol and decision.sell_kw > tol:
        bad.append("nonzero buy and sell")
    for name, b in decision.bess.items():
        if b.charging + b.discharging > 1 or (b.charge_kw > tol and b.discharge_kw > tol):
            bad.append(f"{name} charges and discharges")
        if not -tol <= b.soc <= 1 + tol:
            bad.append(f"{name} soc {b.soc}")
    for g in config.dgs:
        d = decision.dg[g.name]
        if abs(d.output_kw - prev_output[g.name]) > dt * g.ramp_kw_per_h + tol:
            bad.append(f"{g.name} ramp {prev_output[g.name]} -> {d.output_kw}")
        if d.on and not g.p_min_kw - tol <= d.output_kw <= g.p_max_kw + tol:
            bad.append(f"{g.name} output {d.output_kw} outside limits")
        if not d.on and abs(d.output_kw) > tol:
            bad.append(f"{g.name} produces while off")
    headroom = config.tie_line.p_max_kw - decision.buy_kw + decision.sell_kw \
        + sum(g.p_max_kw - decision.dg[g.name].output_kw for g in config.dgs)
    if headroom < config.reserve.reserve_fraction * float(fc.demand_kw[t]) - tol:
        bad.append(f"reserve short: {headroom}")
    if max(decision.buy_kw, decision.sell_kw) > config.tie_line.p_max_kw + tol:
        bad.append("tie-line limit exceeded")
    return bad


def random_forecast(rng: np.random.Generator, config: MicrogridConfig, n: int, load_hi: float = 600.0,
                    dt: float = 0.25) -> Forecast:
    buy = rng.uniform(0.03, 0.35, n)
    return Forecast(
        rng.uniform(0.0, load_hi, n), buy, buy * rng.uniform(0.5, 0.95, n),
        {w.name: rng.uniform(0.0, w.rated_kw, n) for w in config.wts},
        {p.name: rng.uniform(0.0, 80.0, n) for p in config.pvs},
        None, dt,
    )


def random_fleet(rng: np.random.Generator, n_dg: int, n_bess: int, n_wt: int, n_pv: int, n_intervals: int,
                 p_grid: tuple[float, float] = (100.0, 800.0)) -> MicrogridConfig:
    dgs = tuple(DieselGenSpec(
        f"g{i}", p_min_kw=float(rng.uniform(0, 40)), p_max_kw=float(rng.uniform(60, 250)),
        ramp_kw_per_h=float(rng.uniform(50, 600)), energy_cost_per_kwh=float(rng.uniform(0.05, 0.3)),
        no_load_cost=float(rng.uniform(0, 8)), startup_cost=float(rng.uniform(0, 10))) for i in range(n_dg))
    bess = tuple(BessSpec(
        f"b{i}", e_max_kwh=float(rng.uniform(100, 600)), p_min_kw=float(rng.uniform(1, 20)),
        p_max_kw=float(rng.uniform(30, 100)), eta_charge=float(rng.uniform(0.8, 1)),
        eta_discharge=float(rng.uniform(0.8, 1)), soc_penalty_cost=float(rng.uniform(0, 20))) for i in range(n_bess))
    wts = tuple(WindTurbineSpec(f"w{i}", float(rng.uniform(50, 250))) for i in range(n_wt))
    pvs = tuple(PvSpec(f"p{i}", 10.0) for i in range(n_pv))
    return MicrogridConfig(dgs, bess, wts, pvs, TieLineSpec(float(rng.uniform(*p_grid))),
                           ReservePolicy(float(rng.uniform(0, 0.3))), HorizonSpec(0.25, n_intervals))


def random_state(rng: np.random.Generator, config: MicrogridConfig) -> SystemState:
    state = SystemState({b.name: float(rng.uniform(0, b.e_max_kwh)) for b in config.bess}, {}, {})
    for g in config.dgs:
        on = int(rng.integers(0, 2))
        state.dg_previous_on[g.name] = on
        state.dg_previous_output_kw[g.name] = float(rng.uniform(g.p_min_kw, g.p_max_kw)) if on else 0.0
    return state


def random_ed(rng: np.random.Generator):
    """Small ED instance with at most 12 binaries: (milp, index, config, state, forecast)."""
    n = int(rng.integers(1, 3))
    n_dg = int(rng.integers(0, 3))
    n_bess = int(rng.integers(0, 3))
    if n == 2:
        n_bess = min(n_bess, 1)
    config = random_fleet(rng, n_dg, n_bess, int(rng.integers(0, 2)), int(rng.integers(0, 2)), n)
    state = random_state(rng, config)
    fc = random_forecast(rng, config, n)
    milp, ix = build_ed(config, state, fc)
    return milp, ix, config, state, fc


def random_lp(rng: np.random.Generator, max_vars: int = 6, max_rows: int = 6, integer: bool = False,
              finite: bool = True) -> LpProblem:
    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(1, max_rows + 1))
    p = LpProblem()
    draw = (lambda lo, hi, size=None: rng.integers(lo, hi + 1, size).astype(float)) if integer else rng.uniform
    for j in range(n):
        lo = float(draw(-5, 2))
        hi = lo + float(draw(0, 8))
        if not finite:
            kind = rng.integers(0, 4)
            lo, hi = [(lo, hi), (-INF, hi), (lo, INF), (-INF, INF)][kind]
        p.add_var(f"x{j}", lo, hi, float(draw(-4, 4)))
    anchor = None
    if rng.random() < 0.7:
        lo = np.where(np.isfinite(p.lower), p.lower, -3.0)
        hi = np.where(np.isfinite(p.upper), p.upper, lo + 6.0)
        anchor = np.round(lo + (hi - lo) * rng.random(n)) if integer else lo + (hi - lo) * rng.random(n)
        anchor = np.clip(anchor, lo, hi)
    n_eq = 0
    for i in range(m):
        sense = [LE, GE, EQ][int(rng.integers(0, 3))]
        if sense == EQ:
            if n_eq >= n - 1 and n > 1 or n == 1:
                sense = LE
            else:
                n_eq += 1
        row = draw(-3, 3, n)
        row[rng.random(n) < 0.25] = 0.0
        if anchor is not None:
            # keep the anchor point feasible so most instances have an optimum
            lhs = float(row @ anchor)
            slack = float(draw(0, 4))
            rhs = lhs + slack if sense == LE else lhs - slack if sense == GE else lhs
        else:
            rhs = float(draw(-6, 10))
        p.add_constraint(row, sense, rhs, f"r{i}")
    return p


def random_flex_instance(rng: np.random.Generator):
    """One-interval instance with release bands of at most about 0.6 kW per device."""
    while True:
        config = random_fleet(rng, int(rng.integers(0, 2)), int(rng.integers(0, 2)), int(rng.integers(0, 2)),
                              int(rng.integers(0, 2)), 1, p_grid=(150.0, 700.0))
        state = random_state(rng, config)
        fc = random_forecast(rng, config, 1, load_hi=500.0)
        try:
            sol = solve_ed(config, state, fc)
        except DispatchError:
            continue
        a = AlphaParams(
            {g.name: float(rng.uniform(0, 0.6 / g.p_max_kw)) for g in config.dgs},
            {b.name: float(rng.uniform(0, 0.6 / b.e_max_kwh)) for b in config.bess},
            {w.name: float(rng.uniform(0, 0.6 / w.rated_kw)) for w in config.wts},
        )
        return config, state, fc, TargetProfile.from_dispatch(sol), a
