from dataclasses import replace

import numpy as np
import pytest

from helpers import WT_NAMES, check_interval, reference_fleet, random_fleet, random_forecast, random_state
from mgflex.dispatch import (DispatchError, Forecast, SystemState, advance_state, build_ed, mpc_step, solve_ed,
                             with_horizon)
from mgflex.model import (BessSpec, DieselGenSpec, HorizonSpec, MicrogridConfig, PvSpec, ReservePolicy,
                          TieLineSpec, bess_step, interval_costs)

DT = 0.25


def one_interval(demand, buy=0.2, sell=0.16, wt=None, pv=None):
    return Forecast([demand], [buy], [sell], wt or {}, pv or {}, None, DT)


def test_grid_only_buys_demand():
    config = MicrogridConfig(horizon=HorizonSpec(DT, 1))
    sol = solve_ed(config, SystemState(), one_interval(100.0, buy=0.2))
    d = sol.first
    assert d.buy_kw == pytest.approx(100) and d.sell_kw == pytest.approx(0)
    assert sol.total_cost == pytest.approx(100 * 0.2 * DT)
    assert sol.objective_value == pytest.approx(sol.total_cost)


def test_pure_export():
    config = MicrogridConfig(pvs=(PvSpec("pv", 1.0),), horizon=HorizonSpec(DT, 1))
    sol = solve_ed(config, SystemState(), one_interval(0.0, sell=0.16, pv={"pv": [50.0]}))
    assert sol.first.sell_kw == pytest.approx(50)
    assert sol.first.buy_kw == pytest.approx(0)
    assert sol.total_cost == pytest.approx(-50 * 0.16 * DT)


def test_reserve_slack_example():
    config = MicrogridConfig(tie_line=TieLineSpec(1000), reserve=ReservePolicy(0.1), horizon=HorizonSpec(DT, 1))
    d = solve_ed(config, SystemState(), one_interval(100.0)).first
    assert d.buy_kw == pytest.approx(100)
    slack = (1000 - d.buy_kw + d.sell_kw) + 0.0
    assert slack == pytest.approx(900)
    assert slack >= 0.1 * 100


def test_reserve_can_make_dispatch_infeasible():
    config = MicrogridConfig(tie_line=TieLineSpec(100), reserve=ReservePolicy(0.5), horizon=HorizonSpec(DT, 1))
    with pytest.raises(DispatchError):
        solve_ed(config, SystemState(), one_interval(90.0))


@pytest.mark.parametrize("prev_on, expected", [(1, 50 * 0.1 * DT + 3.4 * DT), (0, 50 * 0.1 * DT + 3.4 * DT + 5)])
def test_dg_only(prev_on, expected):
    # islanded: with no tie-line the generator must cover the load
    config = MicrogridConfig(dgs=(DieselGenSpec("dg"),), tie_line=TieLineSpec(0.0), horizon=HorizonSpec(DT, 1))
    state = SystemState({}, {"dg": 50.0 if prev_on else 0.0}, {"dg": prev_on})
    sol = solve_ed(config, state, one_interval(50.0))
    assert sol.first.buy_kw == 0 and sol.first.sell_kw == 0
    d = sol.first.dg["dg"]
    assert d.on == 1 and d.output_kw == pytest.approx(50)
    assert d.started == 1 - prev_on
    assert sol.total_cost == pytest.approx(expected)


def test_cheap_grid_keeps_dg_off():
    config = MicrogridConfig(dgs=(DieselGenSpec("dg"),), bess=(BessSpec("bess"),), horizon=HorizonSpec(DT, 1))
    state = SystemState({"bess": 250.0}, {"dg": 0.0}, {"dg": 0})
    d = solve_ed(config, state, one_interval(300.0, buy=0.02, sell=0.016)).first
    assert d.dg["dg"].on == 0 and d.dg["dg"].output_kw == 0
    assert d.buy_kw == pytest.approx(300 - d.bess["bess"].net_kw)


def scenario_a_window():
    config = reference_fleet(4, soc_penalty=1000.0)
    state = SystemState({"bess": 100.0}, {"dg": 180.0}, {"dg": 1})
    buy = np.array([0.2, 0.3, 0.3, 0.3])
    fc = Forecast([262.67, 1000, 1000, 1000], buy, 0.8 * buy, {n: [100.0] * 4 for n in WT_NAMES}, {}, None, DT)
    return config, state, fc


def test_scenario_a_first_interval():
    config, state, fc = scenario_a_window()
    d = solve_ed(config, state, fc).first
    assert d.sell_kw == pytest.approx(242.33, abs=1e-6)
    assert d.trade_kw == pytest.approx(-242.33, abs=1e-6)
    assert d.dg["dg"].output_kw == pytest.approx(180)
    assert d.bess["bess"].charge_kw == pytest.approx(75)
    assert d.bess["bess"].charging == 1
    assert sum(d.wt.values()) == pytest.approx(400)


def test_mpc_commits_first_interval():
    config, state, fc = scenario_a_window()
    full = solve_ed(config, state, fc)
    sol, committed, nxt = mpc_step(config, state, fc)
    assert committed == full.first
    assert sol.total_cost == pytest.approx(full.total_cost)
    e, _ = bess_step(config.bess[0], 100.0, committed.bess["bess"].charge_kw, committed.bess["bess"].discharge_kw, DT)
    assert nxt.bess_energy_kwh["bess"] == pytest.approx(e)
    assert nxt.dg_previous_output_kw["dg"] == pytest.approx(committed.dg["dg"].output_kw)
    assert nxt.dg_previous_on["dg"] == committed.dg["dg"].on


def test_state_threads_through_steps():
    rng = np.random.default_rng(8)
    config = reference_fleet(4)
    state = SystemState.initial(config)
    fc = random_forecast(rng, config, 8, load_hi=900)
    for t in range(5):
        _, committed, nxt = mpc_step(config, state, fc.window(t, 4))
        b = committed.bess["bess"]
        expected, _ = bess_step(config.bess[0], state.bess_energy_kwh["bess"], b.charge_kw, b.discharge_kw, DT)
        assert nxt.bess_energy_kwh["bess"] == pytest.approx(expected)
        assert b.energy_kwh == pytest.approx(expected, abs=1e-6)
        state = nxt


def test_idle_battery_keeps_energy():
    config = MicrogridConfig(bess=(BessSpec("bess"),), horizon=HorizonSpec(DT, 1))
    state = SystemState({"bess": 250.0})
    # no export revenue, so any battery flow only adds cost
    decision = solve_ed(config, state, one_interval(0.0, buy=0.1, sell=0.0)).first
    assert decision.bess["bess"].charging == 0 and decision.bess["bess"].discharging == 0
    assert advance_state(config, state, decision, DT).bess_energy_kwh["bess"] == 250.0


def test_infeasible_demand_raises():
    config = MicrogridConfig(dgs=(DieselGenSpec("dg"),), tie_line=TieLineSpec(100), horizon=HorizonSpec(DT, 1))
    state = SystemState({}, {"dg": 180.0}, {"dg": 1})
    with pytest.raises(DispatchError) as err:
        solve_ed(config, state, one_interval(500.0))
    assert err.value.status == "Infeasible"


def test_build_rejects_mismatched_inputs():
    config = reference_fleet(4)
    state = SystemState.initial(config)
    fc = random_forecast(np.random.default_rng(0), config, 3)
    with pytest.raises(ValueError):
        build_ed(config, state, fc)
    fc4 = random_forecast(np.random.default_rng(0), config, 4, dt=0.5)
    with pytest.raises(ValueError):
        build_ed(config, state, fc4)
    fc4 = random_forecast(np.random.default_rng(0), config, 4)
    fc4.wt_available_kw.pop("wt1")
    with pytest.raises(ValueError):
        build_ed(config, state, fc4)
    with pytest.raises(ValueError):
        build_ed(config, SystemState({"bess": 900.0}, {"dg": 0.0}, {"dg": 0}), random_forecast(
            np.random.default_rng(0), config, 4))


def test_forecast_validation():
    with pytest.raises(ValueError):
        Forecast([1.0, 2.0], [0.1], [0.1])
    with pytest.raises(ValueError):
        Forecast([-1.0], [0.1], [0.1])
    with pytest.raises(ValueError):
        Forecast([np.nan], [0.1], [0.1])


def test_startup_flag_follows_commitment():
    config = MicrogridConfig(dgs=(DieselGenSpec("dg"),), reserve=ReservePolicy(0.0), horizon=HorizonSpec(DT, 3))
    state = SystemState({}, {"dg": 0.0}, {"dg": 0})
    fc = Forecast([40.0] * 3, [0.05, 5.0, 5.0], [0.0] * 3, {}, {}, None, DT)
    sol = solve_ed(config, state, fc)
    on = [d.dg["dg"].on for d in sol.intervals]
    started = [d.dg["dg"].started for d in sol.intervals]
    assert on == [0, 1, 1]
    assert started == [0, 1, 0]


def random_instance(rng, n=4):
    config = random_fleet(rng, int(rng.integers(0, 3)), int(rng.integers(0, 3)), int(rng.integers(0, 3)),
                          int(rng.integers(0, 2)), n, p_grid=(300.0, 1500.0))
    return config, random_state(rng, config), random_forecast(rng, config, n)


def test_invariants_on_random_instances():
    rng = np.random.default_rng(42)
    solved = 0
    for _ in range(40):
        config, state, fc = random_instance(rng)
        try:
            sol = solve_ed(config, state, fc)
        except DispatchError:
            continue
        solved += 1
        prev = dict(state.dg_previous_output_kw)
        energy = dict(state.bess_energy_kwh)
        for t, d in enumerate(sol.intervals):
            assert check_interval(config, fc, t, d, prev) == []
            prev = {g.name: d.dg[g.name].output_kw for g in config.dgs}
            for b in config.bess:
                bd = d.bess[b.name]
                energy[b.name] += DT * (b.eta_charge * bd.charge_kw - bd.discharge_kw / b.eta_discharge)
                assert bd.energy_kwh == pytest.approx(energy[b.name], abs=1e-6)
                assert bd.soc == pytest.approx(bd.energy_kwh / b.e_max_kwh, abs=1e-9)
        # cost consistency against the closed-form device costs
        recomputed = sum(sum(interval_costs(config, d, fc.buy_price[t], fc.sell_price[t], DT))
                         for t, d in enumerate(sol.intervals))
        assert sol.total_cost == pytest.approx(recomputed, rel=1e-6, abs=1e-9)
        assert sol.objective_value == pytest.approx(sol.total_cost, rel=1e-6, abs=1e-6)
    assert solved >= 30


def test_higher_purchase_prices_never_lower_cost():
    rng = np.random.default_rng(9)
    checked = 0
    for _ in range(25):
        config, state, fc = random_instance(rng)
        try:
            base = solve_ed(config, state, fc).total_cost
        except DispatchError:
            continue
        bumped = Forecast(fc.demand_kw, fc.buy_price * rng.uniform(1.0, 1.5, len(fc)), fc.sell_price,
                          fc.wt_available_kw, fc.pv_kw, None, DT)
        assert solve_ed(config, state, bumped).total_cost >= base - 1e-6 * (1 + abs(base))
        dearer = replace(config, dgs=tuple(replace(g, energy_cost_per_kwh=g.energy_cost_per_kwh * 1.3)
                                           for g in config.dgs))
        assert solve_ed(dearer, state, fc).total_cost >= base - 1e-6 * (1 + abs(base))
        checked += 1
    assert checked >= 15


def test_with_horizon():
    config = reference_fleet(4)
    assert with_horizon(config, 8).horizon == HorizonSpec(0.25, 8)
    assert with_horizon(config, dt_hours=1.0).horizon == HorizonSpec(1.0, 4)
