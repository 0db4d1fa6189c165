"""Device parameters, per-interval decision records and closed-form device
physics and cost evaluations.

Units throughout: power kW, energy kWh, price $/kWh, duration h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Union

BETZ_LIMIT = 0.59


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


@dataclass(frozen=True)
class HorizonSpec:
    dt_hours: float = 0.25
    n_intervals: int = 4

    def __post_init__(self):
        _check(self.dt_hours > 0, "dt_hours must be positive")
        _check(self.n_intervals >= 1, "n_intervals must be >= 1")


@dataclass(frozen=True)
class DieselGenSpec:
    name: str = "dg"
    p_min_kw: float = 18.0
    p_max_kw: float = 180.0
    ramp_kw_per_h: float = 240.0
    energy_cost_per_kwh: float = 0.1
    no_load_cost: float = 3.4       # $/h while committed
    startup_cost: float = 5.0       # $ per start event

    def __post_init__(self):
        _check(0 <= self.p_min_kw <= self.p_max_kw, f"{self.name}: need 0 <= p_min <= p_max")
        _check(self.ramp_kw_per_h > 0, f"{self.name}: ramp must be positive")
        _check(min(self.energy_cost_per_kwh, self.no_load_cost, self.startup_cost) >= 0,
               f"{self.name}: costs must be nonnegative")


@dataclass(frozen=True)
class BessSpec:
    name: str = "bess"
    e_max_kwh: float = 500.0
    e_min_kwh: float = 0.0
    p_max_kw: float = 75.0
    p_min_kw: float = 20.0
    eta_charge: float = 0.9
    eta_discharge: float = 0.9
    soc_low: float = 0.2
    soc_high: float = 0.8
    power_cost_per_kwh: float = 0.01
    soc_penalty_cost: float = 10.0  # $ per unit of SOC slack

    def __post_init__(self):
        _check(0 <= self.e_min_kwh < self.e_max_kwh, f"{self.name}: need 0 <= e_min < e_max")
        _check(0 < self.p_min_kw <= self.p_max_kw, f"{self.name}: need 0 < p_min <= p_max")
        _check(0 < self.eta_charge <= 1 and 0 < self.eta_discharge <= 1,
               f"{self.name}: efficiencies must lie in (0, 1]")
        _check(0 <= self.soc_low < self.soc_high <= 1, f"{self.name}: need 0 <= soc_low < soc_high <= 1")
        _check(self.power_cost_per_kwh >= 0 and self.soc_penalty_cost >= 0,
               f"{self.name}: costs must be nonnegative")


@dataclass(frozen=True)
class WindTurbineSpec:
    name: str = "wt"
    rated_kw: float = 200.0
    rotor_area_m2: float = 320.0
    air_density_kg_m3: float = 1.225
    power_coefficient: float = 0.5

    def __post_init__(self):
        _check(self.rated_kw > 0, f"{self.name}: rated_kw must be positive")
        _check(0 < self.power_coefficient <= BETZ_LIMIT,
               f"{self.name}: power coefficient must lie in (0, {BETZ_LIMIT}]")
        _check(self.rotor_area_m2 >= 0 and self.air_density_kg_m3 > 0,
               f"{self.name}: invalid rotor area or air density")


@dataclass(frozen=True)
class PvSpec:
    name: str = "pv"
    panel_area_m2: float = 0.0
    shade_ratio: float = 1.0
    efficiency: float = 0.2
    count: int = 1  # identical installations aggregated under this entry

    def __post_init__(self):
        _check(self.panel_area_m2 >= 0, f"{self.name}: panel area must be nonnegative")
        _check(0 <= self.shade_ratio <= 1, f"{self.name}: shade ratio must lie in [0, 1]")
        _check(0 < self.efficiency <= 1, f"{self.name}: efficiency must lie in (0, 1]")
        _check(self.count >= 0, f"{self.name}: count must be nonnegative")


@dataclass(frozen=True)
class TieLineSpec:
    p_max_kw: float = 2000.0

    def __post_init__(self):
        _check(self.p_max_kw >= 0, "tie-line p_max_kw must be nonnegative")


@dataclass(frozen=True)
class ReservePolicy:
    reserve_fraction: float = 0.1

    def __post_init__(self):
        _check(0 <= self.reserve_fraction <= 1, "reserve_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class MicrogridConfig:
    """Static fleet description shared by every solve."""

    dgs: tuple[DieselGenSpec, ...] = ()
    bess: tuple[BessSpec, ...] = ()
    wts: tuple[WindTurbineSpec, ...] = ()
    pvs: tuple[PvSpec, ...] = ()
    tie_line: TieLineSpec = field(default_factory=TieLineSpec)
    reserve: ReservePolicy = field(default_factory=ReservePolicy)
    horizon: HorizonSpec = field(default_factory=HorizonSpec)

    def __post_init__(self):
        for attr in ("dgs", "bess", "wts", "pvs"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        names = [d.name for d in (*self.dgs, *self.bess, *self.wts, *self.pvs)]
        dupes = sorted({n for n in names if names.count(n) > 1})
        _check(not dupes, f"duplicate device names: {dupes}")


@dataclass
class DgDecision:
    output_kw: float = 0.0
    on: int = 0
    started: int = 0


@dataclass
class BessDecision:
    charge_kw: float = 0.0
    discharge_kw: float = 0.0
    charging: int = 0
    discharging: int = 0
    energy_kwh: float = 0.0   # energy at the end of the interval
    soc: float = 0.0
    oc_slack: float = 0.0
    od_slack: float = 0.0

    @property
    def net_kw(self) -> float:
        """Signed output, positive when discharging."""
        return self.discharge_kw - self.charge_kw


@dataclass
class IntervalDecision:
    """Setpoints and statuses for one dispatch interval, keyed by device name."""

    dg: dict[str, DgDecision] = field(default_factory=dict)
    bess: dict[str, BessDecision] = field(default_factory=dict)
    wt: dict[str, float] = field(default_factory=dict)
    pv: dict[str, float] = field(default_factory=dict)
    buy_kw: float = 0.0
    sell_kw: float = 0.0
    buying: int = 0
    selling: int = 0

    @property
    def trade_kw(self) -> float:
        """Signed tie-line exchange, positive when importing."""
        return self.buy_kw - self.sell_kw


AlphaValue = Union[float, Mapping[str, float]]


@dataclass(frozen=True)
class AlphaParams:
    """Release parameters per device class.

    Each field is either one scalar applied to every device of that class or
    a mapping from device name to value.
    """

    dg: AlphaValue = 0.0
    bess: AlphaValue = 0.0
    wt: AlphaValue = 0.0

    def __post_init__(self):
        for attr in ("dg", "bess", "wt"):
            value = getattr(self, attr)
            values = value.values() if isinstance(value, Mapping) else [value]
            for v in values:
                if not (math.isfinite(v) and v >= 0):
                    raise ValueError(f"alpha {attr} must be finite and >= 0, got {v}")
            if isinstance(value, Mapping):
                object.__setattr__(self, attr, dict(value))

    def _lookup(self, attr: str, name: str) -> float:
        value = getattr(self, attr)
        if isinstance(value, Mapping):
            return float(value.get(name, 0.0))
        return float(value)

    def for_dg(self, name: str) -> float:
        return self._lookup("dg", name)

    def for_bess(self, name: str) -> float:
        return self._lookup("bess", name)

    def for_wt(self, name: str) -> float:
        return self._lookup("wt", name)

    @classmethod
    def scalar(cls, dg: float, bess: float, wt: float) -> "AlphaParams":
        return cls(dg=float(dg), bess=float(bess), wt=float(wt))

    def is_zero(self) -> bool:
        return all(
            all(v == 0 for v in (x.values() if isinstance(x, Mapping) else [x]))
            for x in (self.dg, self.bess, self.wt)
        )


def wt_power(spec: WindTurbineSpec, wind_speed_m_s: float) -> float:
    """Aerodynamic output clipped at nameplate."""
    if wind_speed_m_s < 0:
        raise ValueError("wind speed must be nonnegative")
    p = 0.5 * spec.air_density_kg_m3 * spec.rotor_area_m2 * wind_speed_m_s ** 3 * spec.power_coefficient / 1000.0
    return min(p, spec.rated_kw)


def pv_power(spec: PvSpec, irradiance_w_m2: float) -> float:
    """Output of one installation in kW (not multiplied by ``spec.count``)."""
    if irradiance_w_m2 < 0:
        raise ValueError("irradiance must be nonnegative")
    return irradiance_w_m2 * spec.shade_ratio * spec.panel_area_m2 * spec.efficiency / 1000.0


def bess_step(spec: BessSpec, energy_kwh: float, charge_kw: float, discharge_kw: float,
              dt_hours: float) -> tuple[float, float]:
    """Advance stored energy over one interval.

    Returns ``(energy_kwh, soc)`` at the end of the interval. Charging and
    discharging in the same interval is rejected, as is any step leaving
    ``[0, e_max_kwh]``.
    """
    if charge_kw < 0 or discharge_kw < 0:
        raise ValueError("charge and discharge power must be nonnegative")
    if charge_kw > 0 and discharge_kw > 0:
        raise ValueError("cannot charge and discharge in the same interval")
    e = energy_kwh + dt_hours * (spec.eta_charge * charge_kw - discharge_kw / spec.eta_discharge)
    tol = 1e-9 * spec.e_max_kwh
    if e < -tol or e > spec.e_max_kwh + tol:
        raise ValueError(f"{spec.name}: step leaves energy {e:.6g} kWh outside [0, {spec.e_max_kwh}]")
    e = min(max(e, 0.0), spec.e_max_kwh)
    return e, e / spec.e_max_kwh


def dg_cost(spec: DieselGenSpec, output_kw: float, on: int, started: int, dt_hours: float) -> float:
    # energy and no-load terms accrue per hour, startup per event
    return (output_kw * spec.energy_cost_per_kwh + on * spec.no_load_cost) * dt_hours + started * spec.startup_cost


def trade_cost(buy_kw: float, sell_kw: float, buy_price: float, sell_price: float, dt_hours: float) -> float:
    """Tie-line cost for one interval; negative means revenue."""
    return (buy_kw * buy_price - sell_kw * sell_price) * dt_hours


def bess_cost(spec: BessSpec, charge_kw: float, discharge_kw: float, oc_slack: float, od_slack: float,
              dt_hours: float) -> float:
    # charge throughput is multiplied by eta_charge, as in the degradation proxy
    power = (discharge_kw / spec.eta_discharge + charge_kw * spec.eta_charge) * spec.power_cost_per_kwh * dt_hours
    return power + (od_slack + oc_slack) * spec.soc_penalty_cost


def interval_costs(config: MicrogridConfig, decision: IntervalDecision, buy_price: float, sell_price: float,
                   dt_hours: float) -> tuple[float, float, float]:
    """Return ``(dg, grid, bess)`` cost components of one interval."""
    c_g = sum(
        dg_cost(spec, decision.dg[spec.name].output_kw, decision.dg[spec.name].on,
                decision.dg[spec.name].started, dt_hours)
        for spec in config.dgs
    )
    c_grid = trade_cost(decision.buy_kw, decision.sell_kw, buy_price, sell_price, dt_hours)
    c_b = 0.0
    for spec in config.bess:
        b = decision.bess[spec.name]
        c_b += bess_cost(spec, b.charge_kw, b.discharge_kw, b.oc_slack, b.od_slack, dt_hours)
    return c_g, c_grid, c_b
