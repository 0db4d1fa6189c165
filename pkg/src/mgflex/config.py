"""Scenario configuration (single JSON document).

Schema, all keys optional unless noted::

    {
      "name": "scenario_a",
      "series": ["scenario_a.csv"],                     # required, relative to this file
      "window": {"start": "2019-07-01T15:15:00", "n_intervals": 1},   # required
      "horizon": {"dt_hours": 0.25, "n_intervals": 4},
      "sell_ratio": 0.8,
      "microgrid": {
        "dgs":  [{"name": "dg", "p_min_kw": 18, ...}],  # DieselGenSpec fields
        "bess": [{"name": "bess", "e_max_kwh": 500, ...}],
        "wts":  [{"name": "wt1", "rated_kw": 200, ...}],
        "pvs":  [{"name": "pv", "panel_area_m2": 25, "count": 400, ...}],
        "tie_line": {"p_max_kw": 2000},
        "reserve": {"reserve_fraction": 0.1}
      },
      "initial_state": {"bess_energy_kwh": {"bess": 250},
                        "dg_previous_output_kw": {"dg": 180}, "dg_previous_on": {"dg": 1}},
      "alpha": [[0, 0, 0], [0.05, 0.01, 0.05]],        # or {"dg": .., "bess": .., "wt": ..}
      "targets": {"dg": {"dg": {"target_kw": 180, "on": 1}},
                  "bess": {"bess": {"target_kw": 20, "mode": "discharging"}},
                  "wt": {"wt1": {"target_kw": 100}}, "trade_kw": 814.33},
      "output_dir": "out/scenario_a"
    }

``alpha`` rows are ``[dg, bess, wt]`` triples. ``targets`` is only used by
the ``flexband`` command; without it the targets come from one dispatch solve.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Mapping

from .dispatch import SystemState, state_from_mapping
from .flexband import BessTarget, DgTarget, TargetProfile
from .model import (AlphaParams, BessSpec, DieselGenSpec, HorizonSpec, MicrogridConfig, PvSpec, ReservePolicy,
                    TieLineSpec, WindTurbineSpec)


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    name: str
    series_paths: list[Path]
    window_start: datetime
    window_intervals: int
    microgrid: MicrogridConfig
    initial_state: SystemState
    alphas: list[AlphaParams] = field(default_factory=lambda: [AlphaParams()])
    sell_ratio: float = 0.8
    targets: TargetProfile | None = None
    output_dir: Path | None = None

    @property
    def horizon(self) -> HorizonSpec:
        return self.microgrid.horizon


def _build(cls, data: Any, where: str):
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_alpha(data: Any) -> list[AlphaParams]:
    try:
        if isinstance(data, Mapping):
            return [AlphaParams(**data)]
        if isinstance(data, list) and data and all(isinstance(r, (list, tuple)) for r in data):
            return [AlphaParams.scalar(*row) for row in data]
        if isinstance(data, list) and len(data) == 3:
            return [AlphaParams.scalar(*data)]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"alpha: {exc}") from exc
    raise ConfigError("alpha: expected a {dg, bess, wt} object or a list of [dg, bess, wt] rows")


def parse_targets(data: Mapping[str, Any]) -> TargetProfile:
    try:
        dg = {k: DgTarget(float(v["target_kw"]), int(v.get("on", 1 if v["target_kw"] > 0 else 0)),
                          int(v.get("started", 0)))
              for k, v in data.get("dg", {}).items()}
        bess = {}
        for k, v in data.get("bess", {}).items():
            mode = v.get("mode", "idle")
            if mode not in ("charging", "discharging", "idle"):
                raise ConfigError(f"targets.bess.{k}: unknown mode {mode!r}")
            net = float(v["target_kw"])
            bess[k] = BessTarget(net, int(mode == "charging"), int(mode == "discharging"))
        wt = {k: float(v["target_kw"] if isinstance(v, Mapping) else v) for k, v in data.get("wt", {}).items()}
        return TargetProfile(dg, bess, wt, float(data["trade_kw"]))
    except KeyError as exc:
        raise ConfigError(f"targets: missing {exc}") from exc


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(data, path.parent)


def config_from_dict(data: Mapping[str, Any], base_dir: Path = Path(".")) -> ScenarioConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("config must be a JSON object")
    mg = data.get("microgrid", {})
    try:
        horizon = _build(HorizonSpec, data.get("horizon", {}), "horizon")
        microgrid = MicrogridConfig(
            dgs=tuple(_build(DieselGenSpec, d, f"microgrid.dgs[{i}]") for i, d in enumerate(mg.get("dgs", []))),
            bess=tuple(_build(BessSpec, d, f"microgrid.bess[{i}]") for i, d in enumerate(mg.get("bess", []))),
            wts=tuple(_build(WindTurbineSpec, d, f"microgrid.wts[{i}]") for i, d in enumerate(mg.get("wts", []))),
            pvs=tuple(_build(PvSpec, d, f"microgrid.pvs[{i}]") for i, d in enumerate(mg.get("pvs", []))),
            tie_line=_build(TieLineSpec, mg.get("tie_line", {}), "microgrid.tie_line"),
            reserve=_build(ReservePolicy, mg.get("reserve", {}), "microgrid.reserve"),
            horizon=horizon,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    series = data.get("series")
    if isinstance(series, str):
        series = [series]
    if not series:
        raise ConfigError("series: at least one CSV path is required")
    paths = [(base_dir / p) for p in series]
    for p in paths:
        if not p.is_file():
            raise ConfigError(f"series file not found: {p}")

    window = data.get("window")
    if not isinstance(window, Mapping) or "start" not in window:
        raise ConfigError("window: expected {start, n_intervals}")
    try:
        start = datetime.fromisoformat(str(window["start"]))
    except ValueError as exc:
        raise ConfigError(f"window.start: {exc}") from exc
    n = int(window.get("n_intervals", 1))
    if n < 1:
        raise ConfigError("window.n_intervals must be >= 1")

    state_data = data.get("initial_state")
    state = state_from_mapping(state_data) if state_data else SystemState.initial(microgrid)
    for b in microgrid.bess:
        state.bess_energy_kwh.setdefault(b.name, 0.5 * b.e_max_kwh)
    for g in microgrid.dgs:
        state.dg_previous_output_kw.setdefault(g.name, 0.0)
        state.dg_previous_on.setdefault(g.name, 0)
    try:
        state.validate(microgrid)
    except ValueError as exc:
        raise ConfigError(f"initial_state: {exc}") from exc

    alphas = parse_alpha(data["alpha"]) if "alpha" in data else [AlphaParams()]
    targets = parse_targets(data["targets"]) if data.get("targets") else None
    out = data.get("output_dir")
    sell_ratio = float(data.get("sell_ratio", 0.8))
    if not 0 <= sell_ratio:
        raise ConfigError("sell_ratio must be nonnegative")
    return ScenarioConfig(
        name=str(data.get("name", "scenario")),
        series_paths=paths,
        window_start=start,
        window_intervals=n,
        microgrid=microgrid,
        initial_state=state,
        alphas=alphas,
        sell_ratio=sell_ratio,
        targets=targets,
        output_dir=(base_dir / out) if out else None,
    )
