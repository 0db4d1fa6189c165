"""CSV time-series loading and forecast assembly.

Normative columns: ``timestamp, load_kw, buy_price`` plus the optional
``sell_price, wind_speed_ms, irradiance_wm2, pv_kw``. Timestamps are
ISO-8601 without timezone and must be strictly increasing on a uniform step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dispatch import Forecast
from .model import MicrogridConfig, pv_power, wt_power

REQUIRED = ("load_kw", "buy_price")
OPTIONAL = ("sell_price", "wind_speed_ms", "irradiance_wm2", "pv_kw")
KNOWN = REQUIRED + OPTIONAL
DEFAULT_SELL_RATIO = 0.8


class IngestError(ValueError):
    pass


class MissingColumn(IngestError):
    def __init__(self, column: str, source: str = ""):
        super().__init__(f"{source or 'table'}: missing column {column!r}")
        self.column = column


class NonUniformStep(IngestError):
    def __init__(self, row: int, source: str = ""):
        super().__init__(f"{source or 'table'}: row {row}: timestamp breaks the uniform step")
        self.row = row


class NonFiniteValue(IngestError):
    def __init__(self, row: int, column: str, raw: str, source: str = ""):
        super().__init__(f"{source or 'table'}: row {row}, column {column!r}: non-finite value {raw!r}")
        self.row = row
        self.column = column


class WindowOutOfRange(IngestError):
    pass


@dataclass
class SeriesTable:
    timestamps: list[datetime]
    columns: dict[str, np.ndarray]
    step: timedelta | None
    source: str = ""

    def __len__(self) -> int:
        return len(self.timestamps)

    def __contains__(self, column: str) -> bool:
        return column in self.columns

    @property
    def end(self) -> datetime:
        """Exclusive end of the period covered under zero-order hold."""
        return self.timestamps[-1] + (self.step or timedelta(0))

    def hold(self, column: str, start: datetime, n: int, dt_hours: float) -> np.ndarray:
        """Values at ``n`` consecutive intervals of ``dt_hours`` from ``start``.

        Each interval takes the value of the row whose period contains the
        interval start (zero-order hold from coarser data).
        """
        dt = timedelta(hours=dt_hours)
        step = self.step or dt
        if step < dt or (step % dt) != timedelta(0):
            raise IngestError(f"{self.source}: data step {step} is not a whole multiple of interval {dt}")
        t0 = self.timestamps[0]
        last = start + dt * (n - 1)
        if start < t0 or last >= t0 + step * len(self):
            raise WindowOutOfRange(
                f"{self.source}: window {start.isoformat()} + {n} x {dt_hours} h lies outside "
                f"[{t0.isoformat()}, {(t0 + step * len(self)).isoformat()})")
        idx = [(start + dt * k - t0) // step for k in range(n)]
        return self.columns[column][idx].astype(float)


def _parse_time(raw: str, row: int, source: str) -> datetime:
    try:
        return datetime.fromisoformat(raw.strip())
    except ValueError as exc:
        raise IngestError(f"{source}: row {row}: bad timestamp {raw!r}") from exc


def load_series(path: str | Path, columns: Sequence[str] = (), optional: Iterable[str] = KNOWN) -> SeriesTable:
    """Read and validate a series CSV.

    ``columns`` must be present; any of ``optional`` found in the header are
    loaded too. Row numbers in errors count the header as row 1.
    """
    path = Path(path)
    source = str(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{source}: empty file") from None
        if "timestamp" not in header:
            raise MissingColumn("timestamp", source)
        for c in columns:
            if c not in header:
                raise MissingColumn(c, source)
        wanted = list(dict.fromkeys([*columns, *(c for c in optional if c in header)]))
        pos = {c: header.index(c) for c in ["timestamp", *wanted]}
        stamps: list[datetime] = []
        values: dict[str, list[float]] = {c: [] for c in wanted}
        for rowno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise IngestError(f"{source}: row {rowno}: expected {len(header)} fields, got {len(row)}")
            stamps.append(_parse_time(row[pos["timestamp"]], rowno, source))
            for c in wanted:
                raw = row[pos[c]]
                try:
                    v = float(raw)
                except ValueError:
                    raise NonFiniteValue(rowno, c, raw, source) from None
                if not math.isfinite(v):
                    raise NonFiniteValue(rowno, c, raw, source)
                values[c].append(v)
    if not stamps:
        raise IngestError(f"{source}: no data rows")
    step = None
    if len(stamps) > 1:
        step = stamps[1] - stamps[0]
        for i in range(1, len(stamps)):
            if stamps[i] - stamps[i - 1] != step or step <= timedelta(0):
                raise NonUniformStep(i + 2, source)
    return SeriesTable(stamps, {c: np.array(v) for c, v in values.items()}, step, source)


def _find(tables: Sequence[SeriesTable], column: str) -> SeriesTable | None:
    for t in tables:
        if column in t:
            return t
    return None


def to_forecast(config: MicrogridConfig, tables: SeriesTable | Sequence[SeriesTable], start: datetime,
                n_intervals: int, dt_hours: float, sell_ratio: float = DEFAULT_SELL_RATIO) -> Forecast:
    """Assemble a :class:`Forecast` over ``n_intervals`` from ``start``."""
    if isinstance(tables, SeriesTable):
        tables = [tables]

    def series(column: str) -> np.ndarray:
        t = _find(tables, column)
        if t is None:
            raise MissingColumn(column)
        return t.hold(column, start, n_intervals, dt_hours)

    demand = series("load_kw")
    buy = series("buy_price")
    sell = series("sell_price") if _find(tables, "sell_price") else sell_ratio * buy

    wt = {}
    if config.wts:
        speed = series("wind_speed_ms")
        for w in config.wts:
            wt[w.name] = np.array([wt_power(w, v) for v in speed])

    pv = {}
    if config.pvs:
        if _find(tables, "pv_kw"):
            total = series("pv_kw")
            weights = np.array([p.count * p.panel_area_m2 * p.efficiency for p in config.pvs], dtype=float)
            if weights.sum() <= 0:
                weights = np.ones(len(config.pvs))
            weights = weights / weights.sum()
            for p, share in zip(config.pvs, weights):
                pv[p.name] = total * share
        else:
            irr = series("irradiance_wm2")
            for p in config.pvs:
                pv[p.name] = np.array([pv_power(p, v) * p.count for v in irr])

    return Forecast(demand, buy, sell, wt, pv, start, dt_hours)
