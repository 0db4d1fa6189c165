"""Regenerate ``synthetic_day.csv`` from closed-form daily shapes.

Hourly rows from 2019-07-01T00:00 to 2019-07-02T00:00 (25 rows, so a
4-interval look-ahead from the last 15-minute slot stays inside the data).

    load_kw        = 700 + 350 * bump(h, 19, 3) + 200 * bump(h, 9, 2)
    buy_price      = 0.08 off-peak, 0.14 shoulder (07-17), 0.30 peak (17-21)
    wind_speed_ms  = 7 + 3 * cos(2 pi (h - 3) / 24)
    irradiance_wm2 = 900 * max(0, sin(pi (h - 6) / 12))

with ``bump(h, c, w) = exp(-((h - c) / w) ** 2)``. Values are rounded to
4 decimals so the file is stable across platforms.
"""

import csv
import math
from datetime import datetime, timedelta
from pathlib import Path


def bump(h, c, w):
    return math.exp(-(((h - c) / w) ** 2))


def price(h):
    if 17 <= h < 21:
        return 0.30
    if 7 <= h < 17:
        return 0.14
    return 0.08


def rows():
    t0 = datetime(2019, 7, 1)
    for k in range(25):
        h = k % 24
        yield [
            (t0 + timedelta(hours=k)).isoformat(),
            round(700 + 350 * bump(h, 19, 3) + 200 * bump(h, 9, 2), 4),
            price(h),
            round(7 + 3 * math.cos(2 * math.pi * (h - 3) / 24), 4),
            round(900 * max(0.0, math.sin(math.pi * (h - 6) / 12)), 4),
        ]


if __name__ == "__main__":
    out = Path(__file__).with_name("synthetic_day.csv")
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "load_kw", "buy_price", "wind_speed_ms", "irradiance_wm2"])
        w.writerows(rows())
