"""Figures written next to the ``report`` CSV."""

from __future__ import annotations

from datetime import datetime
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

FIG_DPI = 120


def _finish(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_range_report(rows: Sequence[dict], path: str | Path, title: str = "Range analysis") -> Path:
    """Power-range size, cost-range size and range efficiency per test.

    ``rows`` carry the keys written to the report CSV.
    """
    path = Path(path)
    tests = [str(r["test"]) for r in rows]
    power = [r["power_range_size"] for r in rows]
    cost = [r["cost_range_size"] for r in rows]
    eff = [r["range_efficiency"] if r["range_efficiency"] is not None else float("nan") for r in rows]
    x = range(len(rows))

    fig, (ax1, ax3) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    w = 0.4
    ax1.bar([i - w / 2 for i in x], power, width=w, color="tab:blue", label="power range (kW)")
    ax1.set_ylabel("power range size (kW)")
    ax2 = ax1.twinx()
    ax2.bar([i + w / 2 for i in x], cost, width=w, color="tab:orange", label="cost range ($)")
    ax2.set_ylabel("cost range size ($)")
    handles = ax1.get_legend_handles_labels()[0] + ax2.get_legend_handles_labels()[0]
    ax1.legend(handles, [h.get_label() for h in handles], loc="upper left", fontsize=8)
    ax1.set_title(title)

    ax3.plot(list(x), eff, marker="o", color="tab:green")
    ax3.set_ylabel("range efficiency (kW/$)")
    ax3.set_xlabel("test")
    ax3.set_xticks(list(x))
    ax3.set_xticklabels(tests)
    ax3.grid(alpha=0.3)
    return _finish(fig, path)


def plot_trading_band(starts: Sequence[datetime], target: Sequence[float], lower: Sequence[float],
                      upper: Sequence[float], path: str | Path) -> Path:
    """Target trading power with its acceptable band over time."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.fill_between(starts, lower, upper, step="post", alpha=0.3, color="tab:blue", label="acceptable range")
    ax.step(starts, target, where="post", color="tab:blue", label="target")
    ax.axhline(0.0, color="0.5", lw=0.8)
    ax.set_ylabel("trade (kW, + import)")
    ax.legend(fontsize=8)
    fig.autofmt_xdate()
    return _finish(fig, path)
