"""Line charts of the O3 climatology tables, written as reproducible SVG files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .climatology import (  # noqa: E402
    SEASON_ORDER, diurnal_cycle_by_season, monthly_climatology, monthly_mean_series,
    weekday_weekend_cycle,
)
from .ingest import HourlyRecord  # noqa: E402

_STYLE = {
    "svg.hashsalt": "ekma-surrogate",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (7.0, 4.0),
}
_SEASON_COLOURS = {"DJF": "#3b528b", "MAM": "#5ec962", "JJA": "#d95f02", "SON": "#7570b3"}
_MONTHS = "JFMAMJJASOND"


def _save(fig, dest: Path) -> Path:
    # no creation date, so identical data give identical bytes
    fig.savefig(dest, format="svg", metadata={"Date": None})
    plt.close(fig)
    return dest


def plot_monthly_mean(records: Sequence[HourlyRecord], dest: str | Path) -> Path:
    series = monthly_mean_series(records)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        x = list(range(len(series)))
        ax.plot(x, [s[2] for s in series], marker="o", color="#21918c")
        step = max(1, len(series) // 12)
        ax.set_xticks(x[::step], [f"{y}-{m:02d}" for y, m, *_ in series][::step], rotation=45)
        ax.set_ylabel("Mean O3 (ppm)")
        ax.set_title("Monthly mean ozone")
        fig.tight_layout()
        return _save(fig, Path(dest))


def plot_monthly_climatology(records: Sequence[HourlyRecord], dest: str | Path) -> Path:
    pts = monthly_climatology(records)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        months = [p.bin for p in pts]
        ax.fill_between(months, [p.q25 for p in pts], [p.q75 for p in pts],
                        color="#21918c", alpha=0.25, linewidth=0, label="IQR")
        ax.plot(months, [p.mean for p in pts], marker="o", color="#21918c", label="mean")
        ax.set_xticks(months, list(_MONTHS))
        ax.set_ylabel("O3 (ppm)")
        ax.set_title("Monthly ozone climatology")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, Path(dest))


def plot_diurnal_by_season(records: Sequence[HourlyRecord], dest: str | Path) -> Path:
    cycles = diurnal_cycle_by_season(records)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for season in SEASON_ORDER:
            pts = cycles.get(season)
            if not pts:
                continue
            ax.plot([p.bin for p in pts], [p.mean for p in pts], label=season,
                    color=_SEASON_COLOURS[season])
        ax.set_xticks(range(0, 24, 3))
        ax.set_xlabel("Local hour")
        ax.set_ylabel("Mean O3 (ppm)")
        ax.set_title("Diurnal ozone cycle by season")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, Path(dest))


def plot_weekday_weekend(records: Sequence[HourlyRecord], dest: str | Path) -> Path:
    wd, we = weekday_weekend_cycle(records)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for label, cycle, colour in (("Weekday", wd, "#3b528b"), ("Weekend", we, "#d95f02")):
            hours = [h for h in range(24) if cycle[h] is not None]
            ax.plot(hours, [cycle[h] for h in hours], marker="o", markersize=3,
                    label=label, color=colour)
        ax.set_xticks(range(0, 24, 3))
        ax.set_xlabel("Local hour")
        ax.set_ylabel("Mean O3 (ppm)")
        ax.set_title("Weekday and weekend ozone")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, Path(dest))


def plot_climatology(records: Sequence[HourlyRecord], out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    return [
        plot_monthly_mean(records, out_dir / "o3_monthly_mean.svg"),
        plot_monthly_climatology(records, out_dir / "o3_monthly_climatology.svg"),
        plot_diurnal_by_season(records, out_dir / "o3_diurnal_by_season.svg"),
        plot_weekday_weekend(records, out_dir / "o3_weekday_weekend.svg"),
    ]
