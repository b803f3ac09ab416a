"""Descriptive O3 aggregations over raw (never imputed) hourly records."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .ingest import HourlyRecord

SEASONS = {12: "DJF", 1: "DJF", 2: "DJF", 3: "MAM", 4: "MAM", 5: "MAM",
           6: "JJA", 7: "JJA", 8: "JJA", 9: "SON", 10: "SON", 11: "SON"}
SEASON_ORDER = ("DJF", "MAM", "JJA", "SON")


class ClimatologyError(ValueError):
    pass


@dataclass(frozen=True)
class CyclePoint:
    bin: int
    mean: float
    q25: float
    q75: float
    n: int


def quantile(sorted_values: Sequence[float], q: float) -> float:
    """Linear-interpolation quantile: h = (n-1)q between neighbouring order statistics."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("quantile of empty sequence")
    h = (n - 1) * q
    lo = math.floor(h)
    hi = math.ceil(h)
    return sorted_values[lo] + (h - lo) * (sorted_values[hi] - sorted_values[lo])


def _cycle_point(bin_: int, values: list[float]) -> CyclePoint:
    v = sorted(values)
    return CyclePoint(bin_, math.fsum(v) / len(v), quantile(v, 0.25), quantile(v, 0.75), len(v))


def _o3(records: Iterable[HourlyRecord]) -> list[HourlyRecord]:
    return [r for r in records if r.o3 is not None]


def monthly_mean_series(records: Iterable[HourlyRecord]) -> list[tuple[int, int, float, int]]:
    groups: dict[tuple[int, int], list[float]] = defaultdict(list)
    for r in _o3(records):
        groups[(r.date_local.year, r.date_local.month)].append(r.o3)
    if not groups:
        raise ClimatologyError("no O3 observations")
    return [(y, m, math.fsum(v) / len(v), len(v)) for (y, m), v in sorted(groups.items())]


def monthly_climatology(records: Iterable[HourlyRecord]) -> list[CyclePoint]:
    groups: dict[int, list[float]] = defaultdict(list)
    for r in _o3(records):
        groups[r.date_local.month].append(r.o3)
    empty = [m for m in range(1, 13) if m not in groups]
    if empty:
        raise ClimatologyError(f"no O3 observations in month(s) {empty}")
    return [_cycle_point(m, groups[m]) for m in range(1, 13)]


def diurnal_cycle_by_season(records: Iterable[HourlyRecord]) -> dict[str, list[CyclePoint]]:
    """Season -> hourly points; (season, hour) cells without data are left out."""
    groups: dict[tuple[str, int], list[float]] = defaultdict(list)
    for r in _o3(records):
        groups[(SEASONS[r.date_local.month], r.hour_local)].append(r.o3)
    out: dict[str, list[CyclePoint]] = {}
    for season in SEASON_ORDER:
        points = [_cycle_point(h, groups[(season, h)]) for h in range(24) if (season, h) in groups]
        if points:
            out[season] = points
    return out


def weekday_weekend_cycle(records: Iterable[HourlyRecord]
                          ) -> tuple[list[float | None], list[float | None]]:
    """Hourly mean O3 for weekdays and for Saturday/Sunday (None where empty)."""
    sums = {False: [[] for _ in range(24)], True: [[] for _ in range(24)]}
    for r in _o3(records):
        sums[r.date_local.weekday() >= 5][r.hour_local].append(r.o3)

    def means(cells):
        return [math.fsum(c) / len(c) if c else None for c in cells]

    return means(sums[False]), means(sums[True])


def _w(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])


def write_all(records: Sequence[HourlyRecord], out_dir: str | Path) -> dict[str, Path]:
    """Write the four tidy CSVs; returns their paths keyed by table name."""
    out_dir = Path(out_dir)
    paths = {
        "monthly_mean": out_dir / "o3_monthly_mean.csv",
        "monthly_climatology": out_dir / "o3_monthly_climatology.csv",
        "diurnal_by_season": out_dir / "o3_diurnal_by_season.csv",
        "weekday_weekend": out_dir / "o3_weekday_weekend.csv",
    }
    _w(paths["monthly_mean"], ["year", "month", "mean_o3_ppm", "n"], monthly_mean_series(records))
    _w(paths["monthly_climatology"], ["month", "mean_o3_ppm", "q25_ppm", "q75_ppm", "n"],
       [(p.bin, p.mean, p.q25, p.q75, p.n) for p in monthly_climatology(records)])
    _w(paths["diurnal_by_season"], ["season", "hour", "mean_o3_ppm", "q25_ppm", "q75_ppm", "n"],
       [(s, p.bin, p.mean, p.q25, p.q75, p.n)
        for s, pts in diurnal_cycle_by_season(records).items() for p in pts])
    wd, we = weekday_weekend_cycle(records)
    _w(paths["weekday_weekend"], ["hour", "weekday_mean_o3_ppm", "weekend_mean_o3_ppm"],
       [(h, wd[h], we[h]) for h in range(24)])
    return paths
