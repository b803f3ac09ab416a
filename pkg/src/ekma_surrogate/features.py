"""Predictor matrix with sine/cosine encodings of hour, weekday and month."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Sequence

import numpy as np

from .ingest import FormatError, HourlyRecord

FEATURE_NAMES = (
    "no2", "co", "pm25", "latitude", "longitude",
    "hour_sin", "hour_cos", "dow_sin", "dow_cos", "month_sin", "month_cos",
)
POLLUTANT_COLUMNS = ("no2", "co", "pm25")
KEY_COLUMNS = ("site_key", "date_local", "hour_local")
PERIODS = (24, 7, 12)

RowKey = tuple[str, date, int]


@dataclass
class FeatureMatrix:
    """Named-column matrix; NaN marks a missing cell.

    ``target`` holds O3 in ppm (NaN where unobserved) and ``row_keys`` the
    (site, local date, local hour) of each row.
    """

    values: np.ndarray
    row_keys: list[RowKey] = field(default_factory=list)
    target: np.ndarray | None = None
    column_names: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.column_names):
            raise ValueError(f"values must be n x {len(self.column_names)}, got {self.values.shape}")
        if self.row_keys and len(self.row_keys) != len(self):
            raise ValueError("row_keys length does not match row count")
        if self.target is not None:
            self.target = np.asarray(self.target, dtype=np.float64)
            if self.target.shape != (len(self),):
                raise ValueError("target length does not match row count")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> int:
        return self.column_names.index(name)

    def take(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        return FeatureMatrix(
            self.values[idx],
            [self.row_keys[i] for i in idx] if self.row_keys else [],
            None if self.target is None else self.target[idx],
            self.column_names,
        )

    def replace(self, values: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(values, list(self.row_keys), self.target, self.column_names)

    def years(self) -> np.ndarray:
        return np.array([k[1].year for k in self.row_keys], dtype=np.int64)

    def months(self) -> np.ndarray:
        return np.array([k[1].month for k in self.row_keys], dtype=np.int64)

    def hours(self) -> np.ndarray:
        return np.array([k[2] for k in self.row_keys], dtype=np.int64)

    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)


def encode_cyclic(value: int, period: int) -> tuple[float, float]:
    if period not in PERIODS:
        raise ValueError(f"period must be one of {PERIODS}, got {period}")
    if not 0 <= value < period:
        raise ValueError(f"value {value} outside [0, {period})")
    angle = 2.0 * math.pi * value / period
    return math.sin(angle), math.cos(angle)


def _encoding_table(period: int) -> np.ndarray:
    return np.array([encode_cyclic(v, period) for v in range(period)])


def build_features(records: Sequence[HourlyRecord]) -> FeatureMatrix:
    """One row per record in input order; weekday Monday=0, January=0."""
    if not records:
        raise ValueError("no records to build features from")
    hour_tab, dow_tab, month_tab = (_encoding_table(p) for p in PERIODS)
    nan = math.nan
    n = len(records)
    values = np.empty((n, len(FEATURE_NAMES)))
    target = np.empty(n)
    keys = []
    for i, r in enumerate(records):
        values[i, 0] = nan if r.no2 is None else r.no2
        values[i, 1] = nan if r.co is None else r.co
        values[i, 2] = nan if r.pm25 is None else r.pm25
        values[i, 3] = r.latitude
        values[i, 4] = r.longitude
        values[i, 5:7] = hour_tab[r.hour_local]
        values[i, 7:9] = dow_tab[r.date_local.weekday()]
        values[i, 9:11] = month_tab[r.date_local.month - 1]
        target[i] = nan if r.o3 is None else r.o3
        keys.append(r.key)
    return FeatureMatrix(values, keys, target)


def write_features(fm: FeatureMatrix, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(KEY_COLUMNS + fm.column_names + ("o3",))
        target = fm.target if fm.target is not None else np.full(len(fm), np.nan)
        for key, row, y in zip(fm.row_keys, fm.values, target):
            cells = ["" if math.isnan(v) else repr(float(v)) for v in row]
            w.writerow([key[0], key[1].isoformat(), key[2], *cells,
                        "" if math.isnan(y) else repr(float(y))])


def read_features(path: str | Path) -> FeatureMatrix:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        expected = KEY_COLUMNS + FEATURE_NAMES + ("o3",)
        if header != expected:
            raise FormatError(f"{path}: expected header {','.join(expected)}")
        keys, rows, target = [], [], []
        for row in reader:
            if not row:
                continue
            keys.append((row[0], date.fromisoformat(row[1]), int(row[2])))
            rows.append([float(c) if c else math.nan for c in row[3:-1]])
            target.append(float(row[-1]) if row[-1] else math.nan)
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(FEATURE_NAMES))
    return FeatureMatrix(values, keys, np.array(target, dtype=np.float64))
