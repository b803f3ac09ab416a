"""Temporal hold-out split, accuracy metrics and permutation importance."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TypeVar

import numpy as np

from .features import FeatureMatrix
from .forest import ForestModel, derive_rng, predict

log = logging.getLogger(__name__)

R = TypeVar("R")


@dataclass(frozen=True)
class Metrics:
    r2: float
    rmse: float
    n_test: int


@dataclass(frozen=True)
class ImportanceEntry:
    feature: str
    delta_rmse: float
    per_repeat: tuple[float, ...]

    @property
    def std_error(self) -> float:
        r = len(self.per_repeat)
        return float(np.std(self.per_repeat, ddof=1) / math.sqrt(r)) if r > 1 else math.nan


def temporal_split(records: Sequence[R], train_year: int, test_year: int
                   ) -> tuple[list[R], list[R], int]:
    """Partition by calendar year of ``date_local``; returns (train, test, n_discarded)."""
    if train_year == test_year:
        raise ValueError("train_year and test_year must differ")
    train = [r for r in records if r.date_local.year == train_year]
    test = [r for r in records if r.date_local.year == test_year]
    discarded = len(records) - len(train) - len(test)
    if discarded:
        log.info("temporal split discarded %d records outside %d/%d",
                 discarded, train_year, test_year)
    if not train:
        raise ValueError(f"no records in training year {train_year}")
    if not test:
        raise ValueError(f"no records in test year {test_year}")
    return train, test, discarded


def split_matrix(fm: FeatureMatrix, train_year: int, test_year: int
                 ) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Same partition as :func:`temporal_split`, applied to matrix rows."""
    if train_year == test_year:
        raise ValueError("train_year and test_year must differ")
    years = fm.years()
    train, test = fm.take(years == train_year), fm.take(years == test_year)
    if len(train) == 0:
        raise ValueError(f"no rows in training year {train_year}")
    if len(test) == 0:
        raise ValueError(f"no rows in test year {test_year}")
    return train, test


def rmse(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    d = np.asarray(y_true, dtype=np.float64) - np.asarray(y_pred, dtype=np.float64)
    return math.sqrt(float(np.mean(d * d)))


def compute_metrics(y_true, y_pred) -> Metrics:
    y = np.asarray(y_true, dtype=np.float64)
    yhat = np.asarray(y_pred, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1:
        raise ValueError(f"length mismatch: {y.shape} vs {yhat.shape}")
    if y.size == 0:
        raise ValueError("no test rows")
    sse = float(np.sum((y - yhat) ** 2))
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0:
        log.warning("constant y_true: R^2 undefined")
        r2 = math.nan
    else:
        r2 = 1.0 - sse / sst
    return Metrics(r2=r2, rmse=math.sqrt(sse / y.size), n_test=int(y.size))


def permutation_importance(
    model: ForestModel,
    X_test: FeatureMatrix,
    y_test,
    repeats: int = 10,
    seed: int = 0,
    threads: int = 1,
) -> list[ImportanceEntry]:
    """Test-set RMSE increase after shuffling one column, averaged over repeats.

    Column j in repeat r is shuffled with the generator derived from
    (seed, j, r); entries come back ranked by mean increase.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    y = np.asarray(y_test, dtype=np.float64)
    base_X = X_test.values
    baseline = rmse(y, predict(model, X_test))
    n, p = base_X.shape

    def one(job: tuple[int, int]) -> float:
        j, r = job
        perm = derive_rng(seed, j, r).permutation(n)
        Xp = base_X.copy()
        Xp[:, j] = base_X[perm, j]
        return rmse(y, predict(model, Xp)) - baseline

    jobs = [(j, r) for j in range(p) for r in range(repeats)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            deltas = list(ex.map(one, jobs))
    else:
        deltas = [one(job) for job in jobs]

    entries = []
    for j in range(p):
        vals = tuple(deltas[j * repeats:(j + 1) * repeats])
        entries.append(ImportanceEntry(X_test.column_names[j], math.fsum(vals) / repeats, vals))
    # stable sort keeps column order among equal means
    return sorted(entries, key=lambda e: -e.delta_rmse)


def write_metrics(m: Metrics, path: str | Path) -> None:
    Path(path).write_text(f"r2 = {m.r2!r}\nrmse = {m.rmse!r}\nn_test = {m.n_test}\n")


def read_metrics(path: str | Path) -> Metrics:
    kv = dict(line.split(" = ", 1) for line in Path(path).read_text().splitlines() if " = " in line)
    return Metrics(float(kv["r2"]), float(kv["rmse"]), int(kv["n_test"]))


def write_importance(entries: Sequence[ImportanceEntry], path: str | Path) -> None:
    repeats = len(entries[0].per_repeat) if entries else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "delta_rmse", *(f"repeat_{r}" for r in range(repeats))])
        for e in entries:
            w.writerow([e.feature, repr(e.delta_rmse), *(repr(v) for v in e.per_repeat)])


def read_importance(path: str | Path) -> list[ImportanceEntry]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [ImportanceEntry(row[0], float(row[1]), tuple(float(v) for v in row[2:]))
                for row in reader if row]
