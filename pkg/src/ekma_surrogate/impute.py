"""Training-statistics standardization and k-nearest-neighbour gap filling.

Leakage contract: the training matrix is imputed against itself using only
originally observed donor values, then frozen; test rows are imputed against
that frozen pool with the training statistics.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import FeatureMatrix

log = logging.getLogger(__name__)

STATS_FORMAT = "ekma-standardization/1"


class ImputationError(ValueError):
    pass


@dataclass(frozen=True)
class StandardizationStats:
    feature_names: tuple[str, ...]
    means: np.ndarray
    stds: np.ndarray  # zero spreads already replaced by 1

    def __post_init__(self):
        if not (len(self.feature_names) == len(self.means) == len(self.stds)):
            raise ValueError("feature_names, means and stds must have equal length")


def compute_standardization(train: FeatureMatrix) -> StandardizationStats:
    if len(train) < 2:
        raise ImputationError("need at least 2 training rows to standardize")
    v = train.values
    observed = ~np.isnan(v)
    counts = observed.sum(axis=0)
    empty = [train.column_names[j] for j in np.flatnonzero(counts == 0)]
    if empty:
        raise ImputationError(f"no observed values in column(s): {', '.join(empty)}")
    means = np.nanmean(v, axis=0)
    stds = np.nanstd(v, axis=0)  # population (ddof=0)
    stds = np.where(stds == 0, 1.0, stds)
    return StandardizationStats(tuple(train.column_names), means, stds)


def _check_columns(m: FeatureMatrix, stats: StandardizationStats) -> None:
    if tuple(m.column_names) != tuple(stats.feature_names):
        raise ImputationError(
            f"column mismatch: matrix has {m.column_names}, stats cover {stats.feature_names}")


def standardize(m: FeatureMatrix, stats: StandardizationStats) -> FeatureMatrix:
    _check_columns(m, stats)
    return m.replace((m.values - stats.means) / stats.stds)


def knn_impute(
    target: FeatureMatrix,
    pool: FeatureMatrix,
    stats: StandardizationStats,
    k: int = 5,
    *,
    self_pool: bool = False,
    threads: int = 1,
) -> FeatureMatrix:
    """Fill missing cells of ``target`` with the unweighted mean of ``k`` donors.

    Both matrices are given in raw units; distances are computed on their
    standardized versions.  The distance between a query and a donor runs over
    the coordinates observed in both, scaled by sqrt(p / m) for m shared
    coordinates.  Donors for coordinate j are restricted to pool rows that
    observe j; the k nearest are taken with ties going to the lower pool
    index.  With ``self_pool`` the target *is* the pool and a row never
    donates to itself.  Observed cells are returned untouched.
    """
    _check_columns(target, stats)
    _check_columns(pool, stats)
    if k < 1:
        raise ImputationError("k must be >= 1")
    if self_pool and len(target) != len(pool):
        raise ImputationError("self_pool requires target and pool to be the same matrix")
    if k > len(pool) - (1 if self_pool else 0):
        raise ImputationError(f"k={k} exceeds the donor pool size {len(pool)}")

    out = target.values.copy()
    miss = np.isnan(out)
    rows = np.flatnonzero(miss.any(axis=1))
    if rows.size == 0:
        return target.replace(out)
    empty = rows[miss[rows].all(axis=1)]
    if empty.size:
        raise ImputationError(f"row {int(empty[0])} has no observed features")

    zt = (target.values - stats.means) / stats.stds
    zp = (pool.values - stats.means) / stats.stds
    pool_obs = ~np.isnan(zp)
    zp0 = np.where(pool_obs, zp, 0.0)
    pool_raw = pool.values
    p = target.n_features

    def fill(chunk: np.ndarray) -> list[tuple[int, int, float]]:
        filled = []
        for i in chunk:
            t_obs = ~miss[i]
            both = pool_obs & t_obs
            m = both.sum(axis=1)
            diff = np.where(both, zp0 - np.where(t_obs, zt[i], 0.0), 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                dist = np.sqrt(p / m * np.einsum("ij,ij->i", diff, diff))
            dist[m == 0] = np.inf
            if self_pool:
                dist[i] = np.inf
            order = np.argsort(dist, kind="stable")
            order = order[np.isfinite(dist[order])]
            for j in np.flatnonzero(miss[i]):
                donors = order[pool_obs[order, j]][:k]
                if donors.size == 0:
                    raise ImputationError(f"row {int(i)}: no donor observes column "
                                          f"{target.column_names[j]!r}")
                if donors.size < k:
                    log.warning("row %d column %s: only %d donors available",
                                i, target.column_names[j], donors.size)
                # fixed summation order (ascending pool index) keeps fills bit-stable
                vals = pool_raw[np.sort(donors), j]
                acc = 0.0
                for v in vals:
                    acc += v
                filled.append((int(i), int(j), acc / donors.size))
        return filled

    chunks = np.array_split(rows, max(1, min(threads, rows.size)))
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(fill, chunks))
    else:
        results = [fill(c) for c in chunks]
    for part in results:
        for i, j, v in part:
            out[i, j] = v
    return target.replace(out)


def impute_split(
    train: FeatureMatrix, test: FeatureMatrix, k: int = 5, threads: int = 1
) -> tuple[FeatureMatrix, FeatureMatrix, StandardizationStats]:
    """Standardize on ``train``, self-impute it, then impute ``test`` against the frozen pool."""
    stats = compute_standardization(train)
    train_done = knn_impute(train, train, stats, k, self_pool=True, threads=threads)
    test_done = knn_impute(test, train_done, stats, k, threads=threads)
    return train_done, test_done, stats


def write_stats(stats: StandardizationStats, path: str | Path) -> None:
    lines = [f"format = {STATS_FORMAT}", "# feature = mean std"]
    lines += [f"{name} = {float(mu)!r} {float(s)!r}"
              for name, mu, s in zip(stats.feature_names, stats.means, stats.stds)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_stats(path: str | Path) -> StandardizationStats:
    names: list[str] = []
    means: list[float] = []
    stds: list[float] = []
    fmt = None
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = (s.strip() for s in line.partition("="))
        if key == "format":
            fmt = rest
            continue
        mu, s = rest.split()
        names.append(key)
        means.append(float(mu))
        stds.append(float(s))
    if fmt != STATS_FORMAT:
        raise ValueError(f"{path}: unsupported stats format {fmt!r}")
    return StandardizationStats(tuple(names), np.array(means), np.array(stds))

