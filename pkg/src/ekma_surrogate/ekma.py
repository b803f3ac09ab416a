"""Surrogate EKMA: precursor-scaling response surfaces and regime diagnosis.

NO2 stands in for NOx and CO for the VOC-related emissions.  Each surface
cell is the forest's mean prediction over a fixed baseline set after scaling
the NO2 column by alpha and the CO column by beta, in raw concentration
units.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import FeatureMatrix, encode_cyclic
from .forest import ForestModel, predict
from .isopleths import Isopleth, extract_contours

GRID_MIN, GRID_MAX = 0.5, 1.5
GRID_ATOL = 1e-9


class Regime(str, Enum):
    VOC_LIMITED = "VOC_LIMITED"
    NOX_LIMITED = "NOX_LIMITED"
    TRANSITIONAL = "TRANSITIONAL"


class EkmaError(ValueError):
    pass


@dataclass(frozen=True)
class BaselineCriteria:
    year: int = 2024
    months: tuple[int, int] = (6, 9)
    hours: tuple[int, int] = (12, 17)

    def describe(self) -> str:
        return (f"year={self.year} months={self.months[0]}-{self.months[1]} "
                f"hours={self.hours[0]}-{self.hours[1]}")


@dataclass
class BaselineSet:
    rows: FeatureMatrix
    indices: np.ndarray
    criteria: BaselineCriteria

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class EkmaSurface:
    alphas: np.ndarray
    betas: np.ndarray
    o3_mean: np.ndarray  # [alpha][beta], ppm
    baseline_size: int

    def cell(self, alpha: float, beta: float) -> float:
        return float(self.o3_mean[_grid_index(self.alphas, alpha, "alpha"),
                                  _grid_index(self.betas, beta, "beta")])


@dataclass(frozen=True)
class RegimeDiagnosis:
    label: Regime
    s_nox: float
    s_voc: float
    tau: float


def _grid_index(grid: np.ndarray, value: float, name: str) -> int:
    hits = np.flatnonzero(np.abs(np.asarray(grid) - value) <= GRID_ATOL)
    if hits.size == 0:
        raise EkmaError(f"{name} grid has no cell at {value}")
    return int(hits[0])


def default_grid(points: int = 11, lo: float = GRID_MIN, hi: float = GRID_MAX) -> np.ndarray:
    if points < 2:
        raise ValueError("grid needs at least 2 points")
    return np.round(lo + (hi - lo) * np.arange(points) / (points - 1), 12)


def _check_grid(grid: Sequence[float], name: str) -> np.ndarray:
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 1 or g.size == 0:
        raise EkmaError(f"{name} grid must be a non-empty list")
    if np.any(g < GRID_MIN - GRID_ATOL) or np.any(g > GRID_MAX + GRID_ATOL):
        raise EkmaError(f"{name} grid must lie within [{GRID_MIN}, {GRID_MAX}]")
    return g


def select_baseline(features: FeatureMatrix, criteria: BaselineCriteria = BaselineCriteria()
                    ) -> BaselineSet:
    """Rows whose local timestamp falls in the criteria's year, month and hour ranges."""
    years, months, hours = features.years(), features.months(), features.hours()
    (m0, m1), (h0, h1) = criteria.months, criteria.hours
    mask = (years == criteria.year) & (months >= m0) & (months <= m1) & (hours >= h0) & (hours <= h1)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise EkmaError(f"empty baseline set for {criteria.describe()}")
    return BaselineSet(features.take(idx), idx, criteria)


def perturb(rows: FeatureMatrix, alpha: float, beta: float) -> FeatureMatrix:
    """Scale NO2 by ``alpha`` and CO by ``beta``; every other column is copied as is."""
    if alpha <= 0 or beta <= 0:
        raise EkmaError("scaling factors must be positive")
    if np.isnan(rows.values).any():
        raise EkmaError("baseline rows must be fully observed")
    out = rows.values.copy()
    out[:, rows.column("no2")] *= alpha
    out[:, rows.column("co")] *= beta
    return rows.replace(out)


def mean_prediction(model: ForestModel, X, threads: int = 1) -> float:
    pred = predict(model, X, threads=threads)
    return math.fsum(pred) / pred.size


def ekma_surface(model: ForestModel, baseline: BaselineSet,
                 alpha_grid: Sequence[float] | None = None,
                 beta_grid: Sequence[float] | None = None,
                 threads: int = 1) -> EkmaSurface:
    alphas = _check_grid(default_grid() if alpha_grid is None else alpha_grid, "alpha")
    betas = _check_grid(default_grid() if beta_grid is None else beta_grid, "beta")
    rows = baseline.rows
    n = len(rows)
    out = np.empty((alphas.size, betas.size))
    for a, alpha in enumerate(alphas):
        # all beta cells of one alpha in a single prediction pass; rows are
        # predicted independently so stacking does not change any value
        stacked = np.concatenate([perturb(rows, alpha, beta).values for beta in betas])
        pred = predict(model, stacked, threads=threads)
        for b in range(betas.size):
            out[a, b] = math.fsum(pred[b * n:(b + 1) * n]) / n
    return EkmaSurface(alphas, betas, out, n)


def hour_no2_surface(model: ForestModel, baseline_all_hours: BaselineSet,
                     alpha_grid: Sequence[float] | None = None, threads: int = 1) -> np.ndarray:
    """Mean prediction with every baseline row moved to hour h and NO2 scaled by alpha.

    Returns a 24 x len(alpha_grid) matrix.
    """
    alphas = _check_grid(default_grid() if alpha_grid is None else alpha_grid, "alpha")
    rows = baseline_all_hours.rows
    n = len(rows)
    hs, hc = rows.column("hour_sin"), rows.column("hour_cos")
    out = np.empty((24, alphas.size))
    for h in range(24):
        sin_h, cos_h = encode_cyclic(h, 24)
        blocks = []
        for alpha in alphas:
            v = perturb(rows, alpha, 1.0).values
            v[:, hs] = sin_h
            v[:, hc] = cos_h
            blocks.append(v)
        pred = predict(model, np.concatenate(blocks), threads=threads)
        for a in range(alphas.size):
            out[h, a] = math.fsum(pred[a * n:(a + 1) * n]) / n
    return out


def classify_regime(surface: EkmaSurface, tau: float = 1.25) -> RegimeDiagnosis:
    """Chord sensitivities over a halving of each precursor, then the regime rule.

    Falling O3 when NO2 is halved with CO fixed gives s_nox; likewise s_voc
    for CO.  A negative s_nox (NO2 cuts raise ozone) or s_voc > tau * s_nox
    reads as VOC-limited, s_nox > tau * s_voc as NOx-limited, anything else
    as transitional.
    """
    ref = surface.cell(1.0, 1.0)
    s_nox = (ref - surface.cell(0.5, 1.0)) / 0.5
    s_voc = (ref - surface.cell(1.0, 0.5)) / 0.5
    return RegimeDiagnosis(regime_label(s_nox, s_voc, tau), s_nox, s_voc, tau)


def regime_label(s_nox: float, s_voc: float, tau: float = 1.25) -> Regime:
    if s_nox < 0:
        return Regime.VOC_LIMITED
    if s_voc > tau * s_nox:
        return Regime.VOC_LIMITED
    if s_nox > tau * s_voc:
        return Regime.NOX_LIMITED
    return Regime.TRANSITIONAL


def extract_isopleths(surface: EkmaSurface, levels: Sequence[float]) -> list[Isopleth]:
    """O3 isopleths as polylines in (alpha, beta) space."""
    return extract_contours(surface.o3_mean, surface.alphas, surface.betas, levels)


def _g6(v: float) -> str:
    return f"{v:.6g}"


def write_surface(surface: EkmaSurface, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "beta", "o3_mean_ppm"])
        for a, alpha in enumerate(surface.alphas):
            for b, beta in enumerate(surface.betas):
                w.writerow([_g6(alpha), _g6(beta), _g6(surface.o3_mean[a, b])])


def write_hour_surface(matrix: np.ndarray, alphas: Sequence[float], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hour", "alpha", "o3_mean_ppm"])
        for h in range(matrix.shape[0]):
            for a, alpha in enumerate(alphas):
                w.writerow([h, _g6(alpha), _g6(matrix[h, a])])


def write_isopleths(isopleths: Sequence[Isopleth], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "polyline_id", "vertex_index", "alpha", "beta"])
        for pid, iso in enumerate(isopleths):
            for k, (x, y) in enumerate(iso.points):
                w.writerow([_g6(iso.level), pid, k, repr(float(x)), repr(float(y))])


def write_diagnosis(d: RegimeDiagnosis, baseline: BaselineSet, path: str | Path) -> None:
    c = baseline.criteria
    lines = [
        f"label = {d.label.value}",
        f"s_nox = {d.s_nox!r}",
        f"s_voc = {d.s_voc!r}",
        f"tau = {d.tau!r}",
        f"baseline_year = {c.year}",
        f"baseline_months = {c.months[0]}-{c.months[1]}",
        f"baseline_hours = {c.hours[0]}-{c.hours[1]}",
        f"baseline_size = {len(baseline)}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def read_diagnosis(path: str | Path) -> dict[str, str]:
    return dict(line.split(" = ", 1) for line in Path(path).read_text().splitlines() if " = " in line)
