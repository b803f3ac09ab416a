"""Synthetic hourly records with a planted O3 response, for offline runs.

O3 = base(hour, month) + a * g(CO) + b * g(NO2) + noise, with
g(x) = 1 - exp(-x / K) saturating at the precursor's median scale K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .ekma import Regime
from .ingest import HourlyRecord

NO2_SCALE = 18.0   # ppb
CO_SCALE = 0.35    # ppm
WEEKEND_NO2_FACTOR = 0.75

# (a, b) per planted regime, ppm at saturation.  The VOC-limited planting has
# NO2 titrating O3 (b < 0), which is what makes weekend NO2 cuts raise O3.
PLANTED_COEFFICIENTS = {
    Regime.VOC_LIMITED: (0.08, -0.04),
    Regime.NOX_LIMITED: (0.02, 0.06),
}

_SITE_ORIGIN = (34.05, -118.25)


@dataclass(frozen=True)
class SyntheticSpec:
    n_sites: int = 3
    start: date = date(2024, 1, 1)
    end: date = date(2025, 12, 31)
    regime: Regime = Regime.VOC_LIMITED
    seed: int = 0
    noise_sd: float | None = None   # ppm; None -> noise_frac * signal sd
    noise_frac: float = 0.2
    sample_fraction: float = 0.38   # share of site-hours kept
    missing_fraction: float = 0.05  # per precursor column
    o3_missing_fraction: float = 0.01

    def validate(self) -> None:
        if self.n_sites < 1:
            raise ValueError("n_sites must be >= 1")
        if self.end < self.start:
            raise ValueError("end precedes start")
        if self.noise_sd is not None and self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if self.noise_frac < 0:
            raise ValueError("noise_frac must be >= 0")
        if not 0 < self.sample_fraction <= 1:
            raise ValueError("sample_fraction must be in (0, 1]")
        for f in (self.missing_fraction, self.o3_missing_fraction):
            if not 0 <= f < 1:
                raise ValueError("missing fractions must be in [0, 1)")
        Regime(self.regime)


def saturating(x: np.ndarray, scale: float) -> np.ndarray:
    return 1.0 - np.exp(-np.asarray(x) / scale)


def base_o3(hour: np.ndarray, month: np.ndarray) -> np.ndarray:
    """Afternoon-peaked diurnal shape whose amplitude grows toward a July maximum."""
    season = 0.5 * (1.0 + np.cos(2.0 * np.pi * (np.asarray(month) - 7) / 12.0))
    diurnal = np.exp(-(((np.asarray(hour) - 13.5) / 3.5) ** 2))
    return 0.018 + 0.008 * season + (0.012 + 0.020 * season) * diurnal


def planted_o3(no2, co, hour, month, regime: Regime) -> np.ndarray:
    a, b = PLANTED_COEFFICIENTS[Regime(regime)]
    return base_o3(hour, month) + a * saturating(co, CO_SCALE) + b * saturating(no2, NO2_SCALE)


def site_keys(n_sites: int) -> list[str]:
    return [f"06-037-{9001 + s:04d}" for s in range(n_sites)]


def synth_generate(spec: SyntheticSpec = SyntheticSpec()) -> list[HourlyRecord]:
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x5EED]))
    days = (spec.end - spec.start).days + 1
    n_hours = days * 24
    keys = site_keys(spec.n_sites)

    site_idx = np.repeat(np.arange(spec.n_sites), n_hours)
    t = np.tile(np.arange(n_hours), spec.n_sites)
    keep = rng.random(site_idx.size) < spec.sample_fraction
    site_idx, t = site_idx[keep], t[keep]
    n = site_idx.size

    day = t // 24
    hour = t % 24
    dates = [spec.start + timedelta(days=int(d)) for d in range(days)]
    weekday = np.array([d.weekday() for d in dates])[day]
    month = np.array([d.month for d in dates])[day]

    no2 = NO2_SCALE * np.exp(0.5 * rng.standard_normal(n))
    no2 = np.where(weekday >= 5, no2 * WEEKEND_NO2_FACTOR, no2)
    co = CO_SCALE * np.exp(0.5 * rng.standard_normal(n))
    pm25 = 12.0 * np.exp(0.5 * rng.standard_normal(n))

    signal = planted_o3(no2, co, hour, month, spec.regime)
    noise_sd = spec.noise_sd if spec.noise_sd is not None else spec.noise_frac * float(signal.std())
    o3 = np.maximum(signal + noise_sd * rng.standard_normal(n), 0.0)

    miss = rng.random((n, 4)) < np.array([spec.o3_missing_fraction] + [spec.missing_fraction] * 3)
    lat = _SITE_ORIGIN[0] + 0.05 * np.arange(spec.n_sites)
    lon = _SITE_ORIGIN[1] - 0.07 * np.arange(spec.n_sites)

    def cell(v: float, missing: bool) -> float | None:
        return None if missing else round(float(v), 6)

    out = []
    for i in range(n):
        s = site_idx[i]
        out.append(HourlyRecord(
            keys[s], float(lat[s]), float(lon[s]), dates[day[i]], int(hour[i]),
            o3=cell(o3[i], miss[i, 0]), no2=cell(no2[i], miss[i, 1]),
            co=cell(co[i], miss[i, 2]), pm25=cell(pm25[i], miss[i, 3]),
        ))
    out.sort(key=lambda r: r.key)
    return out


def planted_chords(regime: Regime) -> tuple[float, float]:
    """Analytic (s_nox, s_voc) at the precursor medians, for reference."""
    a, b = PLANTED_COEFFICIENTS[Regime(regime)]
    s_nox = b * (math.exp(-0.5) - math.exp(-1.0)) / 0.5
    s_voc = a * (math.exp(-0.5) - math.exp(-1.0)) / 0.5
    return s_nox, s_voc
