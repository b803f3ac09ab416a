"""Pipeline configuration: flat ``section.key = value`` files.

Precedence, highest first: command-line flags, the ``EKMA_OUTPUT_DIR``
environment variable (output directory only), the config file, defaults.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from datetime import date
from pathlib import Path
from typing import Any, Callable, Mapping

from .ekma import GRID_MAX, GRID_MIN, Regime, default_grid

OUTPUT_ENV = "EKMA_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("-")
    if not sep:
        raise ValueError(f"expected a range like 6-9, got {text!r}")
    return int(lo), int(hi)


def _strings(text: str) -> tuple[str, ...]:
    return tuple(v for v in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_int(text: str) -> int | None:
    return None if text.strip().lower() in ("", "auto", "none") else int(text)


def _optional_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "auto", "none") else float(text)


@dataclass(frozen=True)
class PipelineConfig:
    data_dir: Path = Path("data")
    output_dir: Path = Path("output")
    years: tuple[int, ...] = (2024, 2025)
    site_allowlist: tuple[str, ...] = ()
    state: str = "06"
    county: str = "037"
    coverage_min: float = 0.75
    knn_k: int = 5
    num_trees: int = 500
    mtry: int | None = None
    min_node_size: int = 5
    seed: int = 0
    train_year: int = 2024
    test_year: int = 2025
    importance_repeats: int = 10
    alpha_grid: tuple[float, ...] = tuple(map(float, default_grid()))
    beta_grid: tuple[float, ...] = tuple(map(float, default_grid()))
    baseline_year: int = 2024
    baseline_months: tuple[int, int] = (6, 9)
    baseline_hours: tuple[int, int] = (12, 17)
    tau: float = 1.25
    isopleth_count: int = 8
    figures: bool = True
    threads: int = 1
    synth_regime: Regime = Regime.VOC_LIMITED
    synth_sites: int = 3
    synth_start: date = date(2024, 1, 1)
    synth_end: date = date(2025, 12, 31)
    synth_noise_sd: float | None = None
    synth_noise_frac: float = 0.2
    synth_sample_fraction: float = 0.38

    def validate(self) -> "PipelineConfig":
        if not 0 < self.coverage_min <= 1:
            raise ConfigError("coverage_min must be in (0, 1]")
        for name in ("knn_k", "num_trees", "min_node_size", "importance_repeats", "synth_sites"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError("mtry must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.train_year == self.test_year:
            raise ConfigError("train_year and test_year must differ")
        for name in ("alpha_grid", "beta_grid"):
            g = getattr(self, name)
            if not g or min(g) < GRID_MIN or max(g) > GRID_MAX:
                raise ConfigError(f"{name} must be non-empty within [{GRID_MIN}, {GRID_MAX}]")
        m0, m1 = self.baseline_months
        h0, h1 = self.baseline_hours
        if not 1 <= m0 <= m1 <= 12:
            raise ConfigError("baseline_months must satisfy 1 <= start <= end <= 12")
        if not 0 <= h0 <= h1 <= 23:
            raise ConfigError("baseline_hours must satisfy 0 <= start <= end <= 23")
        if self.tau < 1:
            raise ConfigError("tau must be >= 1")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0")
        if self.synth_noise_sd is not None and self.synth_noise_sd < 0:
            raise ConfigError("synth noise_sd must be >= 0")
        return self

    def resolved_threads(self) -> int:
        return self.threads or (os.cpu_count() or 1)


# config key -> (field, parser)
KEYS: dict[str, tuple[str, Callable[[str], Any]]] = {
    "data.dir": ("data_dir", Path),
    "output.dir": ("output_dir", Path),
    "ingest.years": ("years", _ints),
    "ingest.coverage_min": ("coverage_min", float),
    "sites.allowlist": ("site_allowlist", _strings),
    "sites.state": ("state", str),
    "sites.county": ("county", str),
    "impute.k": ("knn_k", int),
    "forest.num_trees": ("num_trees", int),
    "forest.mtry": ("mtry", _optional_int),
    "forest.min_node_size": ("min_node_size", int),
    "forest.seed": ("seed", int),
    "split.train_year": ("train_year", int),
    "split.test_year": ("test_year", int),
    "importance.repeats": ("importance_repeats", int),
    "ekma.alpha_grid": ("alpha_grid", _floats),
    "ekma.beta_grid": ("beta_grid", _floats),
    "ekma.baseline_year": ("baseline_year", int),
    "ekma.baseline_months": ("baseline_months", _range),
    "ekma.baseline_hours": ("baseline_hours", _range),
    "ekma.tau": ("tau", float),
    "ekma.isopleth_count": ("isopleth_count", int),
    "figures.enabled": ("figures", _bool),
    "run.threads": ("threads", int),
    "synth.regime": ("synth_regime", Regime),
    "synth.sites": ("synth_sites", int),
    "synth.start": ("synth_start", date.fromisoformat),
    "synth.end": ("synth_end", date.fromisoformat),
    "synth.noise_sd": ("synth_noise_sd", _optional_float),
    "synth.noise_frac": ("synth_noise_frac", float),
    "synth.sample_fraction": ("synth_sample_fraction", float),
}
_FIELDS = {f.name for f in fields(PipelineConfig)}


def parse_config(text: str, source: str = "<config>") -> dict[str, Any]:
    """Field overrides from config text; unknown keys and bad values raise ConfigError."""
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        name, parse = KEYS[key]
        try:
            out[name] = parse(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return out


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None,
                environ: Mapping[str, str] | None = None) -> PipelineConfig:
    """Defaults, then the file, then the environment, then ``overrides`` (non-None only)."""
    cfg = PipelineConfig()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        cfg = replace(cfg, **parse_config(p.read_text(), str(p)))
    env = os.environ if environ is None else environ
    if env.get(OUTPUT_ENV):
        cfg = replace(cfg, output_dir=Path(env[OUTPUT_ENV]))
    if overrides:
        unknown = set(overrides) - _FIELDS
        if unknown:
            raise ConfigError(f"unknown override(s): {sorted(unknown)}")
        cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    return cfg.validate()


def dump_config(cfg: PipelineConfig) -> str:
    def fmt(v: Any) -> str:
        if v is None:
            return "auto"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, Regime):
            return v.value
        if isinstance(v, date):
            return v.isoformat()
        if isinstance(v, tuple):
            return " ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        return str(v)

    lines = []
    for key, (name, _) in KEYS.items():
        value = getattr(cfg, name)
        if name in ("baseline_months", "baseline_hours"):
            lines.append(f"{key} = {value[0]}-{value[1]}")
        else:
            lines.append(f"{key} = {fmt(value)}")
    return "\n".join(lines) + "\n"
