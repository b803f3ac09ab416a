"""Command-line pipeline: ``ekma <subcommand> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import climatology, ekma, evaluation, features, forest, impute, ingest, isopleths, synth
from .config import ConfigError, PipelineConfig, load_config

log = logging.getLogger("ekma")

RECORDS = "records.csv"
FEATURES = "features.csv"
IMPUTED = "features_imputed.csv"
STATS = "standardization.txt"
MODEL = "model.json.gz"
METRICS = "metrics.txt"
PREDICTIONS = "predictions.csv"
IMPORTANCE = "importance.csv"
SURFACE = "ekma_surface.csv"
HOUR_SURFACE = "ekma_hour_alpha.csv"
ISOPLETHS = "ekma_isopleths.csv"
DIAGNOSIS = "regime.txt"
SURFACE_SVG = "ekma_surface.svg"
HOUR_SVG = "ekma_hour_alpha.svg"


class MissingArtifact(RuntimeError):
    pass


@dataclass
class Context:
    cfg: PipelineConfig

    @property
    def out(self) -> Path:
        return self.cfg.output_dir

    @property
    def threads(self) -> int:
        return self.cfg.resolved_threads()

    def input(self, name: str, producer: str) -> Path:
        p = self.out / name
        if not p.is_file():
            raise MissingArtifact(f"missing {p}; run `ekma {producer}` first")
        return p

    def output(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out / name


def cmd_fetch(ctx: Context) -> None:
    cfg = ctx.cfg
    for code in sorted(ingest.PARAMETER_SLOTS):
        for year in cfg.years:
            path = ingest.download_airdata(code, year, cfg.data_dir)
            log.info("fetch: %s", path)


def _archive_paths(cfg: PipelineConfig) -> dict[int, list[Path]]:
    paths: dict[int, list[Path]] = {}
    for code in sorted(ingest.PARAMETER_SLOTS):
        for year in cfg.years:
            p = cfg.data_dir / f"hourly_{code}_{year}.csv"
            if not p.is_file():
                raise MissingArtifact(f"missing {p}; run `ekma fetch` first")
            paths.setdefault(code, []).append(p)
    return paths


def cmd_ingest(ctx: Context) -> None:
    cfg = ctx.cfg
    keep = ingest.site_filter(cfg.site_allowlist or None, cfg.state, cfg.county)
    records, skipped = ingest.ingest_files(_archive_paths(cfg), keep)
    records = ingest.filter_coverage(records, cfg.coverage_min, ingest.year_span(cfg.years))
    if not records:
        raise ValueError("no site passes the coverage filter")
    ingest.write_records(records, ctx.output(RECORDS))
    log.info("ingest: %d records, %d unparseable rows skipped", len(records), skipped)


def cmd_synth(ctx: Context) -> None:
    cfg = ctx.cfg
    spec = synth.SyntheticSpec(
        n_sites=cfg.synth_sites, start=cfg.synth_start, end=cfg.synth_end,
        regime=cfg.synth_regime, seed=cfg.seed, noise_sd=cfg.synth_noise_sd,
        noise_frac=cfg.synth_noise_frac, sample_fraction=cfg.synth_sample_fraction,
    )
    records = synth.synth_generate(spec)
    ingest.write_records(records, ctx.output(RECORDS))
    log.info("synth: %d records (%s planting)", len(records), spec.regime.value)


def cmd_features(ctx: Context) -> None:
    records = ingest.read_records(ctx.input(RECORDS, "ingest"))
    fm = features.build_features(records)
    features.write_features(fm, ctx.output(FEATURES))
    log.info("features: %d rows", len(fm))


def _load_split(ctx: Context) -> tuple[features.FeatureMatrix, features.FeatureMatrix]:
    fm = features.read_features(ctx.input(IMPUTED, "impute"))
    return evaluation.split_matrix(fm, ctx.cfg.train_year, ctx.cfg.test_year)


def cmd_impute(ctx: Context) -> None:
    cfg = ctx.cfg
    fm = features.read_features(ctx.input(FEATURES, "features"))
    labelled = fm.take(~np.isnan(fm.target))
    if len(labelled) < len(fm):
        log.info("impute: dropped %d rows without O3", len(fm) - len(labelled))
    train, test = evaluation.split_matrix(labelled, cfg.train_year, cfg.test_year)
    train, test, stats = impute.impute_split(train, test, cfg.knn_k, ctx.threads)
    both = features.FeatureMatrix(np.vstack([train.values, test.values]),
                                  train.row_keys + test.row_keys,
                                  np.concatenate([train.target, test.target]))
    features.write_features(both, ctx.output(IMPUTED))
    impute.write_stats(stats, ctx.output(STATS))
    log.info("impute: %d train rows, %d test rows", len(train), len(test))


def _params(cfg: PipelineConfig) -> forest.ForestParams:
    return forest.ForestParams(cfg.num_trees, cfg.mtry, cfg.min_node_size, cfg.seed)


def cmd_train(ctx: Context) -> None:
    train, _ = _load_split(ctx)
    model = forest.train_forest(train, train.target, _params(ctx.cfg), threads=ctx.threads)
    forest.save_model(model, ctx.output(MODEL))
    log.info("train: %d trees on %d rows", len(model.trees), len(train))


def _load_model(ctx: Context) -> forest.ForestModel:
    return forest.load_model(ctx.input(MODEL, "train"))


def cmd_evaluate(ctx: Context) -> None:
    model = _load_model(ctx)
    _, test = _load_split(ctx)
    pred = forest.predict(model, test, threads=ctx.threads)
    metrics = evaluation.compute_metrics(test.target, pred)
    evaluation.write_metrics(metrics, ctx.output(METRICS))
    with open(ctx.output(PREDICTIONS), "w") as fh:
        fh.write("site_key,date_local,hour_local,o3_observed_ppm,o3_predicted_ppm\n")
        for (site, day, hour), y, p in zip(test.row_keys, test.target, pred):
            fh.write(f"{site},{day.isoformat()},{hour},{y!r},{float(p)!r}\n")
    log.info("evaluate: r2=%.4f rmse=%.5f n=%d", metrics.r2, metrics.rmse, metrics.n_test)


def cmd_importance(ctx: Context) -> None:
    model = _load_model(ctx)
    _, test = _load_split(ctx)
    entries = evaluation.permutation_importance(model, test, test.target,
                                                ctx.cfg.importance_repeats, ctx.cfg.seed,
                                                ctx.threads)
    evaluation.write_importance(entries, ctx.output(IMPORTANCE))
    log.info("importance: top feature %s", entries[0].feature)


def cmd_climatology(ctx: Context) -> None:
    records = ingest.read_records(ctx.input(RECORDS, "ingest"))
    ctx.out.mkdir(parents=True, exist_ok=True)
    climatology.write_all(records, ctx.out)
    if ctx.cfg.figures:
        from .plotting import plot_climatology

        plot_climatology(records, ctx.out)
    log.info("climatology: %d records summarised", len(records))


def cmd_ekma(ctx: Context) -> None:
    cfg = ctx.cfg
    model = _load_model(ctx)
    fm = features.read_features(ctx.input(IMPUTED, "impute"))
    criteria = ekma.BaselineCriteria(cfg.baseline_year, cfg.baseline_months, cfg.baseline_hours)
    baseline = ekma.select_baseline(fm, criteria)
    surface = ekma.ekma_surface(model, baseline, cfg.alpha_grid, cfg.beta_grid, ctx.threads)
    ekma.write_surface(surface, ctx.output(SURFACE))

    all_hours = ekma.select_baseline(
        fm, ekma.BaselineCriteria(cfg.baseline_year, cfg.baseline_months, (0, 23)))
    hours = ekma.hour_no2_surface(model, all_hours, cfg.alpha_grid, ctx.threads)
    ekma.write_hour_surface(hours, surface.alphas, ctx.output(HOUR_SURFACE))

    levels = isopleths.default_levels(surface.o3_mean, cfg.isopleth_count)
    lines = ekma.extract_isopleths(surface, levels)
    ekma.write_isopleths(lines, ctx.output(ISOPLETHS))

    diagnosis = ekma.classify_regime(surface, cfg.tau)
    ekma.write_diagnosis(diagnosis, baseline, ctx.output(DIAGNOSIS))

    if cfg.figures:
        from .svg import render_grid, render_heatmap

        render_heatmap(surface, lines, ctx.output(SURFACE_SVG))
        hour_levels = isopleths.default_levels(hours, cfg.isopleth_count)
        hour_lines = isopleths.extract_contours(hours, np.arange(24.0), surface.alphas,
                                                hour_levels)
        render_grid(hours, np.arange(24.0), surface.alphas, hour_lines, ctx.output(HOUR_SVG),
                    "Surrogate O3 by hour and NO2 scaling (ppm)", "Local hour",
                    "α (NO2 scale)", tick_format=(".0f", ".1f"))
    log.info("ekma: %s (s_nox=%.5f, s_voc=%.5f, baseline=%d rows)", diagnosis.label.value,
             diagnosis.s_nox, diagnosis.s_voc, len(baseline))


STAGES: dict[str, Callable[[Context], None]] = {
    "fetch": cmd_fetch,
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "features": cmd_features,
    "impute": cmd_impute,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "importance": cmd_importance,
    "climatology": cmd_climatology,
    "ekma": cmd_ekma,
}
ANALYSIS_CHAIN = ("features", "impute", "train", "evaluate", "importance", "climatology", "ekma")

HELP = {
    "fetch": "download AirData hourly archives into the data directory",
    "ingest": "parse, quality-control, pivot and coverage-filter archives into records.csv",
    "synth": "write synthetic records.csv with a planted O3 response",
    "features": "build the predictor matrix (features.csv)",
    "impute": "KNN-impute missing predictors (features_imputed.csv, standardization.txt)",
    "train": "train the random forest (model.json.gz)",
    "evaluate": "score the held-out year (metrics.txt, predictions.csv)",
    "importance": "permutation importance on the held-out year (importance.csv)",
    "climatology": "O3 climatology tables and line charts",
    "ekma": "precursor response surfaces, isopleths and regime diagnosis",
    "all": "run every stage in order",
}

# flag -> (config field, argparse kwargs)
OVERRIDES: dict[str, tuple[str, dict]] = {
    "--data-dir": ("data_dir", {"type": Path}),
    "--years": ("years", {"type": int, "nargs": "+"}),
    "--coverage-min": ("coverage_min", {"type": float}),
    "--sites": ("site_allowlist", {"nargs": "+"}),
    "--knn-k": ("knn_k", {"type": int}),
    "--num-trees": ("num_trees", {"type": int}),
    "--mtry": ("mtry", {"type": int}),
    "--min-node-size": ("min_node_size", {"type": int}),
    "--train-year": ("train_year", {"type": int}),
    "--test-year": ("test_year", {"type": int}),
    "--repeats": ("importance_repeats", {"type": int}),
    "--tau": ("tau", {"type": float}),
    "--regime": ("synth_regime", {"choices": [r.value for r in synth.PLANTED_COEFFICIENTS]}),
    "--noise-sd": ("synth_noise_sd", {"type": float}),
    "--sample-fraction": ("synth_sample_fraction", {"type": float}),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat section.key = value config file")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--threads", type=int, help="worker threads, 0 = all cores")
    common.add_argument("--output", type=Path, help="output directory")
    common.add_argument("--no-figures", dest="figures", action="store_false", default=None,
                        help="skip SVG figures")
    for flag, (_, kwargs) in OVERRIDES.items():
        common.add_argument(flag, dest=flag[2:].replace("-", "_"), **kwargs)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ekma", description="Ozone surrogate EKMA pipeline.")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)
    for name in (*STAGES, "all"):
        p = sub.add_parser(name, parents=[common], help=HELP[name])
        if name == "all":
            p.add_argument("--synthetic", action="store_true",
                           help="start from synthetic records instead of fetch + ingest")
    return parser


def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {"seed": args.seed, "threads": args.threads, "output_dir": args.output,
                 "figures": args.figures}
    for flag, (name, _) in OVERRIDES.items():
        value = getattr(args, flag[2:].replace("-", "_"))
        if isinstance(value, list):
            value = tuple(value)
        if name == "synth_regime" and value is not None:
            value = ekma.Regime(value)
        overrides[name] = value
    return load_config(args.config, overrides)


def run(command: str, cfg: PipelineConfig, synthetic: bool = False) -> None:
    ctx = Context(cfg)
    if command == "all":
        chain = (("synth",) if synthetic else ("fetch", "ingest")) + ANALYSIS_CHAIN
    else:
        chain = (command,)
    for stage in chain:
        log.info("== %s", stage)
        STAGES[stage](ctx)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = config_from_args(args)
        run(args.command, cfg, getattr(args, "synthetic", False))
    except ConfigError as exc:
        print(f"ekma: config error: {exc}", file=sys.stderr)
        return 2
    except (MissingArtifact, ValueError, OSError, RuntimeError) as exc:
        print(f"ekma: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
