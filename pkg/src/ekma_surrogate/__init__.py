"""Random-forest ozone surrogate with EKMA-style precursor sensitivity analysis."""

from .ekma import (
    BaselineCriteria, EkmaSurface, Regime, RegimeDiagnosis, classify_regime, ekma_surface,
    extract_isopleths, perturb, select_baseline,
)
from .evaluation import Metrics, compute_metrics, permutation_importance, temporal_split
from .features import FEATURE_NAMES, FeatureMatrix, build_features, encode_cyclic
from .forest import ForestModel, ForestParams, best_split, load_model, predict, save_model, train_forest
from .impute import StandardizationStats, compute_standardization, impute_split, knn_impute
from .ingest import HourlyRecord, RawObservation, apply_qc, filter_coverage, parse_hourly_csv, pivot_records
from .synth import SyntheticSpec, synth_generate

__version__ = "0.1.0"
