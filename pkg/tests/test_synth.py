import math
from datetime import date

import numpy as np
import pytest

from ekma_surrogate.ekma import Regime, classify_regime, ekma_surface, select_baseline
from ekma_surrogate.features import build_features
from ekma_surrogate.forest import ForestParams, train_forest
from ekma_surrogate.synth import (
    PLANTED_COEFFICIENTS, SyntheticSpec, base_o3, planted_chords, synth_generate,
)

SMALL = dict(start=date(2024, 1, 1), end=date(2024, 12, 31), sample_fraction=0.25)


def test_deterministic():
    spec = SyntheticSpec(seed=4, **SMALL)
    assert synth_generate(spec) == synth_generate(spec)


def test_seed_changes_output():
    a = synth_generate(SyntheticSpec(seed=1, **SMALL))
    b = synth_generate(SyntheticSpec(seed=2, **SMALL))
    assert a != b


def test_weekend_no2_ratio():
    recs = synth_generate(SyntheticSpec(seed=0, missing_fraction=0.0, **SMALL))
    wd = [r.no2 for r in recs if r.date_local.weekday() < 5]
    we = [r.no2 for r in recs if r.date_local.weekday() >= 5]
    ratio = (sum(we) / len(we)) / (sum(wd) / len(wd))
    # lognormal sd 0.5 -> coefficient of variation ~0.53; a few thousand draws per group
    se = 0.75 * 0.53 * math.sqrt(1 / len(we) + 1 / len(wd))
    assert abs(ratio - 0.75) < 4 * se


def test_records_valid():
    recs = synth_generate(SyntheticSpec(seed=3, **SMALL))
    keys = [r.key for r in recs]
    assert len(keys) == len(set(keys)) and keys == sorted(keys)
    for r in recs:
        assert 0 <= r.hour_local <= 23
        assert all(v is None or v >= 0 for v in (r.o3, r.no2, r.co, r.pm25))


def test_base_shape():
    hours = np.arange(24)
    july, jan = base_o3(hours, 7), base_o3(hours, 1)
    assert 12 <= int(np.argmax(july)) <= 15
    assert np.all(july > jan)


def test_planting_signs():
    s_nox, s_voc = planted_chords(Regime.VOC_LIMITED)
    assert s_nox < 0 < s_voc
    a, b = PLANTED_COEFFICIENTS[Regime.NOX_LIMITED]
    assert b >= 2 * a > 0


def test_invalid_spec():
    with pytest.raises(ValueError):
        synth_generate(SyntheticSpec(noise_sd=-1.0))


@pytest.mark.parametrize("regime", [Regime.VOC_LIMITED, Regime.NOX_LIMITED])
def test_noise_free_regime_recovered(regime):
    recs = synth_generate(SyntheticSpec(regime=regime, noise_sd=0.0, seed=6, **SMALL))
    fm = build_features(recs)
    fm = fm.take(~np.isnan(fm.values).any(axis=1) & ~np.isnan(fm.target))
    model = train_forest(fm, fm.target, ForestParams(num_trees=60, seed=6))
    d = classify_regime(ekma_surface(model, select_baseline(fm)))
    assert d.label is regime
