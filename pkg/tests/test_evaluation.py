import math
from datetime import date

import numpy as np
import pytest

from ekma_surrogate.evaluation import (
    ImportanceEntry, Metrics, compute_metrics, permutation_importance, read_importance,
    read_metrics, split_matrix, temporal_split, write_importance, write_metrics,
)
from ekma_surrogate.features import FeatureMatrix
from ekma_surrogate.forest import ForestModel, ForestParams, Tree, train_forest
from ekma_surrogate.ingest import HourlyRecord


def rec(year):
    return HourlyRecord("06-037-0002", 34.0, -118.0, date(year, 6, 1), 12, 0.04)


class TestTemporalSplit:
    def test_years(self):
        train, test, discarded = temporal_split([rec(2024), rec(2025), rec(2024)], 2024, 2025)
        assert [len(train), len(test), discarded] == [2, 1, 0]

    def test_discarded_counted(self):
        *_, discarded = temporal_split([rec(2023), rec(2024), rec(2025)], 2024, 2025)
        assert discarded == 1

    def test_empty_test_fatal(self):
        with pytest.raises(ValueError, match="2025"):
            temporal_split([rec(2024)], 2024, 2025)

    def test_matrix_split(self):
        keys = [("s", date(y, 1, 1), 0) for y in (2024, 2025, 2023)]
        fm = FeatureMatrix(np.zeros((3, 2)), keys, np.zeros(3), ("a", "b"))
        train, test = split_matrix(fm, 2024, 2025)
        assert (len(train), len(test)) == (1, 1)


class TestMetrics:
    def test_perfect(self):
        m = compute_metrics([1.0, 2.0, 4.0], [1.0, 2.0, 4.0])
        assert (m.rmse, m.r2, m.n_test) == (0.0, 1.0, 3)

    def test_mean_predictor(self):
        y = np.array([1.0, 2.0, 6.0])
        assert compute_metrics(y, np.full(3, y.mean())).r2 == 0.0

    def test_hand_example(self):
        m = compute_metrics([0, 0, 1, 1], [0, 0, 0, 1])
        assert m.rmse == 0.5 and m.r2 == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            compute_metrics([1.0, 2.0], [1.0])

    def test_roundtrip(self, tmp_path):
        m = Metrics(0.8571, 0.00612, 9000)
        write_metrics(m, tmp_path / "metrics.txt")
        text = (tmp_path / "metrics.txt").read_text()
        assert all(f"{k} = " in text for k in ("r2", "rmse", "n_test"))
        assert read_metrics(tmp_path / "metrics.txt") == m


def _constant_model(c, p):
    names = tuple(f"x{j}" for j in range(p))
    trees = [Tree(np.array([-1], dtype=np.int32), np.array([c]), np.array([0], dtype=np.int32))]
    return ForestModel(ForestParams(num_trees=1), trees, names)


def _planted(n=600, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, 2))
    y = np.sin(4 * X[:, 0]) + 0.05 * rng.normal(size=n)
    return FeatureMatrix(X, column_names=("signal", "noise")), y


class TestImportance:
    def test_constant_model_zero(self):
        X = FeatureMatrix(np.random.default_rng(0).normal(size=(30, 3)),
                          column_names=("x0", "x1", "x2"))
        entries = permutation_importance(_constant_model(0.04, 3), X, np.zeros(30), repeats=4)
        assert all(e.delta_rmse == 0.0 and set(e.per_repeat) == {0.0} for e in entries)

    def test_signal_beats_noise_every_repeat(self):
        X, y = _planted()
        model = train_forest(X.take(np.arange(400)), y[:400], ForestParams(num_trees=50, seed=1))
        entries = {e.feature: e for e in
                   permutation_importance(model, X.take(np.arange(400, 600)), y[400:],
                                          repeats=10, seed=5)}
        sig, noise = entries["signal"], entries["noise"]
        assert all(s > z for s, z in zip(sig.per_repeat, noise.per_repeat))
        assert abs(noise.delta_rmse) <= 3 * noise.std_error

    def test_reproducible_and_ranked(self):
        X, y = _planted(200)
        model = train_forest(X, y, ForestParams(num_trees=10))
        a = permutation_importance(model, X, y, repeats=3, seed=9)
        b = permutation_importance(model, X, y, repeats=3, seed=9, threads=4)
        assert a == b
        assert [e.feature for e in a] == ["signal", "noise"]
        assert all(e.delta_rmse == math.fsum(e.per_repeat) / 3 for e in a)

    def test_roundtrip(self, tmp_path):
        entries = [ImportanceEntry("co", 0.01, (0.01, 0.011, 0.009))]
        write_importance(entries, tmp_path / "importance.csv")
        assert read_importance(tmp_path / "importance.csv") == entries
        header = (tmp_path / "importance.csv").read_text().splitlines()[0]
        assert header == "feature,delta_rmse,repeat_0,repeat_1,repeat_2"
