import math
from datetime import date

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ekma_surrogate.features import (
    FEATURE_NAMES, FeatureMatrix, build_features, encode_cyclic, read_features, write_features,
)
from ekma_surrogate.ingest import HourlyRecord


def rec(day=date(2024, 3, 15), hour=13, o3=0.04, no2=12.0, co=0.3, pm25=8.0):
    return HourlyRecord("06-037-0002", 34.07, -118.23, day, hour, o3, no2, co, pm25)


class TestEncodeCyclic:
    def test_zero(self):
        assert encode_cyclic(0, 24) == (0.0, 1.0)

    def test_quarter(self):
        s, c = encode_cyclic(6, 24)
        assert s == 1.0 and abs(c) < 1e-15

    def test_three_quarter(self):
        s, c = encode_cyclic(18, 24)
        assert s == -1.0 and abs(c) < 1e-15

    @pytest.mark.parametrize("value,period", [(24, 24), (-1, 7), (3, 10)])
    def test_out_of_range(self, value, period):
        with pytest.raises(ValueError):
            encode_cyclic(value, period)

    @given(st.sampled_from([24, 7, 12]).flatmap(
        lambda p: st.tuples(st.integers(0, p - 1), st.just(p))))
    def test_roundtrip(self, vp):
        v, p = vp
        s, c = encode_cyclic(v, p)
        assert abs(s * s + c * c - 1.0) <= 1e-12
        back = math.atan2(s, c) / (2 * math.pi) * p % p
        assert abs(back - v) <= 1e-9 or abs(back - v - p) <= 1e-9


class TestBuildFeatures:
    def test_calendar_mapping(self):
        fm = build_features([rec()])  # 2024-03-15 is a Friday
        row = dict(zip(FEATURE_NAMES, fm.values[0]))
        assert (row["month_sin"], row["month_cos"]) == encode_cyclic(2, 12)
        assert (row["dow_sin"], row["dow_cos"]) == encode_cyclic(4, 7)
        assert (row["hour_sin"], row["hour_cos"]) == encode_cyclic(13, 24)
        assert (row["no2"], row["co"], row["pm25"]) == (12.0, 0.3, 8.0)
        assert (row["latitude"], row["longitude"]) == (34.07, -118.23)
        assert fm.target[0] == 0.04

    def test_missing_no2(self):
        fm = build_features([rec(no2=None)])
        assert np.isnan(fm.values[0, 0])
        assert not np.isnan(fm.values[0, 1:]).any()

    def test_order_preserved(self):
        fm = build_features([rec(hour=5), rec(hour=2)])
        assert [k[2] for k in fm.row_keys] == [5, 2]

    def test_missing_target(self):
        assert np.isnan(build_features([rec(o3=None)]).target[0])

    def test_empty(self):
        with pytest.raises(ValueError):
            build_features([])


def test_matrix_helpers():
    fm = build_features([rec(day=date(2024, 7, 1), hour=4), rec(day=date(2025, 1, 2), hour=9)])
    assert list(fm.years()) == [2024, 2025]
    assert list(fm.months()) == [7, 1]
    assert list(fm.hours()) == [4, 9]
    sub = fm.take(np.array([False, True]))
    assert len(sub) == 1 and sub.row_keys[0][1] == date(2025, 1, 2)
    with pytest.raises(ValueError):
        FeatureMatrix(np.zeros((2, 3)))


def test_csv_roundtrip(tmp_path):
    fm = build_features([rec(), rec(hour=14, no2=None, o3=None)])
    p = tmp_path / "features.csv"
    write_features(fm, p)
    back = read_features(p)
    np.testing.assert_array_equal(back.values, fm.values)
    np.testing.assert_array_equal(back.target, fm.target)
    assert back.row_keys == fm.row_keys
    assert p.read_text().splitlines()[0] == (
        "site_key,date_local,hour_local," + ",".join(FEATURE_NAMES) + ",o3")
