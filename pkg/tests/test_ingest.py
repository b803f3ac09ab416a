import io
import logging
import zipfile
from datetime import date, timedelta

import pytest

from ekma_surrogate import ingest
from ekma_surrogate.ingest import (
    CO, NO2, O3, PM25, DownloadError, FormatError, HourlyRecord, RawObservation, apply_qc,
    download_airdata, filter_coverage, parse_hourly_csv, pivot_records,
)

HEADER = ("State Code,County Code,Site Num,Parameter Code,POC,Latitude,Longitude,Datum,"
          "Parameter Name,Date Local,Time Local,Date GMT,Time GMT,Sample Measurement,"
          "Units of Measure,MDL,Uncertainty,Qualifier,Method Type")


def row(value="0.041", hour="13:00", site="0002", poc="1", code="44201",
        units="Parts per million", qualifier="", day="2024-07-15"):
    return (f"06,037,{site},{code},{poc},34.06659,-118.22688,WGS84,Ozone,{day},{hour},"
            f"{day},20:00,{value},{units},0.005,,{qualifier},FEM")


def csv_bytes(*rows, header=HEADER):
    return io.BytesIO(("\n".join((header, *rows)) + "\n").encode())


def obs(code=O3, value=0.04, poc=1, hour=13, site="06-037-0002", day=date(2024, 7, 15),
        lat=34.0, lon=-118.0, units=None, qualifier=""):
    return RawObservation(site, code, poc, lat, lon, day, hour, value,
                          units if units is not None else ingest.EXPECTED_UNITS[code], qualifier)


class TestParse:
    def test_field_mapping(self):
        res = parse_hourly_csv(csv_bytes(row()), O3)
        (o,) = res.observations
        assert o.site_key == "06-037-0002"
        assert o.hour_local == 13
        assert o.value == 0.041
        assert o.date_local == date(2024, 7, 15)
        assert o.poc == 1
        assert res.skipped == 0

    def test_missing_column_is_named(self):
        header = HEADER.replace("Sample Measurement,", "")
        with pytest.raises(FormatError, match="Sample Measurement"):
            parse_hourly_csv(csv_bytes(header=header), O3)

    def test_empty_file(self):
        with pytest.raises(FormatError):
            parse_hourly_csv(io.BytesIO(b""), O3)

    def test_unparseable_row_counted(self):
        res = parse_hourly_csv(csv_bytes(row(), row(hour="14:00"), row(hour="15:00"),
                                         row(value="NA", hour="16:00")), O3)
        assert len(res.observations) == 3
        assert res.skipped == 1

    def test_text_stream_and_bom(self):
        text = io.StringIO("﻿" + HEADER + "\n" + row() + "\n")
        assert len(parse_hourly_csv(text, O3).observations) == 1

    def test_other_parameter_rows_ignored(self):
        res = parse_hourly_csv(csv_bytes(row(), row(code="42602")), O3)
        assert len(res.observations) == 1 and res.skipped == 0

    def test_site_predicate(self):
        res = parse_hourly_csv(csv_bytes(row(site="0002"), row(site="0003")), O3,
                               keep=lambda k: k.endswith("0003"))
        assert [o.site_key for o in res.observations] == ["06-037-0003"]

    def test_bad_hour_skipped(self):
        res = parse_hourly_csv(csv_bytes(row(hour="24:00")), O3)
        assert res.observations == [] and res.skipped == 1


class TestQC:
    def test_negative_dropped(self):
        assert apply_qc([obs(value=-0.002)]) == []

    def test_lowest_poc_kept(self):
        kept = apply_qc([obs(poc=2, value=0.05), obs(poc=1, value=0.04)])
        assert [(o.poc, o.value) for o in kept] == [(1, 0.04)]

    def test_clean_row_unchanged(self):
        o = obs()
        assert apply_qc([o]) == [o]

    def test_flagged_dropped(self):
        assert apply_qc([obs(qualifier="V")]) == []

    def test_wrong_units_dropped(self):
        assert apply_qc([obs(units="Parts per billion")]) == []

    def test_zero_kept(self):
        assert len(apply_qc([obs(value=0.0)])) == 1


class TestPivot:
    def test_partial_fill(self):
        (r,) = pivot_records([obs(O3, 0.04), obs(NO2, 12.0)])
        assert (r.o3, r.no2, r.co, r.pm25) == (0.04, 12.0, None, None)

    def test_single_observation(self):
        (r,) = pivot_records([obs(O3, 0.04)])
        values = [r.o3, r.no2, r.co, r.pm25]
        assert sum(v is not None for v in values) == 1

    def test_two_hours_two_records(self):
        recs = pivot_records([obs(hour=14), obs(hour=13)])
        assert [r.hour_local for r in recs] == [13, 14]

    def test_coordinate_conflict_warns_first_wins(self, caplog):
        with caplog.at_level(logging.WARNING):
            (r,) = pivot_records([obs(NO2, 10.0, lat=34.0), obs(O3, 0.04, lat=34.01)])
        assert r.latitude == 34.0
        assert "conflicting coordinates" in caplog.text


def _site_records(site, hours_present, span_hours, start=date(2024, 1, 1)):
    out = []
    for h in range(span_hours):
        d = start + timedelta(days=h // 24)
        out.append(HourlyRecord(site, 34.0, -118.0, d, h % 24,
                                o3=0.04 if h in hours_present else None, no2=10.0))
    return out


class TestCoverage:
    SPAN = (date(2024, 1, 1), date(2024, 1, 2))  # 48 hours

    def test_full_site_kept(self):
        recs = _site_records("A", set(range(48)), 48)
        assert len(filter_coverage(recs, 0.75, self.SPAN)) == 48

    def test_half_site_dropped(self):
        recs = _site_records("A", set(range(0, 48, 2)), 48)
        assert filter_coverage(recs, 0.75, self.SPAN) == []

    def test_three_sites_brute_force(self):
        # spans are whole local days, so five days (120 hours) stand in for ~100
        span = (date(2024, 1, 1), date(2024, 1, 5))
        total = 120
        coverages = {"A": 0.9, "B": 0.8, "C": 0.1}
        recs = []
        for site, c in coverages.items():
            recs += _site_records(site, set(range(round(c * total))), total)
        kept = {r.site_key for r in filter_coverage(recs, 0.75, span)}
        expected = {s for s in coverages
                    if sum(r.o3 is not None for r in recs if r.site_key == s) / total >= 0.75}
        assert kept == expected == {"A", "B"}

    def test_empty_span_fatal(self):
        with pytest.raises(ValueError):
            filter_coverage([], 0.75, (date(2024, 1, 2), date(2024, 1, 1)))

    def test_default_span_from_records(self):
        recs = _site_records("A", set(range(48)), 48)
        assert len(filter_coverage(recs, 0.75)) == 48


class _Resp:
    def __init__(self, status, content=b""):
        self.status_code = status
        self.content = content


class _Session:
    def __init__(self, resp):
        self.resp = resp
        self.urls = []

    def get(self, url, timeout=None):
        self.urls.append(url)
        return self.resp


def _zip_payload(text="a,b\n1,2\n", name="hourly_44201_2024.csv"):
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr(name, text)
    return buf.getvalue()


class TestDownload:
    def test_url_and_extract(self, tmp_path):
        s = _Session(_Resp(200, _zip_payload()))
        path = download_airdata(44201, 2024, tmp_path, session=s)
        assert s.urls == ["https://aqs.epa.gov/aqsweb/airdata/hourly_44201_2024.zip"]
        assert path.read_text() == "a,b\n1,2\n"

    def test_idempotent(self, tmp_path):
        (tmp_path / "hourly_44201_2024.csv").write_text("x")
        s = _Session(_Resp(500))
        assert download_airdata(44201, 2024, tmp_path, session=s).read_text() == "x"
        assert s.urls == []

    def test_http_404_retryable(self, tmp_path):
        with pytest.raises(DownloadError) as exc:
            download_airdata(44201, 2024, tmp_path, session=_Session(_Resp(404)))
        assert exc.value.status == 404 and exc.value.retryable

    def test_non_zip_fatal(self, tmp_path):
        with pytest.raises(DownloadError) as exc:
            download_airdata(44201, 2024, tmp_path, session=_Session(_Resp(200, b"<html>")))
        assert not exc.value.retryable


def test_records_roundtrip(tmp_path):
    recs = [HourlyRecord("06-037-0002", 34.1, -118.2, date(2024, 7, 1), 5, 0.04, None, 0.3, 8.5)]
    p = tmp_path / "records.csv"
    ingest.write_records(recs, p)
    assert ingest.read_records(p) == recs


def test_ingest_files_end_to_end(tmp_path):
    paths = {}
    for code, value, units in ((O3, "0.041", "Parts per million"),
                               (NO2, "12.5", "Parts per billion"),
                               (CO, "0.3", "Parts per million"),
                               (PM25, "9.1", "Micrograms/cubic meter (LC)")):
        p = tmp_path / f"hourly_{code}_2024.csv"
        p.write_bytes(csv_bytes(row(value=value, code=str(code), units=units)).getvalue())
        paths[code] = [p]
    recs, skipped = ingest.ingest_files(paths)
    assert skipped == 0
    (r,) = recs
    assert (r.o3, r.no2, r.co, r.pm25) == (0.041, 12.5, 0.3, 9.1)
