"""Parse, quality-control and pivot EPA AirData hourly files.

The AirData "hourly_<code>_<year>" archives contain one long-format row per
monitor-hour.  The functions here turn them into one wide row per site-hour
with native units kept (O3 and CO in ppm, NO2 in ppb, PM2.5 in ug/m3).
"""

from __future__ import annotations

import csv
import io
import logging
import zipfile
from collections import defaultdict
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import IO, Callable, Iterable, Sequence

import requests

log = logging.getLogger(__name__)

O3, NO2, CO, PM25 = 44201, 42602, 42101, 88101
PARAMETER_SLOTS = {O3: "o3", NO2: "no2", CO: "co", PM25: "pm25"}
EXPECTED_UNITS = {
    O3: "Parts per million",
    NO2: "Parts per billion",
    CO: "Parts per million",
    PM25: "Micrograms/cubic meter (LC)",
}
REQUIRED_COLUMNS = (
    "State Code",
    "County Code",
    "Site Num",
    "Parameter Code",
    "POC",
    "Latitude",
    "Longitude",
    "Date Local",
    "Time Local",
    "Sample Measurement",
    "Units of Measure",
    "Qualifier",
)
AIRDATA_URL = "https://aqs.epa.gov/aqsweb/airdata/hourly_{code}_{year}.zip"
RECORD_COLUMNS = ("site_key", "latitude", "longitude", "date_local", "hour_local",
                  "o3", "no2", "co", "pm25")
COORD_TOLERANCE = 1e-4


class FormatError(ValueError):
    """Input file does not follow the AirData hourly layout."""


class DownloadError(RuntimeError):
    """HTTP failure while fetching an archive; ``retryable`` marks transient cases."""

    def __init__(self, message: str, status: int | None = None, retryable: bool = True):
        super().__init__(message)
        self.status = status
        self.retryable = retryable


@dataclass(frozen=True, slots=True)
class RawObservation:
    site_key: str
    parameter_code: int
    poc: int
    latitude: float
    longitude: float
    date_local: date
    hour_local: int
    value: float
    units: str = ""
    qualifier: str = ""


@dataclass(frozen=True, slots=True)
class HourlyRecord:
    site_key: str
    latitude: float
    longitude: float
    date_local: date
    hour_local: int
    o3: float | None = None
    no2: float | None = None
    co: float | None = None
    pm25: float | None = None

    @property
    def key(self) -> tuple[str, date, int]:
        return (self.site_key, self.date_local, self.hour_local)


@dataclass
class ParseResult:
    observations: list[RawObservation]
    skipped: int = 0


def make_site_key(state: str, county: str, site: str) -> str:
    return f"{int(state):02d}-{int(county):03d}-{int(site):04d}"


def _parse_hour(text: str) -> int:
    hh, _, mm = text.strip().partition(":")
    hour = int(hh)
    if not 0 <= hour <= 23 or (mm and not mm.isdigit()):
        raise ValueError(f"bad Time Local {text!r}")
    return hour


def parse_hourly_csv(
    stream: IO[bytes] | IO[str],
    parameter_code: int,
    keep: Callable[[str], bool] | None = None,
) -> ParseResult:
    """Read an AirData hourly CSV into observations of one parameter.

    ``keep`` is an optional site-key predicate applied while streaming, so a
    national archive can be reduced to a metro area without holding it all.
    Rows whose numeric fields do not parse are skipped and counted.
    """
    if parameter_code not in PARAMETER_SLOTS:
        raise ValueError(f"unsupported parameter code {parameter_code}")
    text = io.TextIOWrapper(stream, encoding="utf-8", newline="") if _is_binary(stream) else stream
    reader = csv.reader(text)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("empty file: no header row") from None
    header = [h.strip().lstrip("﻿") for h in header]
    col = {name: i for i, name in enumerate(header)}
    for name in REQUIRED_COLUMNS:
        if name not in col:
            raise FormatError(f"missing required column {name!r}")

    out: list[RawObservation] = []
    skipped = 0
    ix = [col[name] for name in REQUIRED_COLUMNS]
    width = max(ix) + 1
    for row in reader:
        if not row:
            continue
        if len(row) < width:
            skipped += 1
            continue
        (state, county, site, pcode, poc, lat, lon, day, hour, value, units, qual) = (
            row[i] for i in ix
        )
        try:
            if int(pcode) != parameter_code:
                continue
            site_key = make_site_key(state, county, site)
            if keep is not None and not keep(site_key):
                continue
            obs = RawObservation(
                site_key=site_key,
                parameter_code=parameter_code,
                poc=int(poc),
                latitude=float(lat),
                longitude=float(lon),
                date_local=date.fromisoformat(day.strip()),
                hour_local=_parse_hour(hour),
                value=float(value),
                units=units.strip(),
                qualifier=qual.strip(),
            )
        except ValueError:
            skipped += 1
            continue
        if not (-90 <= obs.latitude <= 90 and -180 <= obs.longitude <= 180):
            skipped += 1
            continue
        out.append(obs)
    if skipped:
        log.info("parameter %d: skipped %d unparseable rows", parameter_code, skipped)
    return ParseResult(out, skipped)


def _is_binary(stream) -> bool:
    return isinstance(stream, (io.RawIOBase, io.BufferedIOBase)) or "b" in getattr(stream, "mode", "")


def apply_qc(obs: Iterable[RawObservation]) -> list[RawObservation]:
    """Drop negative, flagged and wrong-unit rows; keep the lowest POC per site-hour."""
    valid = [
        o for o in obs
        if o.value >= 0 and not o.qualifier and o.units == EXPECTED_UNITS.get(o.parameter_code)
    ]
    best: dict[tuple, int] = {}
    for o in valid:
        key = (o.site_key, o.parameter_code, o.date_local, o.hour_local)
        if key not in best or o.poc < best[key]:
            best[key] = o.poc
    seen: set[tuple] = set()
    out = []
    for o in valid:
        key = (o.site_key, o.parameter_code, o.date_local, o.hour_local)
        # a monitor can repeat the same POC; keep its first row
        if o.poc == best[key] and key not in seen:
            seen.add(key)
            out.append(o)
    return out


def pivot_records(obs: Iterable[RawObservation]) -> list[HourlyRecord]:
    """Join QC'd observations into one wide record per (site, date, hour).

    Output is sorted by site key then timestamp.  Coordinates come from the
    group's first observation in input order.
    """
    groups: dict[tuple[str, date, int], list[RawObservation]] = defaultdict(list)
    for o in obs:
        groups[(o.site_key, o.date_local, o.hour_local)].append(o)

    records = []
    for key in sorted(groups):
        members = groups[key]
        anchor = members[0]
        slots: dict[str, float] = {}
        for o in members:
            if (abs(o.latitude - anchor.latitude) > COORD_TOLERANCE
                    or abs(o.longitude - anchor.longitude) > COORD_TOLERANCE):
                log.warning("conflicting coordinates at %s %s %02d:00; using %.5f,%.5f",
                            key[0], key[1], key[2], anchor.latitude, anchor.longitude)
            slots.setdefault(PARAMETER_SLOTS[o.parameter_code], o.value)
        records.append(HourlyRecord(key[0], anchor.latitude, anchor.longitude, key[1], key[2], **slots))
    return records


def span_hours(span: tuple[date, date]) -> int:
    start, end = span
    days = (end - start).days + 1
    if days <= 0:
        raise ValueError(f"empty span {start}..{end}")
    return days * 24


def filter_coverage(
    records: Sequence[HourlyRecord],
    min_fraction: float = 0.75,
    span: tuple[date, date] | None = None,
) -> list[HourlyRecord]:
    """Keep records from sites with non-missing O3 in at least ``min_fraction`` of span hours.

    ``span`` is inclusive on both ends; by default it runs from the earliest
    to the latest date in ``records``.
    """
    if not 0 < min_fraction <= 1:
        raise ValueError("min_fraction must lie in (0, 1]")
    if span is None:
        if not records:
            raise ValueError("empty span: no records and no span given")
        span = (min(r.date_local for r in records), max(r.date_local for r in records))
    total = span_hours(span)
    start, end = span
    counts: dict[str, int] = defaultdict(int)
    for r in records:
        if r.o3 is not None and start <= r.date_local <= end:
            counts[r.site_key] += 1
    keep = {site for site, n in counts.items() if n >= min_fraction * total}
    dropped = sorted(set(r.site_key for r in records) - keep)
    if dropped:
        log.info("coverage filter dropped %d sites: %s", len(dropped), ", ".join(dropped))
    return [r for r in records if r.site_key in keep]


def site_filter(allowlist: Sequence[str] | None = None, state: str = "06",
                county: str = "037") -> Callable[[str], bool]:
    """Site-key predicate: an explicit allowlist, otherwise a state/county pair."""
    if allowlist:
        allowed = frozenset(allowlist)
        return allowed.__contains__
    prefix = f"{int(state):02d}-{int(county):03d}-"
    return lambda key: key.startswith(prefix)


def download_airdata(parameter_code: int, year: int, dest: str | Path,
                     session: requests.Session | None = None, timeout: float = 120.0) -> Path:
    """Fetch and extract one AirData hourly archive; a no-op if the CSV exists."""
    dest = Path(dest)
    csv_path = dest / f"hourly_{parameter_code}_{year}.csv"
    if csv_path.exists():
        return csv_path
    url = AIRDATA_URL.format(code=parameter_code, year=year)
    http = session or requests.Session()
    log.info("GET %s", url)
    try:
        resp = http.get(url, timeout=timeout)
    except requests.RequestException as exc:
        raise DownloadError(f"{url}: {exc}") from exc
    if resp.status_code != 200:
        raise DownloadError(f"{url}: HTTP {resp.status_code}", status=resp.status_code)
    payload = resp.content
    if not zipfile.is_zipfile(io.BytesIO(payload)):
        raise DownloadError(f"{url}: payload is not a ZIP archive", retryable=False)
    with zipfile.ZipFile(io.BytesIO(payload)) as zf:
        members = [n for n in zf.namelist() if n.lower().endswith(".csv")]
        if len(members) != 1:
            raise DownloadError(f"{url}: expected one CSV in archive, found {len(members)}",
                                retryable=False)
        dest.mkdir(parents=True, exist_ok=True)
        tmp = csv_path.with_suffix(".csv.part")
        with zf.open(members[0]) as src, open(tmp, "wb") as dst:
            while chunk := src.read(1 << 20):
                dst.write(chunk)
        tmp.replace(csv_path)
    return csv_path


def _fmt(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def write_records(records: Iterable[HourlyRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([r.site_key, repr(r.latitude), repr(r.longitude), r.date_local.isoformat(),
                        r.hour_local, _fmt(r.o3), _fmt(r.no2), _fmt(r.co), _fmt(r.pm25)])


def read_records(path: str | Path) -> list[HourlyRecord]:
    def opt(s: str) -> float | None:
        return float(s) if s != "" else None

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != RECORD_COLUMNS:
            raise FormatError(f"{path}: expected header {','.join(RECORD_COLUMNS)}")
        return [
            HourlyRecord(row[0], float(row[1]), float(row[2]), date.fromisoformat(row[3]),
                         int(row[4]), opt(row[5]), opt(row[6]), opt(row[7]), opt(row[8]))
            for row in reader if row
        ]


def ingest_files(paths: dict[int, Sequence[Path]], keep: Callable[[str], bool] | None = None
                 ) -> tuple[list[HourlyRecord], int]:
    """parse -> qc -> pivot over a set of per-parameter files; returns records and skip count."""
    obs: list[RawObservation] = []
    skipped = 0
    for code in sorted(paths):
        for p in paths[code]:
            with open(p, "rb") as fh:
                res = parse_hourly_csv(fh, code, keep=keep)
            obs.extend(res.observations)
            skipped += res.skipped
    return pivot_records(apply_qc(obs)), skipped


def year_span(years: Sequence[int]) -> tuple[date, date]:
    return date(min(years), 1, 1), date(max(years), 12, 31)

