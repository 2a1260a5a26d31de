"""Parsing and validation of the five canonical input tables.

Every table is comma-separated UTF-8 text with a mandatory header row.
Row-level problems are collected as :class:`Diagnostic` records instead of
being raised, so a single pass reports everything that is wrong with a file.
Processing aborts with :class:`TooManyDiagnostics` once ``max_diagnostics``
is exceeded.

File layouts::

    venues.csv       venue_id,lat,lon,category,created_at[,area_id]
    transitions.csv  from_venue,to_venue,occurred_at[,count]
    imd.csv          area_id,level,imd_2010,imd_2015[,parent_id]
    expenditure.csv  area_id,fiscal_year,cultural_expenditure,total_expenditure
    polygons.csv     area_id,vertices    (vertices = "lat lon;lat lon;...")
"""

from __future__ import annotations

import csv
import io
import math
import os
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import BinaryIO, Iterable, Iterator, Sequence, Union

DEFAULT_MAX_DIAGNOSTICS = 1000

Source = Union[bytes, str, os.PathLike, BinaryIO]
LatLon = tuple[float, float]

VENUE_FIELDS = ("venue_id", "lat", "lon", "category", "created_at")
TRANSITION_FIELDS = ("from_venue", "to_venue", "occurred_at")
IMD_FIELDS = ("area_id", "level", "imd_2010", "imd_2015")
EXPENDITURE_FIELDS = ("area_id", "fiscal_year", "cultural_expenditure", "total_expenditure")
POLYGON_FIELDS = ("area_id", "vertices")

AREA_LEVELS = ("ward", "borough")
_FY_RE = re.compile(r"^(\d{4})/(\d{2})$")


class IngestError(Exception):
    """Raised when an input cannot be processed at all."""


class TooManyDiagnostics(IngestError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__(f"aborted after {len(diagnostics)} diagnostics")


@dataclass(frozen=True)
class Diagnostic:
    source: str
    line: int | None
    field: str | None
    message: str
    level: str = "row"  # row | dataset | profile

    def __str__(self) -> str:
        where = self.source
        if self.line is not None:
            where += f":{self.line}"
        if self.field:
            where += f" [{self.field}]"
        return f"{where}: {self.message}"

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "line": self.line,
            "field": self.field,
            "level": self.level,
            "message": self.message,
        }


@dataclass(frozen=True)
class Venue:
    venue_id: str
    lat: float
    lon: float
    category: str
    created_at: datetime
    area_id: str | None = None


@dataclass(frozen=True)
class Transition:
    from_venue: str
    to_venue: str
    occurred_at: datetime
    count: int = 1


@dataclass(frozen=True)
class AreaProfile:
    area_id: str
    level: str
    imd_2010: float
    imd_2015: float
    ce_by_fy: dict[str, float]
    te_by_fy: dict[str, float]
    polygon: tuple[LatLon, ...]
    parent_id: str | None = None

    def ratio(self, fiscal_year: str | None = None) -> tuple[float, float]:
        """Cultural and total expenditure for one fiscal year, or pooled over all."""
        if fiscal_year is None:
            years = sorted(self.te_by_fy)
            return (
                math.fsum(self.ce_by_fy[y] for y in years),
                math.fsum(self.te_by_fy[y] for y in years),
            )
        return self.ce_by_fy[fiscal_year], self.te_by_fy[fiscal_year]


@dataclass
class ParseResult:
    records: list
    diagnostics: list[Diagnostic] = field(default_factory=list)
    data_rows: int = 0

    @property
    def ok(self) -> bool:
        return not self.diagnostics


@dataclass
class AreaTables:
    profiles: list[AreaProfile]
    diagnostics: list[Diagnostic] = field(default_factory=list)
    missing: dict[str, list[str]] = field(default_factory=dict)


class _Collector:
    def __init__(self, source: str, cap: int, items: list[Diagnostic] | None = None):
        self.source = source
        self.cap = cap
        self.items = [] if items is None else items

    def add(self, line, fld, message, level="row"):
        self.items.append(Diagnostic(self.source, line, fld, message, level))
        if len(self.items) > self.cap:
            raise TooManyDiagnostics(self.items)


class _RowError(Exception):
    def __init__(self, fld: str | None, message: str):
        self.field = fld
        super().__init__(message)


# ---------------------------------------------------------------------------
# low-level helpers
# ---------------------------------------------------------------------------

def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        data = source
    elif isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise IngestError(f"input is not valid UTF-8: {exc}") from None
    return text.lstrip("\ufeff")


def _source_name(source: Source, default: str) -> str:
    if isinstance(source, (str, os.PathLike)):
        return os.path.basename(os.fspath(source))
    return default


def _rows(text: str, required: Sequence[str], source: str) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, row)`` for each data row; header is line 1."""
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError(f"{source}: missing header row") from None
    header = [h.strip() for h in header]
    missing = [c for c in required if c not in header]
    if missing:
        raise IngestError(f"{source}: header lacks required column(s) {', '.join(missing)}")
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            yield line, {"__bad__": f"expected {len(header)} fields, found {len(row)}"}
            continue
        yield line, {h: c.strip() for h, c in zip(header, row)}


def _float(row: dict, name: str) -> float:
    raw = row.get(name, "")
    try:
        value = float(raw)
    except ValueError:
        raise _RowError(name, f"not a number: {raw!r}") from None
    if not math.isfinite(value):
        raise _RowError(name, f"not finite: {raw!r}")
    return value


def _required(row: dict, name: str) -> str:
    value = row.get(name, "")
    if not value:
        raise _RowError(name, "empty value")
    return value


def parse_timestamp(raw: str) -> datetime:
    """Parse an ISO-8601 timestamp and normalise it to aware UTC.

    A trailing ``Z`` is accepted; naive values are taken to be UTC.
    """
    text = raw.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    ts = ts.astimezone(timezone.utc)
    if ts.microsecond:
        return ts.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def _timestamp(row: dict, name: str) -> datetime:
    raw = _required(row, name)
    try:
        return parse_timestamp(raw)
    except ValueError:
        raise _RowError(name, f"unparseable timestamp: {raw!r}") from None


def parse_fiscal_year(label: str) -> int:
    """Return the starting calendar year of a ``YYYY/YY`` fiscal-year label."""
    m = _FY_RE.match(label.strip())
    if not m:
        raise ValueError(f"fiscal year must look like 2010/11, got {label!r}")
    start = int(m.group(1))
    if int(m.group(2)) != (start + 1) % 100:
        raise ValueError(f"fiscal year {label!r} does not span consecutive years")
    return start


def parse_vertices(raw: str) -> tuple[LatLon, ...]:
    """Parse ``"lat lon;lat lon;..."``; a repeated closing vertex is dropped."""
    ring: list[LatLon] = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split()
        if len(parts) != 2:
            raise ValueError(f"vertex {chunk!r} is not a 'lat lon' pair")
        lat, lon = float(parts[0]), float(parts[1])
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise ValueError(f"vertex {chunk!r} is not finite")
        if not (-90 <= lat <= 90 and -180 <= lon <= 180):
            raise ValueError(f"vertex {chunk!r} out of coordinate range")
        ring.append((lat, lon))
    if len(ring) > 1 and ring[0] == ring[-1]:
        ring.pop()
    return tuple(ring)


def format_vertices(ring: Iterable[LatLon]) -> str:
    return ";".join(f"{float(lat)!r} {float(lon)!r}" for lat, lon in ring)


# ---------------------------------------------------------------------------
# venues / transitions
# ---------------------------------------------------------------------------

def parse_venues(source: Source, *, max_diagnostics: int = DEFAULT_MAX_DIAGNOSTICS) -> ParseResult:
    """Parse ``venues.csv`` into :class:`Venue` records, preserving row order.

    Malformed rows become positioned diagnostics. A repeated ``venue_id`` is a
    dataset-level diagnostic: the first occurrence is kept and later ones are
    rejected.
    """
    name = _source_name(source, "venues.csv")
    text = _read_text(source)
    diag = _Collector(name, max_diagnostics)
    venues: list[Venue] = []
    first_seen: dict[str, int] = {}
    n_rows = 0
    for line, row in _rows(text, VENUE_FIELDS, name):
        n_rows += 1
        if "__bad__" in row:
            diag.add(line, None, row["__bad__"])
            continue
        try:
            vid = _required(row, "venue_id")
            lat = _float(row, "lat")
            if not -90 <= lat <= 90:
                raise _RowError("lat", f"latitude {lat} outside [-90, 90]")
            lon = _float(row, "lon")
            if not -180 <= lon <= 180:
                raise _RowError("lon", f"longitude {lon} outside [-180, 180]")
            category = row.get("category", "")
            created = _timestamp(row, "created_at")
            area = row.get("area_id") or None
        except _RowError as err:
            diag.add(line, err.field, str(err))
            continue
        if vid in first_seen:
            diag.add(line, "venue_id", f"duplicate venue_id {vid!r} (first on line {first_seen[vid]})",
                     level="dataset")
            continue
        first_seen[vid] = line
        venues.append(Venue(vid, lat, lon, category, created, area))
    return ParseResult(venues, diag.items, n_rows)


def parse_transitions(
    source: Source,
    venue_index: Iterable[str],
    *,
    max_diagnostics: int = DEFAULT_MAX_DIAGNOSTICS,
) -> ParseResult:
    """Parse ``transitions.csv``; self-loops and unknown venues are rejected."""
    name = _source_name(source, "transitions.csv")
    text = _read_text(source)
    known = venue_index if isinstance(venue_index, (set, frozenset, dict)) else set(venue_index)
    diag = _Collector(name, max_diagnostics)
    out: list[Transition] = []
    n_rows = 0
    for line, row in _rows(text, TRANSITION_FIELDS, name):
        n_rows += 1
        if "__bad__" in row:
            diag.add(line, None, row["__bad__"])
            continue
        try:
            src = _required(row, "from_venue")
            dst = _required(row, "to_venue")
            if src not in known:
                raise _RowError("from_venue", f"unknown venue {src!r}")
            if dst not in known:
                raise _RowError("to_venue", f"unknown venue {dst!r}")
            if src == dst:
                raise _RowError("to_venue", f"self-loop on venue {src!r}")
            when = _timestamp(row, "occurred_at")
            raw_count = row.get("count") or "1"
            try:
                count = int(raw_count)
            except ValueError:
                raise _RowError("count", f"not an integer: {raw_count!r}") from None
            if count < 1:
                raise _RowError("count", f"count must be >= 1, got {count}")
        except _RowError as err:
            diag.add(line, err.field, str(err))
            continue
        out.append(Transition(src, dst, when, count))
    return ParseResult(out, diag.items, n_rows)


# ---------------------------------------------------------------------------
# area tables
# ---------------------------------------------------------------------------

def parse_area_tables(
    imd_source: Source,
    expenditure_source: Source,
    polygon_source: Source,
    *,
    max_diagnostics: int = DEFAULT_MAX_DIAGNOSTICS,
) -> AreaTables:
    """Join IMD, expenditure and polygon tables on ``area_id``.

    Areas absent from any table get no profile and are listed in
    ``missing`` with the names of the tables they lack. Profile-level
    problems (zero total expenditure, cultural spend above total, bad
    polygon) drop the area with a diagnostic.
    """
    from .geometry import GeometryError, validate_ring

    imd_name = _source_name(imd_source, "imd.csv")
    exp_name = _source_name(expenditure_source, "expenditure.csv")
    poly_name = _source_name(polygon_source, "polygons.csv")
    items: list[Diagnostic] = []

    # IMD
    c = _Collector(imd_name, max_diagnostics, items)
    imd: dict[str, tuple] = {}
    for line, row in _rows(_read_text(imd_source), IMD_FIELDS, imd_name):
        if "__bad__" in row:
            c.add(line, None, row["__bad__"])
            continue
        try:
            aid = _required(row, "area_id")
            level = row["level"].lower()
            if level not in AREA_LEVELS:
                raise _RowError("level", f"level must be ward or borough, got {row['level']!r}")
            s10 = _float(row, "imd_2010")
            s15 = _float(row, "imd_2015")
            for fld, v in (("imd_2010", s10), ("imd_2015", s15)):
                if v < 0:
                    raise _RowError(fld, f"negative IMD score {v}")
        except _RowError as err:
            c.add(line, err.field, str(err))
            continue
        if aid in imd:
            c.add(line, "area_id", f"duplicate area_id {aid!r}", level="dataset")
            continue
        imd[aid] = (level, s10, s15, row.get("parent_id") or None)

    # expenditure
    c = _Collector(exp_name, max_diagnostics, items)
    ce: dict[str, dict[str, float]] = {}
    te: dict[str, dict[str, float]] = {}
    for line, row in _rows(_read_text(expenditure_source), EXPENDITURE_FIELDS, exp_name):
        if "__bad__" in row:
            c.add(line, None, row["__bad__"])
            continue
        try:
            aid = _required(row, "area_id")
            fy = _required(row, "fiscal_year")
            try:
                parse_fiscal_year(fy)
            except ValueError as exc:
                raise _RowError("fiscal_year", str(exc)) from None
            cult = _float(row, "cultural_expenditure")
            total = _float(row, "total_expenditure")
            if cult < 0:
                raise _RowError("cultural_expenditure", f"negative expenditure {cult}")
            if total < 0:
                raise _RowError("total_expenditure", f"negative expenditure {total}")
        except _RowError as err:
            c.add(line, err.field, str(err))
            continue
        if fy in te.get(aid, {}):
            c.add(line, "fiscal_year", f"duplicate expenditure row for {aid!r} {fy}", level="dataset")
            continue
        ce.setdefault(aid, {})[fy] = cult
        te.setdefault(aid, {})[fy] = total

    # polygons
    c = _Collector(poly_name, max_diagnostics, items)
    rings: dict[str, tuple[LatLon, ...]] = {}
    bad_polygon: set[str] = set()
    for line, row in _rows(_read_text(polygon_source), POLYGON_FIELDS, poly_name):
        if "__bad__" in row:
            c.add(line, None, row["__bad__"])
            continue
        aid = row["area_id"]
        if not aid:
            c.add(line, "area_id", "empty value")
            continue
        if aid in rings or aid in bad_polygon:
            c.add(line, "area_id", f"duplicate polygon for {aid!r}", level="dataset")
            continue
        try:
            ring = parse_vertices(row["vertices"])
            validate_ring(ring)
        except (ValueError, GeometryError) as exc:
            bad_polygon.add(aid)
            c.add(line, "vertices", f"unparseable polygon for {aid!r}: {exc}", level="profile")
            continue
        rings[aid] = ring

    profiles: list[AreaProfile] = []
    missing: dict[str, list[str]] = {}
    for aid in sorted(set(imd) | set(te) | set(rings) | bad_polygon):
        lacks = [n for n, tbl in (("imd", imd), ("expenditure", te), ("polygons", rings))
                 if aid not in tbl]
        if aid in bad_polygon:
            lacks = [t for t in lacks if t != "polygons"]
        if lacks:
            missing[aid] = lacks
            continue
        if aid in bad_polygon:
            continue
        problems = []
        for fy in sorted(te[aid]):
            if te[aid][fy] == 0:
                problems.append(f"total expenditure is zero for {fy}; CEA undefined")
            elif ce[aid][fy] > te[aid][fy]:
                problems.append(f"cultural expenditure exceeds total for {fy}")
        if problems:
            for p in problems:
                c.add(None, "total_expenditure", f"{aid}: {p}", level="profile")
            continue
        level, s10, s15, parent = imd[aid]
        profiles.append(AreaProfile(aid, level, s10, s15, dict(ce[aid]), dict(te[aid]),
                                    rings[aid], parent))
    return AreaTables(profiles, items, missing)


# ---------------------------------------------------------------------------
# serialisation (canonical format, used by the generator and round-trip tests)
# ---------------------------------------------------------------------------

def _write(header: Sequence[str], rows: Iterable[Sequence]) -> bytes:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode("utf-8")


def write_venues(venues: Iterable[Venue]) -> bytes:
    return _write(
        VENUE_FIELDS + ("area_id",),
        ((v.venue_id, repr(float(v.lat)), repr(float(v.lon)), v.category, format_timestamp(v.created_at),
          v.area_id or "") for v in venues),
    )


def write_transitions(transitions: Iterable[Transition]) -> bytes:
    return _write(
        TRANSITION_FIELDS + ("count",),
        ((t.from_venue, t.to_venue, format_timestamp(t.occurred_at), t.count) for t in transitions),
    )


def write_imd(profiles: Iterable[AreaProfile]) -> bytes:
    return _write(
        IMD_FIELDS + ("parent_id",),
        ((p.area_id, p.level, repr(float(p.imd_2010)), repr(float(p.imd_2015)), p.parent_id or "")
         for p in profiles),
    )


def write_expenditure(profiles: Iterable[AreaProfile]) -> bytes:
    return _write(
        EXPENDITURE_FIELDS,
        ((p.area_id, fy, repr(float(p.ce_by_fy[fy])), repr(float(p.te_by_fy[fy])))
         for p in profiles for fy in sorted(p.te_by_fy)),
    )


def write_polygons(profiles: Iterable[AreaProfile]) -> bytes:
    return _write(POLYGON_FIELDS, ((p.area_id, format_vertices(p.polygon)) for p in profiles))
