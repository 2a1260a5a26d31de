"""Per-area features: venue resolution, flow centralities, CEA and CVA."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping, Sequence

from .geometry import (GeometryError, bounding_box, point_in_polygon,  # noqa: F401
                       polygon_area_km2)
from .graph import SnapshotGraph, clustering_by_node
from .ingest import AreaProfile, Diagnostic, Venue

log = logging.getLogger(__name__)

DENSITY_MODES = ("per_km2", "per_venue")


class AdvantageError(ValueError):
    """A cultural advantage ratio is undefined for the given inputs."""


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class AreaSnapshotMetrics:
    area_id: str
    t: int
    node_number: int
    venue_created_number: int
    venue_created_density: float
    in_degree_centrality: float
    out_degree_centrality: float
    avg_clustering: float


@dataclass(frozen=True)
class CulturalAdvantage:
    area_id: str
    cea: float | None = None
    cva: float | None = None


@dataclass
class Resolution:
    mapping: dict[str, str]
    unassigned: list[str] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)


def load_cultural_categories(path=None) -> frozenset[str]:
    """Read a category file (one tag per line, ``#`` comments allowed).

    Without a path the bundled 58-tag default is used.
    """
    if path is None:
        text = resources.files("geoculture").joinpath("data/cultural_categories.txt") \
            .read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    tags = (ln.strip() for ln in text.splitlines())
    return frozenset(t for t in tags if t and not t.startswith("#"))


def resolve_areas(venues: Iterable[Venue], profiles: Iterable[AreaProfile]) -> Resolution:
    """Map each venue to an area.

    An explicit ``venue.area_id`` takes precedence over geometry. A venue
    inside several polygons goes to the lowest ``area_id`` with a diagnostic.
    """
    polys = sorted(((p.area_id, p.polygon, bounding_box(p.polygon)) for p in profiles),
                   key=lambda item: item[0])
    known = {aid for aid, _, _ in polys}
    res = Resolution({})
    for v in venues:
        if v.area_id is not None:
            res.mapping[v.venue_id] = v.area_id
            if v.area_id not in known:
                res.diagnostics.append(Diagnostic(
                    "areas", None, "area_id",
                    f"venue {v.venue_id!r} names unknown area {v.area_id!r}"))
            continue
        hits = [aid for aid, ring, (lo_lat, lo_lon, hi_lat, hi_lon) in polys
                if lo_lat <= v.lat <= hi_lat and lo_lon <= v.lon <= hi_lon
                and point_in_polygon((v.lat, v.lon), ring)]
        if not hits:
            res.unassigned.append(v.venue_id)
            res.diagnostics.append(Diagnostic(
                "areas", None, None, f"venue {v.venue_id!r} lies in no area polygon"))
            continue
        if len(hits) > 1:
            res.diagnostics.append(Diagnostic(
                "areas", None, None,
                f"venue {v.venue_id!r} lies in {len(hits)} polygons ({', '.join(hits)}); "
                f"assigned to {hits[0]!r}"))
        res.mapping[v.venue_id] = hits[0]
    return res


def area_flow_centralities(
    g: SnapshotGraph,
    assignment: Mapping[str, str],
    areas: Iterable[str] = (),
    diagnostics: list[Diagnostic] | None = None,
) -> dict[str, tuple[int, int]]:
    """Weighted transitions crossing each area boundary as ``(in, out)``.

    Edges inside one area count for neither direction. Edges touching an
    unassigned node are skipped.
    """
    inflow: dict[str, int] = {a: 0 for a in areas}
    outflow: dict[str, int] = {a: 0 for a in areas}
    missing = sorted(v for v in g.nodes if v not in assignment)
    if missing and diagnostics is not None:
        for v in missing:
            diagnostics.append(Diagnostic(
                "areas", None, None, f"snapshot t={g.t}: node {v!r} has no area; its edges are ignored"))
    for (u, v), w in g.edges.items():
        au = assignment.get(u)
        av = assignment.get(v)
        if au is None or av is None or au == av:
            continue
        outflow[au] = outflow.get(au, 0) + w
        inflow[av] = inflow.get(av, 0) + w
    keys = sorted(set(inflow) | set(outflow))
    return {a: (inflow.get(a, 0), outflow.get(a, 0)) for a in keys}


def area_snapshot_metrics(
    g: SnapshotGraph,
    venues: Sequence[Venue],
    assignment: Mapping[str, str],
    profiles: Sequence[AreaProfile],
    *,
    density_mode: str = "per_km2",
    local: Mapping[str, float] | None = None,
    diagnostics: list[Diagnostic] | None = None,
) -> list[AreaSnapshotMetrics]:
    """One metrics record per profile for snapshot ``g``, sorted by area id."""
    if density_mode not in DENSITY_MODES:
        raise ValueError(f"density_mode must be one of {DENSITY_MODES}")
    if local is None:
        local = clustering_by_node(g)
    area_ids = sorted(p.area_id for p in profiles)
    flows = area_flow_centralities(g, assignment, area_ids, diagnostics)

    nodes_in: dict[str, list[str]] = {a: [] for a in area_ids}
    for v in sorted(g.nodes):
        a = assignment.get(v)
        if a in nodes_in:
            nodes_in[a].append(v)

    created: dict[str, int] = dict.fromkeys(area_ids, 0)
    total: dict[str, int] = dict.fromkeys(area_ids, 0)
    for ven in venues:
        a = assignment.get(ven.venue_id)
        if a not in total:
            continue
        total[a] += 1
        if ven.created_at in g.window:
            created[a] += 1

    by_id = {p.area_id: p for p in profiles}
    out = []
    for a in area_ids:
        members = nodes_in[a]
        clus = math.fsum(local[v] for v in members) / len(members) if members else 0.0
        if density_mode == "per_km2":
            try:
                km2 = polygon_area_km2(by_id[a].polygon)
            except GeometryError as exc:
                raise MetricsError(f"area {a!r}: cannot compute density ({exc})") from None
            density = created[a] / km2
        else:
            density = created[a] / total[a] if total[a] else 0.0
        f_in, f_out = flows.get(a, (0, 0))
        out.append(AreaSnapshotMetrics(a, g.t, len(members), created[a], density,
                                       float(f_in), float(f_out), clus))
    return out


def _advantage(parts: Mapping[str, tuple[float, float]], what: str) -> dict[str, float]:
    total_num = math.fsum(n for n, _ in parts.values())
    total_den = math.fsum(d for _, d in parts.values())
    if total_num == 0:
        raise AdvantageError(f"city-wide {what} numerator is zero; ratio undefined")
    city = total_num / total_den
    return {a: (n / d) / city for a, (n, d) in parts.items()}


def compute_cea(profiles: Sequence[AreaProfile], fiscal_year: str | None = None) -> list[CulturalAdvantage]:
    """Cultural expenditure advantage of each area against the whole run.

    ``(CE_i / TE_i) / (sum CE / sum TE)``. With ``fiscal_year=None`` the
    expenditure is pooled over every fiscal year present.
    """
    parts = {}
    bad = []
    for p in sorted(profiles, key=lambda p: p.area_id):
        ce, te = p.ratio(fiscal_year)
        if te <= 0:
            bad.append(p.area_id)
        parts[p.area_id] = (ce, te)
    if bad:
        raise AdvantageError(f"total expenditure is zero for {', '.join(bad)}")
    return [CulturalAdvantage(a, cea=v) for a, v in _advantage(parts, "cultural expenditure").items()]


def compute_cva(
    venues: Iterable[Venue],
    assignment: Mapping[str, str],
    cultural_categories: Iterable[str],
    area_ids: Iterable[str] = (),
    diagnostics: list[Diagnostic] | None = None,
) -> list[CulturalAdvantage]:
    """Cultural venue advantage: the area's share of cultural venues over the city share.

    Areas listed in ``area_ids`` with no venues at all are excluded with a
    diagnostic.
    """
    cats = frozenset(cultural_categories)
    cv: dict[str, int] = {}
    tv: dict[str, int] = {}
    for a in area_ids:
        cv[a] = tv[a] = 0
    for v in venues:
        a = assignment.get(v.venue_id)
        if a is None:
            continue
        tv[a] = tv.get(a, 0) + 1
        cv[a] = cv.get(a, 0) + (v.category in cats)
    parts = {}
    for a in sorted(tv):
        if tv[a] == 0:
            if diagnostics is not None:
                diagnostics.append(Diagnostic("areas", None, None,
                                              f"area {a!r} has no venues; CVA undefined"))
            continue
        parts[a] = (float(cv[a]), float(tv[a]))
    return [CulturalAdvantage(a, cva=v) for a, v in _advantage(parts, "cultural venue").items()]
