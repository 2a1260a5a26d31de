"""End-to-end analysis: tables in, graph summaries, area metrics and ANOVA out."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import ingest
from .areas import (AreaSnapshotMetrics, area_snapshot_metrics, compute_cea, compute_cva,
                    load_cultural_categories, resolve_areas)
from .cohort import (DEFAULT_LAG_MONTHS, FEATURES, GroupLabel, Panel, align_fiscal_year,
                     assign_groups, build_panel, samples_by_group)
from .graph import GraphSummary, SnapshotGraph, build_snapshot, clustering_by_node, graph_summary, yearly_windows
from .ingest import AreaProfile, Diagnostic, Source, Transition, Venue
from .stats import DEFAULT_ALPHA, AnovaRow, MeansTable, group_means, mixed_anova, one_way_anova

log = logging.getLogger(__name__)

H1_MODES = ("mean", "per_snapshot")


class AnalysisError(RuntimeError):
    pass


@dataclass
class Inputs:
    venues: list[Venue]
    transitions: list[Transition]
    profiles: list[AreaProfile]
    diagnostics: list[Diagnostic]
    missing: dict[str, list[str]]


@dataclass
class Options:
    first_year: int = 2011
    years: int = 3
    lag_months: int = DEFAULT_LAG_MONTHS
    alpha: float = DEFAULT_ALPHA
    density_mode: str = "per_km2"
    h1_mode: str = "mean"
    cea_fiscal_year: str | None = None
    cultural_categories: frozenset[str] | None = None
    max_diagnostics: int = ingest.DEFAULT_MAX_DIAGNOSTICS
    threads: int = 1


@dataclass
class FeatureTests:
    feature: str
    h1: list[tuple[int | None, AnovaRow]]
    h2: list[AnovaRow]
    means: MeansTable
    pooled_means: MeansTable


@dataclass
class AnalysisResult:
    options: Options
    graphs: list[SnapshotGraph]
    summaries: list[GraphSummary]
    metrics: list[AreaSnapshotMetrics]
    cea: dict[str, float]
    cea_by_t: dict[int, dict[str, float]]
    cva: dict[str, float]
    groups: dict[str, GroupLabel]
    panel: Panel
    tests: list[FeatureTests]
    profiles: list[AreaProfile]
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def row(self, feature: str, effect: str) -> AnovaRow:
        """The mixed-ANOVA row for ``effect`` (or the H1 row when effect is ``"h1"``)."""
        for ft in self.tests:
            if ft.feature == feature:
                if effect == "h1":
                    return ft.h1[0][1]
                for r in ft.h2:
                    if r.effect == effect:
                        return r
        raise KeyError((feature, effect))


def load_inputs(
    venues: Source,
    transitions: Source,
    imd: Source,
    expenditure: Source,
    polygons: Source,
    max_diagnostics: int = ingest.DEFAULT_MAX_DIAGNOSTICS,
) -> Inputs:
    """Parse all five tables; raises :class:`ingest.TooManyDiagnostics` past the cap."""
    v = ingest.parse_venues(venues, max_diagnostics=max_diagnostics)
    remaining = max_diagnostics - len(v.diagnostics)
    t = ingest.parse_transitions(transitions, {x.venue_id for x in v.records},
                                 max_diagnostics=remaining)
    remaining -= len(t.diagnostics)
    a = ingest.parse_area_tables(imd, expenditure, polygons, max_diagnostics=remaining)
    diags = v.diagnostics + t.diagnostics + a.diagnostics
    for aid, lacks in sorted(a.missing.items()):
        diags.append(Diagnostic("areas", None, None,
                                f"area {aid!r} missing from {', '.join(lacks)}", "profile"))
    return Inputs(v.records, t.records, a.profiles, diags, a.missing)


def analyze(inputs: Inputs, opts: Options | None = None) -> AnalysisResult:
    opts = opts or Options()
    if opts.h1_mode not in H1_MODES:
        raise ValueError(f"h1_mode must be one of {H1_MODES}")
    diags: list[Diagnostic] = list(inputs.diagnostics)
    profiles = [p for p in inputs.profiles if p.level == "ward"] or list(inputs.profiles)
    if not profiles:
        raise AnalysisError("no area profiles to analyse")
    profiles.sort(key=lambda p: p.area_id)
    area_ids = [p.area_id for p in profiles]
    categories = opts.cultural_categories or load_cultural_categories()

    res = resolve_areas(inputs.venues, profiles)
    diags.extend(res.diagnostics)
    assignment = res.mapping

    windows = yearly_windows(opts.first_year, opts.years)

    def snapshot(w):
        g = build_snapshot(inputs.transitions, w)
        if not g.nodes:
            raise AnalysisError(f"snapshot t={w.t} ({w.label}) has no transitions")
        local = clustering_by_node(g)
        snap_diags: list[Diagnostic] = []
        m = area_snapshot_metrics(g, inputs.venues, assignment, profiles,
                                  density_mode=opts.density_mode, local=local,
                                  diagnostics=snap_diags)
        return g, graph_summary(g, local), m, snap_diags

    with ThreadPoolExecutor(max_workers=max(1, opts.threads)) as pool:
        snaps = list(pool.map(snapshot, windows))
    graphs = [s[0] for s in snaps]
    summaries = [s[1] for s in snaps]
    metrics = [m for s in snaps for m in s[2]]
    for s in snaps:
        diags.extend(s[3])

    cea = {c.area_id: c.cea for c in compute_cea(profiles, opts.cea_fiscal_year)}
    cea_by_t: dict[int, dict[str, float]] = {}
    fiscal_years = sorted({fy for p in profiles for fy in p.te_by_fy})
    for fy in fiscal_years:
        if any(fy not in p.te_by_fy for p in profiles):
            diags.append(Diagnostic("cohort", None, "fiscal_year",
                                    f"fiscal year {fy} not reported for every area; skipped"))
            continue
        try:
            t = align_fiscal_year(fy, windows, opts.lag_months)
        except ValueError as exc:
            diags.append(Diagnostic("cohort", None, "fiscal_year", str(exc)))
            continue
        cea_by_t[t] = {c.area_id: c.cea for c in compute_cea(profiles, fy)}
    cva = {c.area_id: c.cva for c in compute_cva(inputs.venues, assignment, categories,
                                                  area_ids, diags)}
    groups = assign_groups(profiles, cea)
    panel = build_panel(metrics, groups, [w.t for w in windows])
    diags.extend(panel.diagnostics)
    sizes = panel.group_sizes
    log.info("group sizes: %s", ", ".join(f"{g.value}={n}" for g, n in sizes.items()))

    def tests(feature):
        if opts.h1_mode == "mean":
            h1 = [(None, one_way_anova(samples_by_group(panel, feature), opts.alpha))]
        else:
            h1 = [(w.t, one_way_anova(samples_by_group(panel, feature, w.t), opts.alpha))
                  for w in windows]
        return FeatureTests(feature, h1, mixed_anova(panel, feature, opts.alpha),
                            group_means(panel, feature), group_means(panel, feature, pooled=True))

    with ThreadPoolExecutor(max_workers=max(1, opts.threads)) as pool:
        results = list(pool.map(tests, FEATURES))

    return AnalysisResult(opts, graphs, summaries, metrics, cea, cea_by_t, cva, groups, panel,
                          results, profiles, diags)


def analyze_files(paths: Mapping[str, Source], opts: Options | None = None) -> AnalysisResult:
    opts = opts or Options()
    inputs = load_inputs(paths["venues"], paths["transitions"], paths["imd"],
                         paths["expenditure"], paths["polygons"], opts.max_diagnostics)
    return analyze(inputs, opts)


def table_keys() -> Sequence[str]:
    return ("venues", "transitions", "imd", "expenditure", "polygons")
