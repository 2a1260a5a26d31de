"""Fiscal-year alignment, socio-cultural grouping and the repeated-measures panel."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Iterator, Mapping, Sequence

from .areas import AreaSnapshotMetrics
from .graph import Window, yearly_windows
from .ingest import AreaProfile, Diagnostic, parse_fiscal_year

DEFAULT_LAG_MONTHS = 9
FISCAL_YEAR_START_MONTH = 4

FEATURES = (
    "node_number",
    "venue_created_number",
    "venue_created_density",
    "in_degree_centrality",
    "out_degree_centrality",
    "avg_clustering",
)


class GroupLabel(enum.Enum):
    G1 = "G1"  # less deprived, more advantaged
    G2 = "G2"  # more deprived, less advantaged
    G3 = "G3"  # more deprived, more advantaged
    G4 = "G4"  # less deprived, less advantaged

    @property
    def deprived(self) -> bool:
        return self in (GroupLabel.G2, GroupLabel.G3)

    @property
    def advantaged(self) -> bool:
        return self in (GroupLabel.G1, GroupLabel.G3)

    @classmethod
    def of(cls, deprived: bool, advantaged: bool) -> GroupLabel:
        if deprived:
            return cls.G3 if advantaged else cls.G2
        return cls.G1 if advantaged else cls.G4


class PanelError(ValueError):
    pass


def align_fiscal_year(
    fy_label: str,
    windows: Sequence[Window] | None = None,
    lag_months: int = DEFAULT_LAG_MONTHS,
) -> int:
    """Snapshot index in which spending of fiscal year ``fy_label`` shows up.

    A fiscal year starts in April; its effect is expected ``lag_months``
    later, and the snapshot window containing that moment is returned.
    """
    if lag_months < 0:
        raise ValueError("lag_months must be >= 0")
    if windows is None:
        windows = yearly_windows()
    start_year = parse_fiscal_year(fy_label)
    months = FISCAL_YEAR_START_MONTH - 1 + lag_months
    effect = datetime(start_year + months // 12, months % 12 + 1, 1, tzinfo=timezone.utc)
    for w in windows:
        if effect in w:
            return w.t
    raise ValueError(f"fiscal year {fy_label} (effect {effect:%Y-%m}) falls outside every snapshot window")


def city_average_imd(profiles: Iterable[AreaProfile]) -> float:
    scores = [p.imd_2010 for p in sorted(profiles, key=lambda p: p.area_id)]
    if not scores:
        raise ValueError("no areas to average")
    return math.fsum(scores) / len(scores)


def assign_group(imd_2010: float, city_avg_imd: float, cea: float) -> GroupLabel:
    """Deprived means strictly above the city average; advantaged means CEA strictly above 1."""
    return GroupLabel.of(imd_2010 > city_avg_imd, cea > 1.0)


def assign_groups(profiles: Sequence[AreaProfile], cea: Mapping[str, float]) -> dict[str, GroupLabel]:
    avg = city_average_imd(profiles)
    return {p.area_id: assign_group(p.imd_2010, avg, cea[p.area_id])
            for p in sorted(profiles, key=lambda p: p.area_id) if p.area_id in cea}


def inherit_parent_cea(parent_of: Mapping[str, str], parent_cea: Mapping[str, float]) -> dict[str, float]:
    """Give each ward the CEA of its borough when spending is only reported per borough."""
    return {w: parent_cea[b] for w, b in sorted(parent_of.items()) if b in parent_cea}


@dataclass(frozen=True)
class PanelObservation:
    area_id: str
    group: GroupLabel
    t: int
    node_number: float
    venue_created_number: float
    venue_created_density: float
    in_degree_centrality: float
    out_degree_centrality: float
    avg_clustering: float

    def value(self, feature: str) -> float:
        if feature not in FEATURES:
            raise KeyError(f"unknown feature {feature!r}")
        return getattr(self, feature)


@dataclass
class Panel:
    observations: list[PanelObservation]
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def __iter__(self) -> Iterator[PanelObservation]:
        return iter(self.observations)

    def __len__(self) -> int:
        return len(self.observations)

    @property
    def times(self) -> list[int]:
        return sorted({o.t for o in self.observations})

    @property
    def group_sizes(self) -> dict[GroupLabel, int]:
        seen: dict[GroupLabel, set[str]] = {g: set() for g in GroupLabel}
        for o in self.observations:
            seen[o.group].add(o.area_id)
        return {g: len(s) for g, s in seen.items()}

    def groups(self) -> dict[str, GroupLabel]:
        return {o.area_id: o.group for o in self.observations}


def build_panel(
    metrics: Iterable[AreaSnapshotMetrics],
    groups: Mapping[str, GroupLabel],
    times: Sequence[int] = (1, 2, 3),
) -> Panel:
    """Balanced (area, t) panel; areas lacking a group or any snapshot are dropped."""
    want = set(times)
    by_area: dict[str, dict[int, AreaSnapshotMetrics]] = {}
    diags: list[Diagnostic] = []
    for m in metrics:
        slot = by_area.setdefault(m.area_id, {})
        if m.t in slot:
            raise PanelError(f"duplicate metrics for area {m.area_id!r} at t={m.t}")
        slot[m.t] = m
    obs = []
    for area in sorted(by_area):
        rows = by_area[area]
        if area not in groups:
            diags.append(Diagnostic("cohort", None, None, f"area {area!r} has no group; excluded"))
            continue
        lacking = sorted(want - set(rows))
        if lacking:
            diags.append(Diagnostic("cohort", None, None,
                                    f"area {area!r} lacks snapshot(s) {lacking}; excluded"))
            continue
        for t in sorted(want):
            m = rows[t]
            obs.append(PanelObservation(
                area, groups[area], t, float(m.node_number), float(m.venue_created_number),
                m.venue_created_density, m.in_degree_centrality, m.out_degree_centrality,
                m.avg_clustering))
    if not obs:
        raise PanelError("panel is empty")
    return Panel(obs, diags)


def samples_by_group(
    panel: Iterable[PanelObservation], feature: str, t: int | None = None,
) -> dict[GroupLabel, list[float]]:
    """Per-group values for a between-groups test.

    ``t=None`` averages each area over all of its snapshots; otherwise only
    snapshot ``t`` is used. Groups are returned in label order, areas sorted.
    """
    per_area: dict[str, tuple[GroupLabel, list[float]]] = {}
    for o in panel:
        if t is not None and o.t != t:
            continue
        per_area.setdefault(o.area_id, (o.group, []))[1].append(o.value(feature))
    out: dict[GroupLabel, list[float]] = {}
    for area in sorted(per_area):
        g, vals = per_area[area]
        out.setdefault(g, []).append(math.fsum(vals) / len(vals))
    return {g: out[g] for g in GroupLabel if g in out}
