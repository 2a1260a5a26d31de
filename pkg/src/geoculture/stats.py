"""One-way and split-plot (mixed) ANOVA plus group means tables.

All sums go through :func:`math.fsum`, which is correctly rounded and
therefore independent of accumulation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

from .cohort import GroupLabel, PanelObservation
from .special import f_tail

DEFAULT_ALPHA = 0.05
Z95 = 1.96


class AnovaError(ValueError):
    pass


@dataclass(frozen=True)
class AnovaRow:
    effect: str  # group | time | group×time
    ss: float
    df1: int
    df2: int
    f: float
    p: float
    significant: bool
    ss_error: float

    def to_dict(self) -> dict:
        return {"effect": self.effect, "ss": self.ss, "df1": self.df1, "df2": self.df2,
                "f": self.f, "p": self.p, "significant": self.significant}


@dataclass(frozen=True)
class MeanCell:
    group: Hashable
    t: int | None
    n: int
    mean: float
    se: float

    @property
    def ci95(self) -> float:
        return Z95 * self.se


@dataclass(frozen=True)
class MeansTable:
    feature: str
    cells: tuple[MeanCell, ...]

    def cell(self, group, t=None) -> MeanCell:
        for c in self.cells:
            if c.group == group and c.t == t:
                return c
        raise KeyError((group, t))


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


def _row(effect: str, ss: float, df1: int, ss_err: float, df2: int, alpha: float) -> AnovaRow:
    if ss_err == 0.0:
        f, p = (0.0, 1.0) if ss == 0.0 else (math.inf, 0.0)
    else:
        f = (ss / df1) / (ss_err / df2)
        p = f_tail(f, df1, df2)
    return AnovaRow(effect, ss, df1, df2, f, p, p < alpha, ss_err)


def one_way_anova(samples: Mapping[Hashable, Sequence[float]], alpha: float = DEFAULT_ALPHA) -> AnovaRow:
    """Independent one-way ANOVA of the group means."""
    groups = [list(map(float, v)) for _, v in sorted(samples.items(), key=lambda kv: str(kv[0]))]
    if len(groups) < 2:
        raise AnovaError("one-way ANOVA needs at least two groups")
    if any(len(g) < 2 for g in groups):
        raise AnovaError("every group needs at least two observations")
    n_total = sum(len(g) for g in groups)
    k = len(groups)
    grand = math.fsum(math.fsum(g) for g in groups) / n_total
    means = [_mean(g) for g in groups]
    ssb = math.fsum(len(g) * (m - grand) ** 2 for g, m in zip(groups, means))
    ssw = math.fsum((y - m) ** 2 for g, m in zip(groups, means) for y in g)
    return _row("group", ssb, k - 1, ssw, n_total - k, alpha)


def _subjects(panel: Iterable[PanelObservation], feature: str):
    subj: dict[str, tuple[GroupLabel, dict[int, float]]] = {}
    for o in panel:
        g, vals = subj.setdefault(o.area_id, (o.group, {}))
        if o.group != g:
            raise AnovaError(f"area {o.area_id!r} appears in two groups")
        if o.t in vals:
            raise AnovaError(f"area {o.area_id!r} has two observations at t={o.t}")
        vals[o.t] = o.value(feature)
    times = sorted({t for _, vals in subj.values() for t in vals})
    for area, (_, vals) in subj.items():
        if len(vals) != len(times):
            raise AnovaError(f"area {area!r} is not observed at every time point")
    return subj, times


def mixed_anova(
    panel: Iterable[PanelObservation], feature: str, alpha: float = DEFAULT_ALPHA,
) -> list[AnovaRow]:
    """Split-plot ANOVA with group between subjects and time within subjects.

    Returns rows for ``group``, ``time`` and ``group×time``. The group effect
    is tested against subjects-within-groups; time and the interaction
    against the time × subjects-within-groups residual. No sphericity
    correction is applied. With a single time point only the group row is
    returned.
    """
    subj, times = _subjects(panel, feature)
    areas = sorted(subj)
    by_group: dict[GroupLabel, list[str]] = {}
    for a in areas:
        by_group.setdefault(subj[a][0], []).append(a)
    groups = [g for g in GroupLabel if g in by_group]
    n, k, n_t = len(areas), len(groups), len(times)
    if k < 2:
        raise AnovaError("mixed ANOVA needs at least two groups")
    if n - k < 1:
        raise AnovaError("mixed ANOVA needs more subjects than groups")

    y = {a: [subj[a][1][t] for t in times] for a in areas}
    grand = math.fsum(v for a in areas for v in y[a]) / (n * n_t)
    s_mean = {a: _mean(y[a]) for a in areas}
    g_mean = {g: math.fsum(s_mean[a] for a in by_group[g]) / len(by_group[g]) for g in groups}
    t_mean = [math.fsum(y[a][j] for a in areas) / n for j in range(n_t)]
    cell = {g: [math.fsum(y[a][j] for a in by_group[g]) / len(by_group[g]) for j in range(n_t)]
            for g in groups}

    ss_group = n_t * math.fsum(len(by_group[g]) * (g_mean[g] - grand) ** 2 for g in groups)
    ss_subj = n_t * math.fsum((s_mean[a] - g_mean[subj[a][0]]) ** 2 for a in areas)
    rows = [_row("group", ss_group, k - 1, ss_subj, n - k, alpha)]
    if n_t == 1:
        return rows

    ss_time = n * math.fsum((m - grand) ** 2 for m in t_mean)
    ss_inter = math.fsum(
        len(by_group[g]) * (cell[g][j] - g_mean[g] - t_mean[j] + grand) ** 2
        for g in groups for j in range(n_t))
    ss_err = math.fsum(
        (y[a][j] - s_mean[a] - cell[subj[a][0]][j] + g_mean[subj[a][0]]) ** 2
        for a in areas for j in range(n_t))
    df_err = (n - k) * (n_t - 1)
    rows.append(_row("time", ss_time, n_t - 1, ss_err, df_err, alpha))
    rows.append(_row("group×time", ss_inter, (k - 1) * (n_t - 1), ss_err, df_err, alpha))
    return rows


def _cell(group, t, values: Sequence[float]) -> MeanCell:
    n = len(values)
    mean = _mean(values)
    if n > 1:
        var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
        se = math.sqrt(var / n)
    else:
        se = math.nan
    return MeanCell(group, t, n, mean, se)


def group_means(panel: Iterable[PanelObservation], feature: str, pooled: bool = False) -> MeansTable:
    """Mean, standard error and 95% CI per (group, t), ordered by group then t.

    With ``pooled=True`` each area is first averaged over its snapshots and
    one cell per group is returned (``t`` is ``None``).
    """
    cells: dict[tuple[GroupLabel, int], list[float]] = {}
    per_area: dict[str, tuple[GroupLabel, list[float]]] = {}
    for o in panel:
        v = o.value(feature)
        cells.setdefault((o.group, o.t), []).append(v)
        per_area.setdefault(o.area_id, (o.group, []))[1].append(v)
    if not cells:
        raise AnovaError("panel is empty")
    order = {g: i for i, g in enumerate(GroupLabel)}
    if pooled:
        grouped: dict[GroupLabel, list[float]] = {}
        for a in sorted(per_area):
            g, vals = per_area[a]
            grouped.setdefault(g, []).append(_mean(vals))
        out = [_cell(g, None, grouped[g]) for g in sorted(grouped, key=order.get)]
    else:
        out = [_cell(g, t, cells[(g, t)])
               for g, t in sorted(cells, key=lambda gt: (order[gt[0]], gt[1]))]
    return MeansTable(feature, tuple(out))
