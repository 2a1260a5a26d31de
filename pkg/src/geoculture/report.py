"""Writers for the report bundle: CSV tables, JSON reports and SVG means plots."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from .cohort import FEATURES, GroupLabel, PanelObservation
from .graph import edge_list
from .pipeline import AnalysisResult
from .stats import MeansTable

PALETTE = {GroupLabel.G1: "#1b9e77", GroupLabel.G2: "#d95f02",
           GroupLabel.G3: "#7570b3", GroupLabel.G4: "#e7298a"}
SVG_W, SVG_H = 800, 600

PANEL_COLUMNS = ("area_id", "group", "t") + FEATURES


def _num(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(c) for c in r])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=True) + "\n"


def panel_csv(panel: Iterable[PanelObservation]) -> str:
    return _csv(PANEL_COLUMNS, ((o.area_id, o.group.value, o.t) + tuple(o.value(f) for f in FEATURES)
                                for o in panel))


def area_metrics_csv(result: AnalysisResult) -> str:
    header = ("area_id", "t") + FEATURES + ("cea_aligned", "cva", "group")
    rows = []
    for m in sorted(result.metrics, key=lambda m: (m.area_id, m.t)):
        g = result.groups.get(m.area_id)
        rows.append((m.area_id, m.t, m.node_number, m.venue_created_number,
                     m.venue_created_density, m.in_degree_centrality, m.out_degree_centrality,
                     m.avg_clustering, result.cea_by_t.get(m.t, {}).get(m.area_id),
                     result.cva.get(m.area_id), g.value if g else None))
    return _csv(header, rows)


def area_advantage_csv(result: AnalysisResult) -> str:
    """Per-area IMD, CEA and CVA: the data behind the city-level bubble charts."""
    rows = []
    for p in result.profiles:
        g = result.groups.get(p.area_id)
        rows.append((p.area_id, p.level, p.imd_2010, p.imd_2015, result.cea.get(p.area_id),
                     result.cva.get(p.area_id), g.value if g else None))
    return _csv(("area_id", "level", "imd_2010", "imd_2015", "cea", "cva", "group"), rows)


def anova_report(result: AnalysisResult) -> list[dict]:
    out = []
    for ft in result.tests:
        for t, row in ft.h1:
            d = {"feature": ft.feature, "analysis": "one_way", "t": t}
            d.update(row.to_dict())
            out.append(d)
        for row in ft.h2:
            d = {"feature": ft.feature, "analysis": "mixed", "t": None}
            d.update(row.to_dict())
            out.append(d)
    return out


def means_csv(table: MeansTable, pooled: MeansTable | None = None) -> str:
    cells = list(table.cells) + (list(pooled.cells) if pooled else [])
    return _csv(("group", "t", "n", "mean", "se", "ci95"),
                ((c.group.value, "all" if c.t is None else c.t, c.n, c.mean, c.se, c.ci95)
                 for c in cells))


def means_svg(table: MeansTable) -> str:
    """Line-per-group means plot with 1.96·se error bars."""
    cells = [c for c in table.cells if c.t is not None]
    times = sorted({c.t for c in cells})
    lows, highs = [], []
    for c in cells:
        half = c.ci95 if math.isfinite(c.se) else 0.0
        lows.append(c.mean - half)
        highs.append(c.mean + half)
    lo, hi = min(lows), max(highs)
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    left, right, top, bottom = 90.0, 640.0, 60.0, 530.0

    def x(t):
        if len(times) == 1:
            return (left + right) / 2
        return left + (right - left) * times.index(t) / (len(times) - 1)

    def y(v):
        return bottom - (bottom - top) * (v - lo) / (hi - lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" '
        f'viewBox="0 0 {SVG_W} {SVG_H}">',
        f'<rect width="{SVG_W}" height="{SVG_H}" fill="white"/>',
        f'<text x="{SVG_W / 2:.2f}" y="30" text-anchor="middle" font-family="sans-serif" '
        f'font-size="18">{table.feature}</text>',
        f'<line x1="{left:.2f}" y1="{bottom:.2f}" x2="{right:.2f}" y2="{bottom:.2f}" stroke="black"/>',
        f'<line x1="{left:.2f}" y1="{top:.2f}" x2="{left:.2f}" y2="{bottom:.2f}" stroke="black"/>',
    ]
    for t in times:
        parts.append(f'<text x="{x(t):.2f}" y="{bottom + 25:.2f}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="14">t={t}</text>')
    for i in range(5):
        v = lo + (hi - lo) * i / 4
        parts.append(f'<text x="{left - 8:.2f}" y="{y(v) + 4:.2f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="12">{v:.4g}</text>')
    for k, g in enumerate(GroupLabel):
        mine = sorted((c for c in cells if c.group == g), key=lambda c: c.t)
        if not mine:
            continue
        color = PALETTE[g]
        pts = " ".join(f"{x(c.t):.2f},{y(c.mean):.2f}" for c in mine)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for c in mine:
            half = c.ci95 if math.isfinite(c.se) else 0.0
            cx = x(c.t)
            parts.append(f'<line x1="{cx:.2f}" y1="{y(c.mean - half):.2f}" x2="{cx:.2f}" '
                         f'y2="{y(c.mean + half):.2f}" stroke="{color}"/>')
            parts.append(f'<circle cx="{cx:.2f}" cy="{y(c.mean):.2f}" r="4" fill="{color}"/>')
        ly = top + 20 + 24 * k
        parts.append(f'<line x1="665" y1="{ly:.2f}" x2="695" y2="{ly:.2f}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="702" y="{ly + 5:.2f}" font-family="sans-serif" font-size="14">{g.value}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_report(result: AnalysisResult, directory, *, dump_graphs: bool = False,
                 manifest: dict | None = None) -> list[str]:
    """Write every report artifact into ``directory``; returns file names written."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {
        "graph_summary.jsonl": "".join(json.dumps(s.to_dict(), sort_keys=True) + "\n"
                                       for s in result.summaries),
        "area_metrics.csv": area_metrics_csv(result),
        "area_advantage.csv": area_advantage_csv(result),
        "panel.csv": panel_csv(result.panel),
        "anova_report.json": _json(anova_report(result)),
        "diagnostics.json": _json([x.to_dict() for x in result.diagnostics]),
        "group_sizes.json": _json({g.value: n for g, n in result.panel.group_sizes.items()}),
    }
    for ft in result.tests:
        files[f"means_{ft.feature}.csv"] = means_csv(ft.means, ft.pooled_means)
        files[f"means_{ft.feature}.svg"] = means_svg(ft.means)
    if dump_graphs:
        for g in result.graphs:
            files[f"edges_t{g.t}.csv"] = "from,to,weight\n" + edge_list(g)
    if manifest is not None:
        files["run_manifest.json"] = _json(manifest)
    for name in sorted(files):
        with open(d / name, "w", encoding="utf-8", newline="") as fh:
            fh.write(files[name])
    return sorted(files)
