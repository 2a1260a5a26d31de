"""Yearly snapshot graphs of venue-to-venue transitions and their statistics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping

from .ingest import Transition


class EmptyGraphError(ValueError):
    """A whole-graph statistic was requested on a graph with no nodes."""


@dataclass(frozen=True, order=True)
class Window:
    """Half-open UTC interval ``[start, end)`` labelled with its snapshot index."""

    t: int
    start: datetime
    end: datetime

    def __contains__(self, ts: datetime) -> bool:
        return self.start <= ts < self.end

    @property
    def label(self) -> str:
        return f"{self.start:%Y-%m}..{self.end:%Y-%m}"


def yearly_windows(first_year: int = 2011, count: int = 3) -> list[Window]:
    """Contiguous calendar-year windows, ``t`` counted from 1."""
    return [
        Window(i + 1,
               datetime(first_year + i, 1, 1, tzinfo=timezone.utc),
               datetime(first_year + i + 1, 1, 1, tzinfo=timezone.utc))
        for i in range(count)
    ]


@dataclass(frozen=True)
class SnapshotGraph:
    t: int
    window: Window
    nodes: frozenset[str]
    edges: Mapping[tuple[str, str], int]
    succ: Mapping[str, frozenset[str]] = field(repr=False, compare=False, default=None)
    pred: Mapping[str, frozenset[str]] = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        succ: dict[str, set[str]] = {v: set() for v in self.nodes}
        pred: dict[str, set[str]] = {v: set() for v in self.nodes}
        for (u, v), w in self.edges.items():
            if u == v:
                raise ValueError(f"self-loop on {u!r}")
            if w < 1:
                raise ValueError(f"edge {u!r}->{v!r} has weight {w}")
            succ[u].add(v)
            pred[v].add(u)
        object.__setattr__(self, "succ", {k: frozenset(s) for k, s in succ.items()})
        object.__setattr__(self, "pred", {k: frozenset(s) for k, s in pred.items()})

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def neighbors(self, node: str) -> frozenset[str]:
        return self.succ[node] | self.pred[node]

    def in_degree(self, node: str) -> int:
        return len(self.pred[node])

    def out_degree(self, node: str) -> int:
        return len(self.succ[node])


@dataclass(frozen=True)
class GraphSummary:
    t: int
    node_count: int
    edge_count: int
    avg_clustering: float
    avg_degree: float

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "node_count": self.node_count,
            "edge_count": self.edge_count,
            "avg_clustering": self.avg_clustering,
            "avg_degree": self.avg_degree,
        }


def build_snapshot(transitions: Iterable[Transition], window: Window) -> SnapshotGraph:
    """Aggregate the transitions falling inside ``window`` into a weighted digraph.

    Repeated ``(from, to)`` pairs collapse into one edge whose weight is the
    summed ``count``. Only venues touched by an in-window transition become
    nodes.
    """
    weights: dict[tuple[str, str], int] = {}
    for tr in transitions:
        if tr.occurred_at in window:
            key = (tr.from_venue, tr.to_venue)
            weights[key] = weights.get(key, 0) + tr.count
    nodes = frozenset(v for pair in weights for v in pair)
    edges = {k: weights[k] for k in sorted(weights)}
    return SnapshotGraph(window.t, window, nodes, edges)


def _clustering(g: SnapshotGraph, node: str) -> float:
    nbrs = g.succ[node] | g.pred[node]
    k = len(nbrs)
    if k <= 1:
        return 0.0
    links = 0
    for u in nbrs:
        links += len(g.succ[u] & nbrs)
    return links / (k * (k - 1))


def local_clustering(g: SnapshotGraph, node: str) -> float:
    """Directed local clustering ``L / (k (k - 1))``.

    The neighbourhood is the union of predecessors and successors, ``k`` its
    size and ``L`` the number of directed edges between neighbours. Weights
    are ignored. Nodes with ``k <= 1`` score 0.
    """
    if node not in g.nodes:
        raise KeyError(f"node {node!r} not in snapshot t={g.t}")
    return _clustering(g, node)


def clustering_by_node(g: SnapshotGraph) -> dict[str, float]:
    return {v: _clustering(g, v) for v in sorted(g.nodes)}


def average_clustering(g: SnapshotGraph, local: Mapping[str, float] | None = None) -> float:
    if not g.nodes:
        raise EmptyGraphError(f"snapshot t={g.t} has no nodes")
    if local is None:
        local = clustering_by_node(g)
    return math.fsum(local[v] for v in sorted(g.nodes)) / len(g.nodes)


def graph_summary(g: SnapshotGraph, local: Mapping[str, float] | None = None) -> GraphSummary:
    """Node/edge counts, mean clustering and mean total degree ``2|E|/|V|``."""
    if not g.nodes:
        raise EmptyGraphError(f"snapshot t={g.t} has no nodes")
    n = len(g.nodes)
    m = g.edge_count
    return GraphSummary(g.t, n, m, average_clustering(g, local), 2.0 * m / n)


def edge_list(g: SnapshotGraph) -> str:
    """``from,to,weight`` CSV lines (no header) in sorted edge order."""
    buf = io.StringIO(newline="")
    csv.writer(buf, lineterminator="\n").writerows((u, v, w) for (u, v), w in g.edges.items())
    return buf.getvalue()
