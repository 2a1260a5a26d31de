"""Seeded synthetic city with planted group structure and effects.

Wards are square cells on a grid. Each ward belongs to one of the four
groups; IMD scores and expenditure ratios are drawn so the grouping rules
recover the planted labels exactly. A per-(group, year) activity level

    mu[g][t] = base_rate + group_shift[g] + time_trend[t] + interaction[g][t]

drives both the number of venues created in a ward during year ``t`` and
the number of cross-ward transitions it receives, so the signal reaches the
network metrics rather than being written into feature columns directly.

Randomness comes from numpy's counter-based Philox generator, with an
independent stream per table keyed on ``(seed, stream_id)``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from . import ingest
from .areas import load_cultural_categories
from .cohort import FEATURES, GroupLabel, Panel, PanelObservation
from .geometry import polygon_area_km2
from .ingest import AreaProfile, Transition, Venue

BUNDLE_FILES = ("venues.csv", "transitions.csv", "polygons.csv", "imd.csv", "expenditure.csv")
GROUND_TRUTH_FILE = "ground_truth.json"

NON_CULTURAL_CATEGORIES = (
    "Bakery", "Bus Stop", "Coffee Shop", "Gym", "Hotel", "Office", "Pharmacy",
    "Pub", "Restaurant", "Supermarket", "Train Station", "University",
)

_STREAMS = {"layout": 0, "imd": 1, "expenditure": 2, "venues": 3, "transitions": 4, "panel": 5,
            "defects": 6}
_BASELINE_START = datetime(2008, 1, 1, tzinfo=timezone.utc)
_BASELINE_YEARS = 3  # pre-existing venues are created this long before the first snapshot


class ConfigError(ValueError):
    pass


@dataclass
class EffectConfig:
    base_rate: float = 20.0
    group_shift: tuple[float, ...] = (4.0, 0.0, 6.0, -2.0)
    time_trend: tuple[float, ...] = (0.0, 2.0, 4.0)
    interaction: tuple[tuple[float, ...], ...] = ((0.0,) * 3,) * 4
    noise_sd: float = 2.0

    def mu(self, g: int, t: int) -> float:
        return self.base_rate + self.group_shift[g] + self.time_trend[t] + self.interaction[g][t]


@dataclass
class SynthConfig:
    seed: int = 42
    ward_count: int = 100
    venues_per_ward: tuple[int, int] = (20, 40)
    group_sizes: tuple[int, int, int, int] = (29, 35, 16, 20)
    cultural_share_by_group: tuple[float, float, float, float] = (0.30, 0.10, 0.35, 0.15)
    expenditure_ratio_by_group: tuple[float, float, float, float] = (0.060, 0.020, 0.070, 0.025)
    effect: EffectConfig = field(default_factory=EffectConfig)
    transitions_per_year: int = 6000
    inter_area_mix: float = 0.3
    first_year: int = 2011
    years: int = 3
    cell_deg: float = 0.01
    origin: tuple[float, float] = (51.40, -0.30)
    unknown_id_rows: int = 0
    self_loop_rows: int = 0

    def __post_init__(self):
        if isinstance(self.effect, dict):
            self.effect = EffectConfig(**self.effect)
        e = self.effect
        e.group_shift = tuple(float(x) for x in e.group_shift)
        e.time_trend = tuple(float(x) for x in e.time_trend)
        e.interaction = tuple(tuple(float(x) for x in row) for row in e.interaction)
        self.venues_per_ward = tuple(int(x) for x in self.venues_per_ward)
        self.group_sizes = tuple(int(x) for x in self.group_sizes)
        self.cultural_share_by_group = tuple(float(x) for x in self.cultural_share_by_group)
        self.expenditure_ratio_by_group = tuple(float(x) for x in self.expenditure_ratio_by_group)
        self.origin = tuple(float(x) for x in self.origin)
        self.validate()

    def validate(self) -> None:
        e = self.effect
        if len(self.group_sizes) != 4 or min(self.group_sizes) < 0:
            raise ConfigError("group_sizes must be four non-negative counts")
        if sum(self.group_sizes) != self.ward_count:
            raise ConfigError(f"group_sizes sum to {sum(self.group_sizes)}, not ward_count={self.ward_count}")
        n_dep = self.group_sizes[1] + self.group_sizes[2]
        if n_dep == 0 or n_dep == self.ward_count:
            raise ConfigError("both deprivation classes need at least one ward")
        if len(e.group_shift) != 4 or len(e.interaction) != 4:
            raise ConfigError("effect.group_shift and effect.interaction need 4 rows")
        if len(e.time_trend) != self.years or any(len(r) != self.years for r in e.interaction):
            raise ConfigError(f"effect.time_trend and interaction rows need {self.years} entries")
        if not e.noise_sd > 0:
            raise ConfigError("noise_sd must be positive")
        if not 0.0 <= self.inter_area_mix <= 1.0:
            raise ConfigError("inter_area_mix must lie in [0, 1]")
        lo, hi = self.venues_per_ward
        if lo < 2 or hi < lo:
            raise ConfigError("venues_per_ward must be a range with minimum >= 2")
        if any(not 0 <= s <= 1 for s in self.cultural_share_by_group):
            raise ConfigError("cultural shares must lie in [0, 1]")
        if any(not 0 < r < 1 for r in self.expenditure_ratio_by_group):
            raise ConfigError("expenditure ratios must lie in (0, 1)")
        if self.transitions_per_year < 0 or self.unknown_id_rows < 0 or self.self_loop_rows < 0:
            raise ConfigError("row counts must be non-negative")
        if self.years < 1:
            raise ConfigError("years must be >= 1")

    @property
    def fiscal_years(self) -> list[str]:
        return [f"{y}/{(y + 1) % 100:02d}" for y in range(self.first_year - 1, self.first_year - 1 + self.years)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> SynthConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown synth config field(s): {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> SynthConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _rng(seed: int, stream: str) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_STREAMS[stream],))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class _Plan:
    ward_ids: list[str]
    groups: list[int]  # index into GroupLabel order
    rings: list[tuple[tuple[float, float], ...]]


def _plan(cfg: SynthConfig) -> _Plan:
    rng = _rng(cfg.seed, "layout")
    labels = np.repeat(np.arange(4), cfg.group_sizes)
    rng.shuffle(labels)
    cols = math.ceil(math.sqrt(cfg.ward_count))
    lat0, lon0 = cfg.origin
    d = cfg.cell_deg
    ids, rings = [], []
    for i in range(cfg.ward_count):
        r, c = divmod(i, cols)
        s, n = round(lat0 + r * d, 10), round(lat0 + (r + 1) * d, 10)
        w, e = round(lon0 + c * d, 10), round(lon0 + (c + 1) * d, 10)
        ids.append(f"W{i + 1:03d}")
        rings.append(((s, w), (s, e), (n, e), (n, w)))
    return _Plan(ids, [int(g) for g in labels], rings)


def _window(cfg: SynthConfig, t: int) -> tuple[datetime, datetime]:
    y = cfg.first_year + t
    return datetime(y, 1, 1, tzinfo=timezone.utc), datetime(y + 1, 1, 1, tzinfo=timezone.utc)


def _in_scale(cfg: SynthConfig, plan: _Plan) -> float:
    base = sum(cfg.effect.mu(g, 0) for g in plan.groups)
    if base <= 0:
        return 0.0
    return cfg.inter_area_mix * cfg.transitions_per_year / base


def _imd(cfg: SynthConfig, plan: _Plan) -> tuple[list[float], list[float]]:
    rng = _rng(cfg.seed, "imd")
    n = cfg.ward_count
    dep = [GroupLabel[f"G{g + 1}"].deprived for g in plan.groups]
    n_dep = sum(dep)
    n_less = n - n_dep
    lo, width = 10.0, 5.0
    # deprived floor chosen so the unweighted mean separates the two classes
    floor = max(((lo + width) * n - lo * n_less) / n_dep,
                (width * n_dep + (lo + width) * n_less) / n_less) + 1.0
    floor = math.ceil(floor)
    u = rng.random(n).tolist()
    s2010 = [round((floor if d else lo) + width * x, 2) for d, x in zip(dep, u)]
    drift = rng.normal(0.0, 1.0, n).tolist()
    s2015 = [round(max(0.0, s + dx), 2) for s, dx in zip(s2010, drift)]
    return s2010, s2015


def _expenditure(cfg: SynthConfig, plan: _Plan) -> tuple[list[dict], list[dict]]:
    rng = _rng(cfg.seed, "expenditure")
    ce, te = [], []
    for g in plan.groups:
        ratio = cfg.expenditure_ratio_by_group[g]
        ce_w, te_w = {}, {}
        for fy in cfg.fiscal_years:
            total = round(float(rng.uniform(5e6, 2e7)), 2)
            te_w[fy] = total
            ce_w[fy] = round(total * ratio, 2)
        ce.append(ce_w)
        te.append(te_w)
    return ce, te


def _profiles(cfg: SynthConfig, plan: _Plan) -> list[AreaProfile]:
    s2010, s2015 = _imd(cfg, plan)
    ce, te = _expenditure(cfg, plan)
    return [AreaProfile(aid, "ward", a, b, c, t, ring)
            for aid, a, b, c, t, ring in zip(plan.ward_ids, s2010, s2015, ce, te, plan.rings)]


def _check_planting(cfg: SynthConfig, plan: _Plan, profiles: list[AreaProfile]) -> None:
    from .areas import compute_cea
    from .cohort import assign_groups
    for fy in [None, *cfg.fiscal_years]:
        cea = {c.area_id: c.cea for c in compute_cea(profiles, fy)}
        got = assign_groups(profiles, cea)
        for aid, g in zip(plan.ward_ids, plan.groups):
            if got[aid] is not GroupLabel[f"G{g + 1}"]:
                raise ConfigError(
                    "infeasible config: expenditure ratios do not separate advantaged from "
                    f"disadvantaged wards (ward {aid}, fiscal year {fy or 'pooled'})")


def _epoch(ts: datetime) -> int:
    return int(ts.timestamp())


def _from_epoch(sec) -> datetime:
    return datetime.fromtimestamp(int(sec), tz=timezone.utc)


def _venues(cfg: SynthConfig, plan: _Plan) -> list[list[Venue]]:
    """Venues grouped by ward, in plan order."""
    rng = _rng(cfg.seed, "venues")
    cultural = sorted(load_cultural_categories())
    lo, hi = cfg.venues_per_ward
    e = cfg.effect
    margin = 0.02 * cfg.cell_deg
    inner = cfg.cell_deg - 2 * margin
    base_hi = _epoch(_window(cfg, 0)[0])
    base_lo = _epoch(_window(cfg, -_BASELINE_YEARS)[0])
    spans = [tuple(map(_epoch, _window(cfg, t))) for t in range(cfg.years)]
    out: list[list[Venue]] = []
    n = 0
    for g, ring in zip(plan.groups, plan.rings):
        s, west = ring[0]
        n_base = int(rng.integers(lo, hi + 1))
        noise = rng.normal(0.0, e.noise_sd, cfg.years)
        stamps = [rng.integers(base_lo, base_hi, n_base)]
        for t, (t0, t1) in enumerate(spans):
            n_new = int(round(max(0.0, e.mu(g, t) + float(noise[t]))))
            stamps.append(rng.integers(t0, t1, n_new))
        secs = np.concatenate(stamps)
        k = len(secs)
        lats = s + margin + rng.random(k) * inner
        lons = west + margin + rng.random(k) * inner
        is_cult = rng.random(k) < cfg.cultural_share_by_group[g]
        cult_idx = rng.integers(len(cultural), size=k)
        other_idx = rng.integers(len(NON_CULTURAL_CATEGORIES), size=k)
        ward = []
        for i in range(k):
            n += 1
            cat = cultural[cult_idx[i]] if is_cult[i] else NON_CULTURAL_CATEGORIES[other_idx[i]]
            ward.append(Venue(f"V{n:06d}", float(lats[i]), float(lons[i]), cat,
                              _from_epoch(secs[i]), None))
        out.append(ward)
    return out


def _transitions(cfg: SynthConfig, plan: _Plan, per_ward: list[list[Venue]]) -> list[Transition]:
    rng = _rng(cfg.seed, "transitions")
    e = cfg.effect
    n_w = cfg.ward_count
    scale = _in_scale(cfg, plan)
    n_intra = int(round((1.0 - cfg.inter_area_mix) * cfg.transitions_per_year))
    created = [np.array([_epoch(v.created_at) for v in vs], dtype=np.int64) for vs in per_ward]
    out: list[Transition] = []
    for t in range(cfg.years):
        t0, t1 = map(_epoch, _window(cfg, t))
        # venues are in creation order within each stamp block, so filter explicitly
        active = [np.flatnonzero(c < t1) for c in created]
        sizes = np.array([len(a) for a in active])
        mu = np.array([e.mu(g, t) for g in plan.groups])
        n_in = np.rint(np.maximum(0.0, scale * (mu + rng.normal(0.0, e.noise_sd, n_w)))).astype(int)
        dst_w = np.repeat(np.arange(n_w), n_in)
        src_w = rng.integers(n_w - 1, size=len(dst_w))
        src_w = src_w + (src_w >= dst_w)
        src_i = (rng.random(len(dst_w)) * sizes[src_w]).astype(int)
        dst_i = (rng.random(len(dst_w)) * sizes[dst_w]).astype(int)

        ward = rng.integers(n_w, size=n_intra)
        a_i = (rng.random(n_intra) * sizes[ward]).astype(int)
        b_i = (rng.random(n_intra) * (sizes[ward] - 1)).astype(int)
        b_i = b_i + (b_i >= a_i)

        pairs = list(zip(src_w, src_i, dst_w, dst_i)) + list(zip(ward, a_i, ward, b_i))
        u = rng.random(len(pairs))
        for (wa, ia, wb, ib), frac in zip(pairs, u):
            va = active[wa][ia]
            vb = active[wb][ib]
            lo = max(t0, int(created[wa][va]), int(created[wb][vb]))
            when = lo + int(frac * (t1 - lo))
            out.append(Transition(per_ward[wa][va].venue_id, per_ward[wb][vb].venue_id,
                                  _from_epoch(when)))
    return out


def _plant_defects(cfg: SynthConfig, transitions: list[Transition], venues: list[Venue]) -> list[Transition]:
    if not (cfg.unknown_id_rows or cfg.self_loop_rows):
        return transitions
    rng = _rng(cfg.seed, "defects")
    start, end = map(_epoch, _window(cfg, 0))
    bad = [Transition(f"UNKNOWN{i:04d}", venues[0].venue_id, _from_epoch(rng.integers(start, end)))
           for i in range(cfg.unknown_id_rows)]
    for _ in range(cfg.self_loop_rows):
        v = venues[int(rng.integers(len(venues)))]
        bad.append(Transition(v.venue_id, v.venue_id, _from_epoch(rng.integers(start, end))))
    out = list(transitions)
    for tr in bad:
        out.insert(int(rng.integers(len(out) + 1)), tr)
    return out


@dataclass
class CityBundle:
    config: SynthConfig
    venues: list[Venue]
    transitions: list[Transition]
    profiles: list[AreaProfile]
    truth: dict

    def files(self) -> dict[str, bytes]:
        """The five canonical tables plus ground truth, as bytes."""
        return {
            "venues.csv": ingest.write_venues(self.venues),
            "transitions.csv": ingest.write_transitions(self.transitions),
            "polygons.csv": ingest.write_polygons(self.profiles),
            "imd.csv": ingest.write_imd(self.profiles),
            "expenditure.csv": ingest.write_expenditure(self.profiles),
            GROUND_TRUTH_FILE: (json.dumps(self.truth, indent=2, sort_keys=True) + "\n").encode("utf-8"),
        }

    def write(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for name, data in self.files().items():
            path = directory / name
            with open(path, "wb") as fh:
                fh.write(data)
            written.append(path)
        return written


def generate_city(cfg: SynthConfig) -> CityBundle:
    """Build every input table for ``cfg``; identical configs give identical bundles."""
    cfg.validate()
    plan = _plan(cfg)
    profiles = _profiles(cfg, plan)
    _check_planting(cfg, plan, profiles)
    per_ward = _venues(cfg, plan)
    venues = [v for ward in per_ward for v in ward]
    transitions = _plant_defects(cfg, _transitions(cfg, plan, per_ward), venues)
    return CityBundle(cfg, venues, transitions, profiles, ground_truth(cfg, plan))


def generate_areas(cfg: SynthConfig) -> list[AreaProfile]:
    """Just the area profiles (IMD, expenditure, polygons) of the city."""
    cfg.validate()
    return _profiles(cfg, _plan(cfg))


def generate_venues(cfg: SynthConfig) -> tuple[list[Venue], dict[str, str]]:
    """The venues of the city and the ward each was placed in."""
    cfg.validate()
    plan = _plan(cfg)
    per_ward = _venues(cfg, plan)
    planted = {v.venue_id: aid for aid, ward in zip(plan.ward_ids, per_ward) for v in ward}
    return [v for ward in per_ward for v in ward], planted


def ground_truth(cfg: SynthConfig, plan: _Plan | None = None) -> dict:
    """Planted labels per ward and expected per-(group, t) feature means.

    ``venue_created_number`` means are exact when the effect parameters are
    integers and noise vanishes; ``in_degree_centrality`` means are the
    expectation before rounding.
    """
    if plan is None:
        plan = _plan(cfg)
    e = cfg.effect
    scale = _in_scale(cfg, plan)
    km2 = [polygon_area_km2(r) for r in plan.rings]
    means: dict[str, dict[str, dict[str, float]]] = {}
    for g in range(4):
        members = [w for w, gw in enumerate(plan.groups) if gw == g]
        if not members:
            continue
        label = f"G{g + 1}"
        per_t = {}
        for t in range(cfg.years):
            mu = e.mu(g, t)
            per_t[str(t + 1)] = {
                "venue_created_number": mu,
                "venue_created_density": math.fsum(mu / km2[w] for w in members) / len(members),
                "in_degree_centrality": scale * mu,
            }
        means[label] = per_t
    return {
        "seed": cfg.seed,
        "groups": {aid: f"G{g + 1}" for aid, g in zip(plan.ward_ids, plan.groups)},
        "group_sizes": {f"G{i + 1}": n for i, n in enumerate(cfg.group_sizes)},
        "cell_means": means,
        "fiscal_years": cfg.fiscal_years,
        "planted_defects": cfg.unknown_id_rows + cfg.self_loop_rows,
    }


def generate_panel(cfg: SynthConfig) -> Panel:
    """A panel drawn straight from the effect model, bypassing the city.

    Every feature of ward ``w`` at time ``t`` is ``mu[g][t]`` plus independent
    Gaussian noise. Used for calibration studies where only the statistics
    engine is under test.
    """
    cfg.validate()
    plan = _plan(cfg)
    rng = _rng(cfg.seed, "panel")
    e = cfg.effect
    obs = []
    for aid, g in sorted(zip(plan.ward_ids, plan.groups)):
        label = GroupLabel[f"G{g + 1}"]
        for t in range(cfg.years):
            vals = e.mu(g, t) + rng.normal(0.0, e.noise_sd, len(FEATURES))
            obs.append(PanelObservation(aid, label, t + 1, *(float(v) for v in vals)))
    return Panel(obs)


def synthetic_venue_table(n_rows: int, seed: int = 0) -> bytes:
    """A venues.csv of exactly ``n_rows`` valid rows, for ingestion scale checks."""
    rng = _rng(seed, "venues")
    lats = rng.uniform(51.28, 51.70, n_rows)
    lons = rng.uniform(-0.51, 0.33, n_rows)
    secs = rng.integers(0, 6 * 365 * 86400, n_rows)
    cats = rng.integers(len(NON_CULTURAL_CATEGORIES), size=n_rows)
    return ingest.write_venues(
        Venue(f"V{i + 1:06d}", float(la), float(lo), NON_CULTURAL_CATEGORIES[int(c)],
              _BASELINE_START + timedelta(seconds=int(s)))
        for i, (la, lo, s, c) in enumerate(zip(lats, lons, secs, cats)))


def write_config(cfg: SynthConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def bundle_paths(directory) -> dict[str, str]:
    return {name: os.path.join(directory, name) for name in BUNDLE_FILES}
