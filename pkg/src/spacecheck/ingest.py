"""From POI catalogs and trajectories to presence traces and accessibility graphs."""

from __future__ import annotations

import csv
import math
import random
from calendar import timegm
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .space import ClosureModel, PointSet, SpaceGraph

EARTH_RADIUS_M = 6_371_000.0
DEFAULT_RADIUS_M = 10.0


@dataclass(frozen=True)
class Poi:
    id: str
    name: str
    category: str
    lat: float
    lon: float

    def __post_init__(self):
        if not -90 <= self.lat <= 90 or not -180 <= self.lon <= 180:
            raise ValueError(f"POI {self.id!r} has invalid coordinates ({self.lat}, {self.lon})")
        if not self.id or any(c.isspace() for c in self.id):
            raise ValueError(f"invalid POI id {self.id!r}")


@dataclass(frozen=True)
class TrajectorySample:
    entity_id: str
    timestamp: float
    lat: float
    lon: float


@dataclass(frozen=True, order=True)
class PresenceEvent:
    entity_id: str
    timestamp: float
    poi_id: str


def haversine(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in meters between two (lat, lon) pairs in degrees."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def _haversine_many(lat: float, lon: float, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    lat1, lon1 = math.radians(lat), math.radians(lon)
    h = np.sin((lats - lat1) / 2) ** 2 + math.cos(lat1) * np.cos(lats) * np.sin((lons - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def match_presences(
    pois: Sequence[Poi],
    samples: Iterable[TrajectorySample],
    radius: float = DEFAULT_RADIUS_M,
) -> list[PresenceEvent]:
    """Record a presence wherever a sample lies strictly within ``radius`` of a POI.

    A sample near several POIs yields a presence at each (nearest first).
    A POI matched by two consecutive samples of the same entity is recorded
    only for the first of them.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if not pois:
        raise ValueError("empty POI catalog")
    lats = np.radians([p.lat for p in pois])
    lons = np.radians([p.lon for p in pois])
    ordered = sorted(samples, key=lambda s: (s.entity_id, s.timestamp, s.lat, s.lon))
    out: list[PresenceEvent] = []
    entity = None
    previous: set[str] = set()
    # the vectorised pass only prefilters; the scalar haversine decides
    slack = radius * 1e-6 + 1e-6
    for s in ordered:
        if s.entity_id != entity:
            entity, previous = s.entity_id, set()
        near = np.nonzero(_haversine_many(s.lat, s.lon, lats, lons) < radius + slack)[0]
        hits = []
        for k in near:
            d = haversine((s.lat, s.lon), (pois[k].lat, pois[k].lon))
            if d < radius:
                hits.append((d, pois[k].id))
        hits.sort()
        current = {pid for _, pid in hits}
        for _, pid in hits:
            if pid not in previous:
                out.append(PresenceEvent(s.entity_id, s.timestamp, pid))
        previous = current
    return out


def build_accessibility(
    presences: Iterable[PresenceEvent], pois: Iterable[Poi] | None = None
) -> SpaceGraph:
    """Connect every pair of distinct POIs visited one after the other by an entity."""
    ids: dict[str, None] = {}
    if pois is not None:
        for p in pois:
            ids.setdefault(p.id)
    by_entity: dict[str, list[PresenceEvent]] = defaultdict(list)
    for ev in presences:
        ids.setdefault(ev.poi_id)
        by_entity[ev.entity_id].append(ev)
    edges: set[tuple[str, str]] = set()
    for seq in by_entity.values():
        seq.sort(key=lambda ev: ev.timestamp)
        for a, b in zip(seq, seq[1:]):
            if a.poi_id != b.poi_id:
                edges.add(tuple(sorted((a.poi_id, b.poi_id))))
    return SpaceGraph.build(ids, sorted(edges), symmetric=True)


def model_from_pois(space: SpaceGraph, pois: Iterable[Poi]) -> ClosureModel:
    """Category propositions over the points of an accessibility graph."""
    by_cat: dict[str, list[str]] = defaultdict(list)
    for p in pois:
        if p.id in space.index:
            by_cat[p.category].append(p.id)
    return ClosureModel.from_ids(space, by_cat)


# Categories used by the taxi properties, plus filler.
SYNTH_CATEGORIES = (
    "HEALTHHOSPITAL", "TRANSPORTSUBWAY", "TRANSPORTBUSSTOP", "DEPARTMENTSTORE",
    "ACCOMMOHOTEL", "FOODRESTAURANT", "TOURISTATTRACTION", "TOURISTZOO",
    "FOODCAFE", "EDUCATIONUNIVERSITY", "SHOPPINGMALL", "PARK",
)


def synth_model(
    nodes: int,
    edges: int,
    props: int,
    seed: int = 0,
    categories: Sequence[str] = SYNTH_CATEGORIES,
) -> ClosureModel:
    """Seeded connected random symmetric graph with ``props`` (category, point)
    assignments spread over the points."""
    if nodes < 1:
        raise ValueError("need at least one node")
    if edges < nodes - 1:
        raise ValueError(f"{edges} edges cannot connect {nodes} nodes")
    if edges > nodes * (nodes - 1) // 2:
        raise ValueError(f"{edges} edges exceed the simple-graph maximum for {nodes} nodes")
    if props > nodes * len(categories):
        raise ValueError(f"{props} assignments exceed {nodes} nodes x {len(categories)} categories")
    rng = random.Random(seed)
    ids = [f"poi{i}" for i in range(nodes)]
    order = list(range(nodes))
    rng.shuffle(order)
    rel: set[tuple[int, int]] = set()
    for k in range(1, nodes):
        a, b = order[k], order[rng.randrange(k)]
        rel.add((min(a, b), max(a, b)))
    while len(rel) < edges:
        a, b = rng.randrange(nodes), rng.randrange(nodes)
        if a != b:
            rel.add((min(a, b), max(a, b)))
    space = SpaceGraph.build(ids, [(ids[a], ids[b]) for a, b in sorted(rel)], symmetric=True)
    chosen: set[tuple[int, int]] = set()
    while len(chosen) < props:
        chosen.add((rng.randrange(len(categories)), rng.randrange(nodes)))
    bits = [0] * len(categories)
    for c, x in chosen:
        bits[c] |= 1 << x
    valuation = {cat: PointSet(b, nodes) for cat, b in zip(categories, bits) if b}
    return ClosureModel(space, valuation)


# -- CSV ----------------------------------------------------------------------

def parse_timestamp(text: str) -> float:
    """Epoch seconds, or ``YYYY-MM-DD HH:MM:SS`` read as UTC."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    return float(timegm(datetime.strptime(text, "%Y-%m-%d %H:%M:%S").timetuple()))


def read_pois(path: str | Path) -> list[Poi]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    pois = [Poi(r["id"], r["name"], r["category"], float(r["lat"]), float(r["lon"])) for r in rows]
    seen = set()
    for p in pois:
        if p.id in seen:
            raise ValueError(f"duplicate POI id {p.id!r}")
        seen.add(p.id)
    return pois


def read_trajectories(path: str | Path, lonlat: bool = False) -> list[TrajectorySample]:
    """Read ``entity_id,timestamp,lat,lon`` rows.

    A header naming the columns is honoured. Header-less files are read
    positionally; ``lonlat=True`` selects the T-Drive order
    ``entity_id,timestamp,lon,lat``.
    """
    out = []
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and "entity_id" in [c.strip() for c in rows[0]]:
        header = [c.strip() for c in rows[0]]
        col = {name: header.index(name) for name in ("entity_id", "timestamp", "lat", "lon")}
        rows = rows[1:]
    else:
        col = {"entity_id": 0, "timestamp": 1, "lat": 3 if lonlat else 2, "lon": 2 if lonlat else 3}
    for r in rows:
        if not r:
            continue
        out.append(TrajectorySample(
            r[col["entity_id"]].strip(),
            parse_timestamp(r[col["timestamp"]]),
            float(r[col["lat"]]),
            float(r[col["lon"]]),
        ))
    return out


def write_presences(path: str | Path, presences: Iterable[PresenceEvent]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["entity_id", "timestamp", "poi_id"])
        for ev in presences:
            w.writerow([ev.entity_id, repr(ev.timestamp), ev.poi_id])


def read_presences(path: str | Path) -> list[PresenceEvent]:
    with open(path, newline="") as fh:
        return [
            PresenceEvent(r["entity_id"], parse_timestamp(r["timestamp"]), r["poi_id"])
            for r in csv.DictReader(fh)
        ]
