"""The location cache: current entity -> POI map with last-writer-wins updates."""

from __future__ import annotations

import json
import logging
import re
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from types import MappingProxyType
from typing import Mapping

from .space import ClosureModel, PointSet

log = logging.getLogger(__name__)

APPLIED = "applied"
STALE = "stale"


@dataclass(frozen=True)
class EntityLocation:
    entity_id: str
    poi_id: str
    timestamp: float

    def __post_init__(self):
        if not isinstance(self.entity_id, str) or not self.entity_id:
            raise ValueError("entity_id must be a non-empty string")
        if not isinstance(self.poi_id, str) or not self.poi_id:
            raise ValueError("poi_id must be a non-empty string")
        if isinstance(self.timestamp, bool) or not isinstance(self.timestamp, (int, float)):
            raise ValueError("timestamp must be a number")


@dataclass(frozen=True)
class Snapshot:
    entities: Mapping[str, EntityLocation]
    snapshot_ts: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "entities", MappingProxyType(dict(self.entities)))

    def __len__(self) -> int:
        return len(self.entities)

    @classmethod
    def from_positions(cls, positions: Mapping[str, str], ts: float = 0.0) -> Snapshot:
        """Convenience for tests and inline requests: entity -> poi."""
        return cls({e: EntityLocation(e, p, ts) for e, p in positions.items()}, ts)

    def to_json(self) -> dict:
        return {
            "snapshot_ts": self.snapshot_ts,
            "entities": {e: {"poi": loc.poi_id, "ts": loc.timestamp} for e, loc in self.entities.items()},
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> Snapshot:
        if not isinstance(doc, Mapping) or not isinstance(doc.get("entities", {}), Mapping):
            raise ValueError("snapshot must be an object with an 'entities' object")
        ents = {}
        for e, rec in doc.get("entities", {}).items():
            if not isinstance(rec, Mapping):
                raise ValueError(f"malformed record for entity {e!r}")
            ents[e] = EntityLocation(e, rec.get("poi"), rec.get("ts", 0.0))
        return cls(ents, float(doc.get("snapshot_ts", 0.0)))


@dataclass
class LocationStore:
    """Thread-safe store. An update is applied unless the stored record for the
    entity carries a strictly newer timestamp; equal timestamps overwrite.

    ``horizon`` (seconds), if set, hides entities whose last timestamp is older
    than ``now - horizon`` at snapshot time.
    """

    horizon: float | None = None
    clock: object = field(default=time.time, repr=False)
    _data: dict[str, EntityLocation] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def update(self, loc: EntityLocation) -> str:
        with self._lock:
            old = self._data.get(loc.entity_id)
            if old is not None and old.timestamp > loc.timestamp:
                return STALE
            self._data[loc.entity_id] = loc
            return APPLIED

    def get(self, entity_id: str) -> EntityLocation | None:
        with self._lock:
            return self._data.get(entity_id)

    def snapshot(self) -> Snapshot:
        now = self.clock()
        with self._lock:
            data = dict(self._data)
        if self.horizon is not None:
            data = {e: loc for e, loc in data.items() if loc.timestamp >= now - self.horizon}
        return Snapshot(data, now)

    def __len__(self) -> int:
        with self._lock:
            return len(self._data)


@dataclass
class ValuationStats:
    unknown_pois: int = 0


def to_valuation(
    snap: Snapshot,
    model: ClosureModel,
    presence_prop: str = "taxi",
    stats: ValuationStats | None = None,
) -> ClosureModel:
    """``model`` with ``presence_prop`` holding exactly at the occupied POIs.

    POIs absent from the model are skipped and counted in ``stats``.
    """
    index = model.space.index
    bits = 0
    skipped = 0
    for loc in snap.entities.values():
        i = index.get(loc.poi_id)
        if i is None:
            skipped += 1
            continue
        bits |= 1 << i
    if skipped:
        log.warning("snapshot references %d unknown POI(s)", skipped)
        if stats is not None:
            stats.unknown_pois += skipped
    dynamic = dict(model.dynamic)
    dynamic[presence_prop] = PointSet(bits, model.space.size)
    return model.with_dynamic(dynamic)


# -- HTTP ---------------------------------------------------------------------

_ENTITY_PATH = re.compile(r"^/locations/([^/]+)$")


class _Handler(BaseHTTPRequestHandler):
    store: LocationStore  # set on the per-server subclass

    def log_message(self, fmt, *args):
        log.debug("%s - " + fmt, self.address_string(), *args)

    def _send(self, code: int, doc: dict) -> None:
        body = json.dumps(doc).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/locations":
            self._send(200, self.store.snapshot().to_json())
        elif self.path == "/healthz":
            self._send(200, {"status": "ok"})
        elif m := _ENTITY_PATH.match(self.path):
            loc = self.store.get(m.group(1))
            if loc is None:
                self._send(404, {"error": "unknown entity"})
            else:
                self._send(200, {"entity_id": loc.entity_id, "poi": loc.poi_id, "ts": loc.timestamp})
        else:
            self._send(404, {"error": "not found"})

    def do_PUT(self):
        m = _ENTITY_PATH.match(self.path)
        if not m:
            self._send(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", 0))
            doc = json.loads(self.rfile.read(length) or b"null")
            if not isinstance(doc, dict):
                raise ValueError("body must be an object")
            loc = EntityLocation(m.group(1), doc.get("poi"), doc.get("ts"))
        except (ValueError, TypeError) as exc:
            self._send(400, {"error": str(exc)})
            return
        self._send(200, {"status": self.store.update(loc)})


class JsonServer(ThreadingHTTPServer):
    daemon_threads = True
    request_queue_size = 256  # the stdlib default backlog of 5 resets bursts


def make_cache_server(store: LocationStore, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    handler = type("CacheHandler", (_Handler,), {"store": store})
    return JsonServer((host, port), handler)
