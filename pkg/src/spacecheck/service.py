"""The model-checker service: evaluates a property against the current state.

Requests carry a formula and either an inline snapshot or rely on a
configured location cache. Work is handed to a bounded pool through a FIFO
admission queue; the time a request spends in that queue is reported as
``wait_ms`` and the evaluation itself as ``compute_ms``.
"""

from __future__ import annotations

import json
import logging
import os
import queue
import statistics
import threading
import time
import urllib.error
import urllib.request
from collections import deque
from concurrent.futures import Future
from dataclasses import asdict, dataclass
from functools import lru_cache
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources
from pathlib import Path
from typing import Mapping

from .checker import Checker
from .formula import Formula, FormulaSyntaxError, parse
from .space import ClosureModel, ModelFormatError, parse_model
from .store import JsonServer, Snapshot, ValuationStats, to_valuation

log = logging.getLogger(__name__)

BUNDLED_MODELS = {"mini-city": "mini_city.space"}


class ServiceError(Exception):
    def __init__(self, status: int, message: str, **extra):
        self.status = status
        self.extra = extra
        super().__init__(message)

    def to_json(self) -> dict:
        return {"error": str(self), **self.extra}


@dataclass(frozen=True)
class CheckRequest:
    formula: str
    snapshot: Snapshot | None = None
    mode: str = "boolean"
    presence_prop: str = "taxi"

    @classmethod
    def from_json(cls, doc: Mapping) -> CheckRequest:
        if not isinstance(doc, Mapping):
            raise ServiceError(400, "request body must be an object")
        formula = doc.get("formula")
        if not isinstance(formula, str):
            raise ServiceError(400, "'formula' must be a string")
        mode = doc.get("mode", "boolean")
        if mode not in ("boolean", "points"):
            raise ServiceError(400, "'mode' must be 'boolean' or 'points'")
        prop = doc.get("presence_prop", "taxi")
        if not isinstance(prop, str) or not prop:
            raise ServiceError(400, "'presence_prop' must be a non-empty string")
        snap = doc.get("snapshot")
        if snap is not None:
            try:
                snap = Snapshot.from_json(snap)
            except (ValueError, TypeError) as exc:
                raise ServiceError(400, f"bad snapshot: {exc}") from None
        return cls(formula, snap, mode, prop)

    def to_json(self) -> dict:
        doc = {"formula": self.formula, "mode": self.mode, "presence_prop": self.presence_prop}
        if self.snapshot is not None:
            doc["snapshot"] = self.snapshot.to_json()
        return doc


@dataclass(frozen=True)
class CheckResult:
    satisfied: bool
    compute_ms: float
    wait_ms: float
    model_version: str
    points: list[str] | None = None

    def to_json(self) -> dict:
        doc = asdict(self)
        if self.points is None:
            del doc["points"]
        return doc


def load_model(path: str | Path) -> ClosureModel:
    """Read a model file; bundled fixtures are addressable by name."""
    name = str(path)
    if name in BUNDLED_MODELS:
        text = resources.files("spacecheck.data").joinpath(BUNDLED_MODELS[name]).read_text()
    else:
        text = Path(path).read_text()
    return parse_model(text)


@lru_cache(maxsize=256)
def _parse_cached(text: str) -> Formula:
    return parse(text)


class CheckerService:
    def __init__(
        self,
        model: ClosureModel,
        cache_url: str | None = None,
        workers: int | None = None,
        queue_size: int = 1024,
        fetch_timeout: float = 5.0,
    ):
        self.model = model
        self.cache_url = cache_url.rstrip("/") if cache_url else None
        self.fetch_timeout = fetch_timeout
        self.checker = Checker()
        self.valuation_stats = ValuationStats()
        self._queue: queue.Queue = queue.Queue(maxsize=queue_size)
        self._lock = threading.Lock()
        self.requests = 0
        self.errors = 0
        self._compute: deque[float] = deque(maxlen=10_000)
        self._workers = [
            threading.Thread(target=self._work, daemon=True, name=f"checker-{i}")
            for i in range(workers or os.cpu_count() or 1)
        ]
        for t in self._workers:
            t.start()

    @property
    def model_version(self) -> str:
        return self.model.version

    def _fetch_snapshot(self) -> Snapshot:
        if self.cache_url is None:
            raise ServiceError(400, "no snapshot given and no location cache configured")
        try:
            with urllib.request.urlopen(self.cache_url + "/locations", timeout=self.fetch_timeout) as resp:
                return Snapshot.from_json(json.load(resp))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise ServiceError(502, f"location cache unavailable: {exc}") from None

    def _evaluate(self, formula: Formula, snap: Snapshot, req: CheckRequest) -> tuple[bool, list[str] | None]:
        model = to_valuation(snap, self.model, req.presence_prop, self.valuation_stats)
        points = self.checker.sat(model, formula)
        names = model.space.names(points) if req.mode == "points" else None
        return bool(points), names

    def _work(self) -> None:
        while True:
            job = self._queue.get()
            if job is None:
                return
            fut, enqueued, formula, snap, req = job
            started = time.perf_counter()
            try:
                satisfied, names = self._evaluate(formula, snap, req)
            except Exception as exc:  # surfaced to the caller as a 500
                fut.set_exception(exc)
                continue
            done = time.perf_counter()
            fut.set_result(CheckResult(
                satisfied=satisfied,
                points=names,
                compute_ms=(done - started) * 1000,
                wait_ms=(started - enqueued) * 1000,
                model_version=self.model.version,
            ))

    def handle_check(self, req: CheckRequest | Mapping) -> CheckResult:
        with self._lock:
            self.requests += 1
        try:
            if not isinstance(req, CheckRequest):
                req = CheckRequest.from_json(req)
            try:
                formula = _parse_cached(req.formula)
            except FormulaSyntaxError as exc:
                raise ServiceError(400, str(exc), position=exc.position, expected=exc.expected) from None
            # snapshot is frozen at arrival; an inline one wins over the cache
            snap = req.snapshot if req.snapshot is not None else self._fetch_snapshot()
            fut: Future = Future()
            try:
                self._queue.put_nowait((fut, time.perf_counter(), formula, snap, req))
            except queue.Full:
                raise ServiceError(503, "admission queue full") from None
            result = fut.result()
        except Exception:
            with self._lock:
                self.errors += 1
            raise
        with self._lock:
            self._compute.append(result.compute_ms)
        return result

    def metrics(self) -> dict:
        with self._lock:
            samples = sorted(self._compute)
            doc = {"requests": self.requests, "errors": self.errors}
        if len(samples) >= 2:
            q = statistics.quantiles(samples, n=100, method="inclusive")
            doc["p50_compute_ms"], doc["p95_compute_ms"] = q[49], q[94]
        elif samples:
            doc["p50_compute_ms"] = doc["p95_compute_ms"] = samples[0]
        else:
            doc["p50_compute_ms"] = doc["p95_compute_ms"] = None
        return doc

    def close(self) -> None:
        for _ in self._workers:
            self._queue.put(None)


class _Handler(BaseHTTPRequestHandler):
    service: CheckerService

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
        if self.path == "/healthz":
            self._send(200, {"status": "ok", "model_version": self.service.model_version})
        elif self.path == "/metrics":
            self._send(200, self.service.metrics())
        else:
            self._send(404, {"error": "not found"})

    def do_POST(self):
        if self.path != "/check":
            self._send(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", 0))
            try:
                doc = json.loads(self.rfile.read(length) or b"null")
            except ValueError as exc:
                raise ServiceError(400, f"invalid JSON: {exc}") from None
            result = self.service.handle_check(doc)
        except ServiceError as exc:
            self._send(exc.status, exc.to_json())
            return
        except Exception as exc:
            log.exception("check failed")
            self._send(500, {"error": str(exc)})
            return
        self._send(200, result.to_json())


def make_checker_server(service: CheckerService, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    handler = type("CheckerHandler", (_Handler,), {"service": service})
    return JsonServer((host, port), handler)


__all__ = [
    "CheckRequest", "CheckResult", "CheckerService", "ModelFormatError", "ServiceError",
    "load_model", "make_checker_server",
]
