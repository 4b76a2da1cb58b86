"""Workload generation, replay, SLA statistics and deployment cost."""

from __future__ import annotations

import json
import math
import random
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Mapping, Sequence

import numpy as np

from .sim import DEFAULT_TIMEOUT, Deployment, resolve_target, simulate
from .trace import DEFAULT_SLA, RequestRecord, TraceEntry, WorkloadTrace

BUCKET_S = 3 * 3600
DAY_S = 24 * 3600

# Properties checked on every presence in the taxi workload, plus the bike
# example property used with the mini-city fixture.
PROPERTIES = {
    "P1": "taxi R(!HEALTHHOSPITAL | ((TRANSPORTSUBWAY | TRANSPORTBUSSTOP) & taxi)) DEPARTMENTSTORE",
    "P2": "taxi & N2 (ACCOMMOHOTEL | HEALTHHOSPITAL) & N (FOODRESTAURANT)",
    "P3": "taxi & N2 (TOURISTATTRACTION & TRANSPORTSUBWAY) T TOURISTZOO",
    "F2": "bike R(!bridge | (bus_stop & bike)) main_square",
}

# Calls per 3-hour period over one weekday, starting at 06:00.
WEEKDAY_CALLS = (312, 1283, 1663, 1676, 1668, 1202, 705, 355)


def formula_text(ref: str) -> str:
    return PROPERTIES.get(ref, ref)


# -- synthetic traces ---------------------------------------------------------

@dataclass(frozen=True)
class SineProfile:
    """Daily request rate as a sine wave, in calls per 3-hour period.

    The rate peaks at ``peak`` at hour-of-day ``phase`` and bottoms out at
    ``trough`` twelve hours later.
    """

    peak: float
    trough: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.peak >= self.trough >= 0:
            raise ValueError("need peak >= trough >= 0")

    def rate(self, hour: float) -> float:
        """Arrivals per second at a given hour of day."""
        mid = (self.peak + self.trough) / 2
        amp = (self.peak - self.trough) / 2
        per_bucket = mid + amp * math.cos(2 * math.pi * (hour - self.phase) / 24)
        return per_bucket / BUCKET_S

    @property
    def daily_calls(self) -> float:
        return 8 * (self.peak + self.trough) / 2

    @classmethod
    def fit(cls, counts: Sequence[float] = WEEKDAY_CALLS, start_hour: float = 6.0) -> SineProfile:
        """Least-squares fit to per-period counts (3-hour buckets from ``start_hour``)."""
        k = len(counts)
        width = 24 / k
        centers = np.array([start_hour + width * (i + 0.5) for i in range(k)])
        w = 2 * np.pi * centers / 24
        design = np.column_stack([np.ones(k), np.cos(w), np.sin(w)])
        (mid, a, b), *_ = np.linalg.lstsq(design, np.asarray(counts, float), rcond=None)
        # a bucket count averages the sine over its width
        damp = math.sin(math.pi * width / 24) / (math.pi * width / 24)
        amp = math.hypot(a, b) / damp
        peak_hour = math.degrees(math.atan2(b, a)) / 15
        amp = min(amp, mid)
        return cls(peak=float(mid + amp), trough=float(mid - amp), phase=float(peak_hour % 24))


def synth_trace(
    profile: SineProfile,
    duration: float = DAY_S,
    seed: int = 0,
    start_hour: float = 6.0,
    entities: Sequence[str] | None = None,
    pois: Sequence[str] | None = None,
    formula_refs: Sequence[str] = ("P1", "P2", "P3"),
) -> WorkloadTrace:
    """Inhomogeneous Poisson arrivals following ``profile``, by thinning."""
    rng = random.Random(seed)
    lam_max = profile.peak / BUCKET_S
    entities = list(entities) if entities else [f"taxi{i}" for i in range(1000)]
    out = []
    t = 0.0
    if lam_max > 0:
        while True:
            t += rng.expovariate(lam_max)
            if t >= duration:
                break
            if rng.random() * lam_max <= profile.rate(start_hour + t / 3600):
                out.append(TraceEntry(
                    t,
                    rng.choice(entities),
                    rng.choice(pois) if pois else "",
                    rng.choice(list(formula_refs)),
                ))
    return WorkloadTrace(tuple(out), duration)


def hour_trace(
    n: int = 536,
    duration: float = 3600.0,
    seed: int = 0,
    entities: Sequence[str] | None = None,
    pois: Sequence[str] | None = None,
    formula_refs: Sequence[str] = ("P1", "P2", "P3"),
) -> WorkloadTrace:
    """``n`` requests spread evenly over ``duration`` with seeded jitter.

    The first request is at 0 and the last at ``duration``; the others are
    jittered by up to half a slot around an even grid.
    """
    rng = random.Random(seed)
    entities = list(entities) if entities else [f"taxi{i}" for i in range(1000)]
    if n == 1:
        offsets = [0.0]
    else:
        slot = duration / (n - 1)
        offsets = [0.0] + [slot * (i + rng.uniform(-0.5, 0.5)) for i in range(1, n - 1)] + [duration]
    entries = [
        TraceEntry(o, rng.choice(entities), rng.choice(pois) if pois else "", rng.choice(list(formula_refs)))
        for o in sorted(offsets)
    ]
    return WorkloadTrace(tuple(entries), duration)


# -- replay -------------------------------------------------------------------

def replay(
    trace: WorkloadTrace,
    multiplier: float,
    target: str | Deployment,
    concurrency: int = 64,
    sla: float = DEFAULT_SLA,
    timeout: float = DEFAULT_TIMEOUT,
    seed: int = 0,
    cache_url: str | None = None,
    presence_prop: str = "taxi",
    clock: Callable[[], float] = time.monotonic,
    sleep: Callable[[float], None] = time.sleep,
) -> list[RequestRecord]:
    """Submit request ``i`` at ``offset_i / multiplier``.

    ``target`` is a checker base URL, ``sim:NAME``, or a deployment object;
    simulated targets run in virtual time. Against a live checker the
    replay keeps the entity positions seen so far and sends them as the
    snapshot, or pushes each presence to ``cache_url`` first when given.
    """
    if multiplier <= 0:
        raise ValueError("multiplier must be positive")
    scaled = trace.scaled(multiplier)
    if not isinstance(target, str) or target.startswith("sim:"):
        deployment = resolve_target(target) if isinstance(target, str) else target
        return simulate(scaled, deployment, seed=seed, sla=sla, timeout=timeout).records
    return _replay_http(scaled, target.rstrip("/"), concurrency, sla, timeout, cache_url,
                        presence_prop, clock, sleep)


def _post_json(url: str, doc: dict, timeout: float, method: str = "POST") -> dict:
    req = urllib.request.Request(url, data=json.dumps(doc).encode(), method=method,
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return json.load(resp)


def _replay_http(trace, url, concurrency, sla, timeout, cache_url, presence_prop, clock, sleep):
    positions: dict[str, tuple[str, float]] = {}
    records: list[RequestRecord | None] = [None] * len(trace)
    lock = threading.Lock()
    t0 = clock()

    def one(i: int, entry: TraceEntry, submit: float, snapshot: dict | None) -> None:
        body = {"formula": formula_text(entry.formula_ref), "presence_prop": presence_prop}
        if snapshot is not None:
            body["snapshot"] = snapshot
        try:
            if cache_url and entry.entity_id and entry.poi_id:
                _post_json(f"{cache_url.rstrip('/')}/locations/{entry.entity_id}",
                           {"poi": entry.poi_id, "ts": entry.offset}, timeout, method="PUT")
            doc = _post_json(url + "/check", body, timeout)
            end = clock() - t0
            compute = min(doc.get("compute_ms", 0.0) / 1000, end - submit)
            rec = RequestRecord.make(i, submit, end - compute, end, url, sla=sla)
        except urllib.error.HTTPError as exc:
            end = clock() - t0
            rec = RequestRecord.make(i, submit, end, end, url, sla=sla, error=f"HTTP {exc.code}")
        except (TimeoutError, OSError) as exc:
            end = clock() - t0
            timed_out = end - submit >= timeout or "timed out" in str(exc)
            if timed_out:
                cut = submit + timeout
                rec = RequestRecord(i, submit, cut, cut, url, True, True)
            else:
                rec = RequestRecord.make(i, submit, end, end, url, sla=sla, error=str(exc) or type(exc).__name__)
        with lock:
            records[i] = rec

    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        for i, entry in enumerate(trace):
            delay = entry.offset - (clock() - t0)
            if delay > 0:
                sleep(delay)
            snapshot = None
            if not cache_url:
                if entry.entity_id and entry.poi_id:
                    positions[entry.entity_id] = (entry.poi_id, entry.offset)
                snapshot = {"snapshot_ts": entry.offset,
                            "entities": {e: {"poi": p, "ts": ts} for e, (p, ts) in positions.items()}}
            pool.submit(one, i, entry, clock() - t0, snapshot)
    return [r for r in records if r is not None]


# -- statistics ---------------------------------------------------------------

@dataclass(frozen=True)
class Spread:
    max: float
    min: float
    median: float

    @classmethod
    def of(cls, values: Sequence[float]) -> Spread:
        s = sorted(values)
        return cls(s[-1], s[0], s[(len(s) - 1) // 2])


@dataclass(frozen=True)
class StatSummary:
    count: int
    total: Spread
    wait: Spread
    compute: Spread
    violations_total: int
    violations_median: bool
    timeouts: int = 0
    errors: int = 0
    sla: float = DEFAULT_SLA

    def to_json(self) -> dict:
        doc = {k: getattr(self, k) for k in ("count", "violations_total", "violations_median",
                                             "timeouts", "errors", "sla")}
        for k in ("total", "wait", "compute"):
            s = getattr(self, k)
            doc[k] = {"max": s.max, "min": s.min, "median": s.median}
        return doc

    def table(self) -> str:
        rows = [f"{'':8}{'median':>10}{'min':>10}{'max':>10}"]
        for k in ("total", "wait", "compute"):
            s = getattr(self, k)
            rows.append(f"{k:8}{s.median:10.2f}{s.min:10.2f}{s.max:10.2f}")
        rows.append(f"requests {self.count}, SLA {self.sla:g}s: {self.violations_total} violations, "
                    f"median {'violates' if self.violations_median else 'within'} SLA"
                    + (f", {self.timeouts} timeouts" if self.timeouts else "")
                    + (f", {self.errors} errors" if self.errors else ""))
        return "\n".join(rows)


def summarize(records: Sequence[RequestRecord], sla: float = DEFAULT_SLA) -> StatSummary:
    """Order statistics (lower median) and strict SLA violation counts."""
    if not records:
        raise ValueError("no records to summarize")
    if sla <= 0:
        raise ValueError("SLA threshold must be positive")
    totals = [r.total for r in records]
    total = Spread.of(totals)
    return StatSummary(
        count=len(records),
        total=total,
        wait=Spread.of([r.wait for r in records]),
        compute=Spread.of([r.compute for r in records]),
        violations_total=sum(t > sla for t in totals),
        violations_median=total.median > sla,
        timeouts=sum(r.timed_out for r in records),
        errors=sum(bool(r.error) for r in records),
        sla=sla,
    )


# -- cost ---------------------------------------------------------------------

WORKING_DAYS = 21.73


@dataclass(frozen=True)
class VmDeployment:
    units: float
    unit_price_per_hr: float


@dataclass(frozen=True)
class FaasDeployment:
    sec_per_call: float
    gb: float
    price_per_gb_s: float
    price_per_request: float = 0.0


@dataclass(frozen=True)
class Period:
    hours: float
    calls: int
    deployment: VmDeployment | FaasDeployment
    label: str = ""

    def __post_init__(self):
        if self.hours <= 0 or self.calls < 0:
            raise ValueError("period needs hours > 0 and calls >= 0")
        prices = vars(self.deployment).values()
        if any(p < 0 for p in prices):
            raise ValueError("prices and sizes must be nonnegative")


@dataclass(frozen=True)
class CostPlan:
    periods: tuple[Period, ...]
    working_days: float = WORKING_DAYS


@dataclass(frozen=True)
class CostEstimate:
    per_period: tuple[float, ...]
    daily: float
    monthly: float


def period_cost(p: Period) -> float:
    d = p.deployment
    if isinstance(d, VmDeployment):
        return d.units * p.hours * d.unit_price_per_hr
    return p.calls * d.sec_per_call * d.gb * d.price_per_gb_s + p.calls * d.price_per_request


def estimate_cost(plan: CostPlan) -> CostEstimate:
    per = tuple(period_cost(p) for p in plan.periods)
    daily = sum(per)
    return CostEstimate(per, daily, daily * plan.working_days)


def plan_from_json(doc: Mapping, working_days: float = WORKING_DAYS) -> CostPlan:
    periods = []
    for p in doc["periods"]:
        d = dict(p["deployment"])
        kind = d.pop("kind")
        dep = VmDeployment(**d) if kind == "vm" else FaasDeployment(**d)
        periods.append(Period(p["hours"], p.get("calls", 0), dep, p.get("label", "")))
    return CostPlan(tuple(periods), doc.get("working_days", working_days))


def load_plans(text: str | None = None) -> dict[str, CostPlan]:
    """Named cost plans from JSON; the bundled replication plans by default."""
    if text is None:
        text = resources.files("spacecheck.data").joinpath("table1.json").read_text()
    doc = json.loads(text)
    wd = doc.get("working_days", WORKING_DAYS)
    if "periods" in doc:
        return {"plan": plan_from_json(doc, wd)}
    return {name: plan_from_json(p, wd) for name, p in doc["plans"].items()}


__all__ = [
    "CostEstimate", "CostPlan", "FaasDeployment", "PROPERTIES", "Period", "SineProfile", "StatSummary",
    "VmDeployment", "estimate_cost", "hour_trace", "load_plans", "replay", "summarize", "synth_trace",
]
