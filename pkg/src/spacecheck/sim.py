"""Discrete-event simulation of checker deployments.

Backends:

* ``fixed_pool``: ``capacity`` servers with a FIFO queue, optionally growing
  by one server per ``scale_up_delay`` seconds while requests are queued.
* ``elastic``: every request gets its own instance after ``cold_start``;
  an optional ``concurrency`` ceiling turns it into a pool.
* ``sequential_device``: one request at a time.

A hybrid deployment puts a dispatcher in front of a baseline pool and an
elastic backend and sends a request to the elastic side when the baseline's
in-flight/capacity ratio exceeds the threshold.
"""

from __future__ import annotations

import heapq
import json
import math
import random
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

from .trace import DEFAULT_SLA, RequestRecord, WorkloadTrace

DEFAULT_TIMEOUT = 120.0


@dataclass(frozen=True)
class ServiceTime:
    dist: str = "constant"
    value: float = 0.0
    lo: float = 0.0
    hi: float = 0.0
    mu: float = 0.0
    sigma: float = 0.0

    def __post_init__(self):
        if self.dist not in ("constant", "uniform", "lognormal"):
            raise ValueError(f"unknown service-time distribution {self.dist!r}")
        if self.dist == "constant" and self.value < 0:
            raise ValueError("service time must be nonnegative")
        if self.dist == "uniform" and not 0 <= self.lo <= self.hi:
            raise ValueError("uniform service time needs 0 <= lo <= hi")
        if self.dist == "lognormal" and self.sigma < 0:
            raise ValueError("lognormal sigma must be nonnegative")

    @classmethod
    def constant(cls, s: float) -> ServiceTime:
        return cls("constant", value=s)

    @classmethod
    def uniform(cls, lo: float, hi: float) -> ServiceTime:
        return cls("uniform", lo=lo, hi=hi)

    @classmethod
    def lognormal(cls, mu: float, sigma: float) -> ServiceTime:
        return cls("lognormal", mu=mu, sigma=sigma)

    @property
    def mean(self) -> float:
        if self.dist == "constant":
            return self.value
        if self.dist == "uniform":
            return (self.lo + self.hi) / 2
        return math.exp(self.mu + self.sigma ** 2 / 2)

    def draw(self, rng: random.Random) -> float:
        if self.dist == "constant":
            return self.value
        if self.dist == "uniform":
            return rng.uniform(self.lo, self.hi)
        return rng.lognormvariate(self.mu, self.sigma)


@dataclass(frozen=True)
class BackendModel:
    kind: str
    service_time: ServiceTime
    capacity: float = 1
    cold_start: float = 0.0
    scale_up_delay: float | None = None
    max_capacity: float = math.inf
    concurrency: float | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("fixed_pool", "elastic", "sequential_device"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "fixed_pool" and not self.capacity >= 1:
            raise ValueError("fixed_pool capacity must be at least 1")
        if self.cold_start < 0 or (self.scale_up_delay is not None and self.scale_up_delay <= 0):
            raise ValueError("times must be nonnegative (scale_up_delay positive)")
        if self.concurrency is not None and self.concurrency < 1:
            raise ValueError("concurrency ceiling must be at least 1")

    @property
    def name(self) -> str:
        return self.label or self.kind


@dataclass(frozen=True)
class HybridPolicy:
    threshold: float = 0.9
    dispatch_overhead: float = 0.3
    observation_lag: float = 0.0

    def __post_init__(self):
        if not 0 <= self.threshold <= 1:
            raise ValueError("threshold must lie in [0, 1]")
        if self.dispatch_overhead < 0 or self.observation_lag < 0:
            raise ValueError("overhead and lag must be nonnegative")


@dataclass(frozen=True)
class Hybrid:
    baseline: BackendModel
    elastic: BackendModel
    policy: HybridPolicy = HybridPolicy()
    label: str = "hybrid"

    def __post_init__(self):
        if self.baseline.kind != "fixed_pool":
            raise ValueError("hybrid baseline must be a fixed_pool")

    @property
    def name(self) -> str:
        return self.label


Deployment = BackendModel | Hybrid


@dataclass
class SimResult:
    records: list[RequestRecord]
    routed_baseline: int = 0
    routed_elastic: int = 0
    hybrid: bool = False


# event priorities at equal timestamps: completions free servers first
_FINISH, _SCALE, _ENTER, _ARRIVE = range(4)


class _Pool:
    def __init__(self, model: BackendModel, draws: list[float]):
        self.model = model
        self.draws = draws
        if model.kind == "sequential_device":
            self.capacity = 1
        elif model.kind == "elastic":
            self.capacity = model.concurrency if model.concurrency is not None else math.inf
        else:
            self.capacity = model.capacity
        self.busy = 0
        self.waiting: deque[int] = deque()
        self.in_flight = 0
        self.scale_pending = False
        self.history_t: list[float] = [-math.inf]
        self.history_v: list[int] = [0]

    def note(self, t: float, delta: int) -> None:
        self.in_flight += delta
        self.history_t.append(t)
        self.history_v.append(self.in_flight)

    def in_flight_at(self, t: float) -> int:
        return self.history_v[bisect_right(self.history_t, t) - 1]

    def utilization(self, t: float, lag: float) -> float:
        n = self.in_flight if lag == 0 else self.in_flight_at(t - lag)
        return n / self.capacity


def simulate(
    trace: WorkloadTrace | Sequence[float],
    deployment: Deployment,
    seed: int = 0,
    sla: float = DEFAULT_SLA,
    timeout: float | None = DEFAULT_TIMEOUT,
) -> SimResult:
    """Run the trace (offsets already scaled) against a deployment.

    Service times are drawn per request index from a stream seeded by
    ``seed`` and the backend role, so different deployments see the same
    draws for the same request.
    """
    offsets = trace.offsets if isinstance(trace, WorkloadTrace) else sorted(float(x) for x in trace)
    n = len(offsets)
    if n == 0:
        raise ValueError("empty trace")

    def draws(role: str, model: BackendModel) -> list[float]:
        rng = random.Random(f"{seed}:{role}")
        return [model.service_time.draw(rng) for _ in range(n)]

    hybrid = isinstance(deployment, Hybrid)
    if hybrid:
        pools = {
            "baseline": _Pool(deployment.baseline, draws("baseline", deployment.baseline)),
            "elastic": _Pool(deployment.elastic, draws("elastic", deployment.elastic)),
        }
        labels = {"baseline": deployment.baseline.name, "elastic": deployment.elastic.name}
        overhead = deployment.policy.dispatch_overhead
    else:
        pools = {"single": _Pool(deployment, draws("baseline", deployment))}
        labels = {"single": deployment.name}
        overhead = 0.0

    events: list[tuple[float, int, int, tuple]] = []
    seq = 0

    def push(t: float, kind: int, payload: tuple) -> None:
        nonlocal seq
        heapq.heappush(events, (t, kind, seq, payload))
        seq += 1

    for i, t in enumerate(offsets):
        push(t, _ARRIVE, (i,))

    start = [0.0] * n
    end = [0.0] * n
    backend_of = [""] * n
    routed = {"baseline": 0, "elastic": 0}

    def begin(pool: _Pool, role: str, t: float, i: int) -> None:
        pool.busy += 1
        start[i] = t + pool.model.cold_start
        push(start[i] + pool.draws[i], _FINISH, (role, i))

    def maybe_scale(pool: _Pool, role: str, t: float) -> None:
        m = pool.model
        if m.scale_up_delay is not None and pool.waiting and not pool.scale_pending and pool.capacity < m.max_capacity:
            pool.scale_pending = True
            push(t + m.scale_up_delay, _SCALE, (role,))

    while events:
        t, kind, _, payload = heapq.heappop(events)
        if kind == _ARRIVE:
            (i,) = payload
            if hybrid:
                base = pools["baseline"]
                role = "elastic" if base.utilization(t, deployment.policy.observation_lag) > deployment.policy.threshold else "baseline"
                routed[role] += 1
            else:
                role = "single"
            pools[role].note(t, +1)
            backend_of[i] = labels[role]
            push(t + overhead, _ENTER, (role, i))
        elif kind == _ENTER:
            role, i = payload
            pool = pools[role]
            if pool.busy < pool.capacity:
                begin(pool, role, t, i)
            else:
                pool.waiting.append(i)
                maybe_scale(pool, role, t)
        elif kind == _FINISH:
            role, i = payload
            pool = pools[role]
            end[i] = t
            pool.busy -= 1
            pool.note(t, -1)
            if pool.waiting and pool.busy < pool.capacity:
                begin(pool, role, t, pool.waiting.popleft())
        else:  # _SCALE
            (role,) = payload
            pool = pools[role]
            pool.scale_pending = False
            pool.capacity = min(pool.capacity + 1, pool.model.max_capacity)
            while pool.waiting and pool.busy < pool.capacity:
                begin(pool, role, t, pool.waiting.popleft())
            maybe_scale(pool, role, t)

    records = [
        RequestRecord.make(i, offsets[i], start[i], end[i], backend_of[i], sla=sla, timeout=timeout)
        for i in range(n)
    ]
    return SimResult(records, routed["baseline"], routed["elastic"], hybrid)


def routing_fraction(result: SimResult) -> float:
    """Share of requests the dispatcher sent to the elastic backend."""
    if not result.hybrid:
        raise ValueError("routing fraction is only defined for hybrid runs")
    return result.routed_elastic / (result.routed_baseline + result.routed_elastic)


# -- deployment documents -----------------------------------------------------

def _service_time(doc: Mapping) -> ServiceTime:
    doc = dict(doc)
    return ServiceTime(doc.pop("dist", "constant"), **doc)


def backend_from_json(doc: Mapping, label: str = "") -> BackendModel:
    doc = dict(doc)
    kind = doc.pop("kind")
    st = _service_time(doc.pop("service_time"))
    for key in ("capacity", "max_capacity", "concurrency"):
        if doc.get(key) == "inf":
            doc[key] = math.inf
    return BackendModel(kind, st, label=doc.pop("label", label), **doc)


def deployment_from_json(doc: Mapping, named: Mapping[str, Mapping] | None = None, label: str = "") -> Deployment:
    """Build a deployment; hybrid parts may reference other entries by name."""
    if doc.get("kind") != "hybrid":
        return backend_from_json(doc, label)

    def part(ref) -> BackendModel:
        if isinstance(ref, str):
            if named is None or ref not in named:
                raise KeyError(f"unknown deployment {ref!r}")
            return backend_from_json(named[ref], ref)
        return backend_from_json(ref)

    policy = HybridPolicy(**doc.get("policy", {}))
    return Hybrid(part(doc["baseline"]), part(doc["elastic"]), policy, label or "hybrid")


def load_deployments(text: str | None = None) -> dict[str, Deployment]:
    """Named deployments from a JSON document (the bundled calibration by default)."""
    if text is None:
        text = resources.files("spacecheck.data").joinpath("deployments.json").read_text()
    doc = json.loads(text)
    named = doc["deployments"]
    return {name: deployment_from_json(d, named, name) for name, d in named.items()}


def resolve_target(name: str, text: str | None = None) -> Deployment:
    """Resolve ``sim:NAME`` (or bare ``NAME``) to a calibrated deployment."""
    key = name[4:] if name.startswith("sim:") else name
    deployments = load_deployments(text)
    if key not in deployments:
        raise KeyError(f"unknown simulated deployment {key!r}; known: {sorted(deployments)}")
    return deployments[key]
