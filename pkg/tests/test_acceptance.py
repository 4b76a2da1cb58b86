"""Acceptance criteria 1-10, one test each.

Every test records a PASS/FAIL line; the lines are printed in the pytest
terminal summary (and directly when run as a script).
"""

import functools
import json
import random
import sys
import threading
import time
import urllib.request
from pathlib import Path

import pytest

from spacecheck.checker import check, sat
from spacecheck.formula import And, Not, Prop, Reach, ReachThrough, Surround, desugar, parse, render
from spacecheck.ingest import (
    TrajectorySample, build_accessibility, haversine, match_presences, read_pois, read_trajectories, synth_model,
)
from spacecheck.oracle import oracle_sat
from spacecheck.service import CheckerService, make_checker_server
from spacecheck.sim import load_deployments, routing_fraction, simulate
from spacecheck.space import PointSet, boundary, closure
from spacecheck.store import Snapshot, to_valuation
from spacecheck.trace import WorkloadTrace
from spacecheck.workload import PROPERTIES, estimate_cost, load_plans, replay, summarize

from conftest import random_formula, random_model, random_space, serving

GOLDEN = json.loads((Path(__file__).parent / "golden" / "mini_city.json").read_text())
MULTIPLIERS = (5, 10, 20, 40, 60)
RESULTS: list[str] = []


def criterion(n: int, title: str):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                detail = fn(*args, **kwargs)
            except BaseException as exc:
                RESULTS.append(f"criterion {n:2d} FAIL  {title}: {type(exc).__name__}: {exc}".splitlines()[0])
                print(RESULTS[-1])
                raise
            extra = f" ({detail})" if detail else ""
            RESULTS.append(f"criterion {n:2d} PASS  {title} [{time.perf_counter() - t0:.1f}s]{extra}")
            print(RESULTS[-1])
        return run
    return wrap


def bundled_hour_trace() -> WorkloadTrace:
    from importlib import resources
    from spacecheck.trace import read_trace
    with resources.as_file(resources.files("spacecheck.data").joinpath("hour536.csv")) as p:
        return read_trace(p)


@criterion(1, "closure axioms on 200 symmetric graphs x 20 subsets")
def test_closure_axioms():
    rng = random.Random(1)
    t0 = time.perf_counter()
    for _ in range(200):
        g = random_space(rng, 50, symmetric=True)
        empty = g.empty()
        assert closure(g, empty) == empty
        for _ in range(20):
            a = PointSet(rng.getrandbits(g.size), g.size)
            b = PointSet(rng.getrandbits(g.size), g.size)
            assert a.issubset(closure(g, a))
            assert closure(g, a | b) == closure(g, a) | closure(g, b)
            inner, outer = boundary(g, a, "interior_b"), boundary(g, a, "closure_b")
            assert inner.isdisjoint(outer) and boundary(g, a, "full") == inner | outer
    elapsed = time.perf_counter() - t0
    assert elapsed < 10
    return f"{elapsed:.2f}s < 10s"


@criterion(2, "sat equals oracle on 500 random models")
def test_oracle_equivalence():
    rng = random.Random(2)
    t0 = time.perf_counter()
    checked = 0
    for _ in range(500):
        m = random_model(rng, 10)
        for derived in (False, True):
            for _ in range(4):
                f = random_formula(rng, 3, derived=derived)
                assert sat(m, f) == oracle_sat(m, f), render(f)
                checked += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 120
    return f"{checked} formulas, {elapsed:.1f}s < 120s"


def _reach_by_definition(phi, psi):
    # phi T psi  ==  phi & !((!psi) S !(phi | psi)), with | written via & and !
    return And(phi, Not(Surround(Not(psi), Not(Not(And(Not(phi), Not(psi)))))))


@criterion(3, "derived operators and the mini-city golden files")
def test_derived_operator_fidelity(mini_city):
    p, q, r = Prop("p"), Prop("q"), Prop("r")
    assert desugar(Reach(p, q)) == _reach_by_definition(p, q)
    assert desugar(ReachThrough(p, q, r)) == _reach_by_definition(
        p, And(_reach_by_definition(q, r), _reach_by_definition(q, p)))
    f2 = parse(PROPERTIES["F2"])
    lone = to_valuation(Snapshot.from_positions({"b": "museum"}), mini_city, "bike")
    assert not check(lone, f2)
    for where in ("bus_stop1", "bridge2"):
        assert check(to_valuation(Snapshot.from_positions({"b": where}), mini_city, "bike"), f2)
    for case, case_doc in GOLDEN["cases"].items():
        m = to_valuation(Snapshot.from_positions(case_doc["positions"]), mini_city, "bike")
        for ref, expected in case_doc["sat"].items():
            f = parse(GOLDEN["formulas"][ref])
            assert sorted(m.space.names(sat(m, f))) == expected == sorted(m.space.names(oracle_sat(m, f))), (case, ref)
    return f"{len(GOLDEN['cases'])} golden scenarios"


@criterion(4, "P1-P3 on a 5152-node model within the 30 s SLA")
def test_scale_check():
    model = synth_model(5152, 36805, 15456, seed=1)
    assert model.space.size == 5152
    assert len(model.space.undirected_edges()) == 36805
    assert model.assignment_count() == 15456
    rng = random.Random(4)
    taxis = {f"taxi{i}": f"poi{rng.randrange(5152)}" for i in range(1000)}
    m = to_valuation(Snapshot.from_positions(taxis), model, "taxi")
    worst = 0.0
    for name in ("P1", "P2", "P3"):
        f = parse(PROPERTIES[name])
        t0 = time.perf_counter()
        sat(m, f)
        worst = max(worst, time.perf_counter() - t0)
        assert worst < 30
    return f"slowest evaluation {worst:.3f}s"


@criterion(5, "cost arithmetic reproduces the published monthly totals")
def test_cost_arithmetic():
    plans = load_plans()
    published = {"containers": 456.96, "monolith": 932.63, "faas": 771.67}
    worst = 0.0
    for name, monthly in published.items():
        got = estimate_cost(plans[name]).monthly
        worst = max(worst, abs(got - monthly) / monthly)
    assert worst <= 0.005
    daily = estimate_cost(plans["faas"]).daily
    assert abs(daily - 35.46) / 35.46 <= 0.002
    return f"max deviation {worst:.3%}, FaaS daily {daily:.2f}"


class _VirtualClock:
    def __init__(self):
        self.now = 0.0
        self.lock = threading.Lock()

    def __call__(self):
        with self.lock:
            return self.now

    def sleep(self, dt):
        with self.lock:
            self.now += dt


@criterion(6, "536-request replay spans 12/6/3/1.5/1 minutes")
def test_replay_timing(mini_city):
    trace = bundled_hour_trace()
    assert len(trace) == 536
    nominal = dict(zip(MULTIPLIERS, (720, 360, 180, 90, 60)))
    for m in MULTIPLIERS:
        records = replay(trace, m, "sim:faas")
        submits = [r.submit for r in records]
        assert abs(max(submits) - min(submits) - nominal[m]) <= 1
        assert all(abs(s - o / m) <= 1 for s, o in zip(submits, trace.offsets))
    # the live scheduler, driven by a virtual clock against a real checker
    svc = CheckerService(mini_city, workers=4)
    with serving(make_checker_server(svc)) as url:
        for m in (5, 60):
            clock = _VirtualClock()
            records = replay(trace, m, url, concurrency=16, clock=clock, sleep=clock.sleep, presence_prop="bike")
            submits = sorted(r.submit for r in records)
            assert len(records) == 536 and not any(r.error for r in records)
            assert abs(submits[-1] - submits[0] - nominal[m]) <= 1
    svc.close()
    return "simulated at all multipliers, live scheduler at 5x and 60x"


@criterion(7, "simulator reproduces the qualitative latency patterns")
def test_simulator_patterns():
    trace = bundled_hour_trace()
    deps = load_deployments()
    faas, mono, hyb = [], [], []
    fractions = []
    for m in MULTIPLIERS:
        scaled = trace.scaled(m)
        faas.append(summarize(simulate(scaled, deps["faas"], seed=0).records).total.median)
        mono.append(summarize(simulate(scaled, deps["monolith"], seed=0).records).total.median)
        res = simulate(scaled, deps["hybrid"], seed=0)
        hyb.append(summarize(res.records))
        fractions.append(routing_fraction(res))
    assert max(faas) - min(faas) < 1e-9                                  # (a)
    assert all(med > 30 for m, med in zip(MULTIPLIERS, mono) if m >= 40)  # (b)
    assert all(not s.violations_median for s in hyb)                      # (c)
    assert all(a <= b for a, b in zip(fractions, fractions[1:]))          # (d)
    assert fractions[MULTIPLIERS.index(20)] == 0
    return ("monolith medians " + "/".join(f"{x:.1f}" for x in mono)
            + "; routed " + "/".join(f"{x:.0%}" for x in fractions))


@criterion(8, "fixed pool saturates above capacity and stays bounded below")
def test_queueing_saturation():
    mono = load_deployments()["monolith"]
    mean = mono.service_time.mean
    cap_rate = mono.capacity / mean
    medians = []
    for window in (600.0, 1200.0):
        rate = 2 * cap_rate
        offs = [k / rate for k in range(int(window * rate))]
        medians.append(summarize(simulate(offs, mono, timeout=None).records).wait.median)
    assert medians[0] > 0 and medians[1] >= 2 * medians[0]
    rate = 0.8 * cap_rate
    rng = random.Random(8)
    t, offs = 0.0, []
    while t < 1200:
        offs.append(t)
        t += rng.expovariate(rate)
    below = summarize(simulate(offs, mono, timeout=None).records).wait.median
    assert below <= mean
    return f"overloaded medians {medians[0]:.0f}s -> {medians[1]:.0f}s, below capacity {below:.2f}s"


@criterion(9, "end-to-end ingest builds edges A-B, B-C and honours the strict radius")
def test_end_to_end_ingest(tmp_path):
    (tmp_path / "pois.csv").write_text(
        "id,name,category,lat,lon\n"
        "A,Tsinghua,EDUCATIONUNIVERSITY,40.0000,116.3260\n"
        "B,BusStopA,TRANSPORTBUSSTOP,39.9950,116.3200\n"
        "C,PekingUniversity,EDUCATIONUNIVERSITY,39.9920,116.3060\n")
    (tmp_path / "taxi.txt").write_text(
        "7,2008-02-02 15:36:08,116.3260,40.0000\n"
        "7,2008-02-02 15:41:08,116.3200,39.9950\n"
        "7,2008-02-02 15:46:08,116.3060,39.9920\n")
    pois = read_pois(tmp_path / "pois.csv")
    samples = read_trajectories(tmp_path / "taxi.txt", lonlat=True)
    presences = match_presences(pois, samples)
    g = build_accessibility(presences, pois)
    assert {tuple(sorted(e)) for e in g.undirected_edges()} == {("A", "B"), ("B", "C")}
    edge_sample = TrajectorySample("8", 0.0, 40.0001, 116.3260)
    radius = haversine((edge_sample.lat, edge_sample.lon), (pois[0].lat, pois[0].lon))
    assert match_presences(pois, [edge_sample], radius=radius) == []
    return f"boundary at {radius:.3f} m produced no presence"


@criterion(10, "HTTP checker verdicts equal the library on 100 random requests")
def test_service_library_equivalence(mini_city):
    rng = random.Random(10)
    names = list(mini_city.space.ids)
    props = ["bike", "bridge", "bus_stop", "museum", "park", "main_square"]
    svc = CheckerService(mini_city, workers=4)
    with serving(make_checker_server(svc)) as url:
        for _ in range(100):
            positions = {f"b{k}": rng.choice(names) for k in range(rng.randint(0, 4))}
            formula = render(random_formula(rng, 4, props))
            snap = Snapshot.from_positions(positions)
            body = json.dumps({"formula": formula, "presence_prop": "bike", "snapshot": snap.to_json()}).encode()
            req = urllib.request.Request(url + "/check", data=body, method="POST",
                                         headers={"Content-Type": "application/json"})
            t0 = time.perf_counter()
            with urllib.request.urlopen(req, timeout=10) as resp:
                doc = json.load(resp)
            latency_ms = (time.perf_counter() - t0) * 1000
            assert doc["satisfied"] == check(to_valuation(snap, mini_city, "bike"), parse(formula)), formula
            assert doc["wait_ms"] + doc["compute_ms"] <= latency_ms
    svc.close()
    return "100/100 verdicts identical"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
