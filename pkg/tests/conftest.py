import contextlib
import json
import random
import sys
import threading
import urllib.error
import urllib.request

import hypothesis.strategies as st
import pytest

from spacecheck.formula import (
    And, Close, Near, Not, Or, Prop, Reach, ReachThrough, Surround, Top,
)
from spacecheck.service import load_model
from spacecheck.space import ClosureModel, PointSet, SpaceGraph

PROP_NAMES = ("p", "q", "r")


def line(n=4, symmetric=True):
    ids = "abcdefghij"[:n]
    return SpaceGraph.build(ids, zip(ids, ids[1:]), symmetric=symmetric)


def random_space(rng: random.Random, max_nodes: int, symmetric: bool = True) -> SpaceGraph:
    n = rng.randint(1, max_nodes)
    density = rng.random()
    ids = [f"x{i}" for i in range(n)]
    edges = [(ids[a], ids[b]) for a in range(n) for b in range(n)
             if a != b and (a < b or not symmetric) and rng.random() < density * 0.6]
    return SpaceGraph.build(ids, edges, symmetric)


def random_model(rng: random.Random, max_nodes: int, props=PROP_NAMES, symmetric=None) -> ClosureModel:
    if symmetric is None:
        symmetric = rng.random() < 0.7
    space = random_space(rng, max_nodes, symmetric)
    return ClosureModel(space, {p: PointSet(rng.getrandbits(space.size), space.size) for p in props})


def random_formula(rng: random.Random, depth: int, props=PROP_NAMES, derived=True):
    if depth <= 1 or rng.random() < 0.2:
        return Top() if rng.random() < 0.1 else Prop(rng.choice(props))
    sub = lambda: random_formula(rng, depth - 1, props, derived)  # noqa: E731
    kinds = ["not", "and", "close", "surround"]
    if derived:
        kinds += ["or", "near", "reach", "reach_through"]
    k = rng.choice(kinds)
    if k == "not":
        return Not(sub())
    if k == "and":
        return And(sub(), sub())
    if k == "close":
        return Close(sub())
    if k == "surround":
        return Surround(sub(), sub())
    if k == "or":
        return Or(sub(), sub())
    if k == "near":
        return Near(rng.randint(1, 3), sub())
    if k == "reach":
        return Reach(sub(), sub())
    return ReachThrough(sub(), sub(), sub())


# -- hypothesis strategies ----------------------------------------------------

@st.composite
def spaces(draw, max_nodes=12, symmetric=None):
    n = draw(st.integers(1, max_nodes))
    sym = draw(st.booleans()) if symmetric is None else symmetric
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b and (a < b or not sym)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    ids = [f"x{i}" for i in range(n)]
    return SpaceGraph.build(ids, [(ids[a], ids[b]) for a, b in chosen], sym)


@st.composite
def point_sets(draw, space):
    return PointSet(draw(st.integers(0, (1 << space.size) - 1)), space.size)


@st.composite
def models(draw, max_nodes=10, symmetric=None):
    space = draw(spaces(max_nodes, symmetric))
    return ClosureModel(space, {p: draw(point_sets(space)) for p in PROP_NAMES})


def formulas(max_leaves=8, derived=True):
    leaves = st.one_of(st.just(Top()), st.sampled_from(PROP_NAMES).map(Prop))

    def extend(children):
        core = [
            children.map(Not),
            st.tuples(children, children).map(lambda t: And(*t)),
            children.map(Close),
            st.tuples(children, children).map(lambda t: Surround(*t)),
        ]
        if derived:
            core += [
                st.tuples(children, children).map(lambda t: Or(*t)),
                st.tuples(st.integers(1, 3), children).map(lambda t: Near(*t)),
                st.tuples(children, children).map(lambda t: Reach(*t)),
                st.tuples(children, children, children).map(lambda t: ReachThrough(*t)),
            ]
        return st.one_of(core)

    return st.recursive(leaves, extend, max_leaves=max_leaves)


@pytest.fixture(scope="session")
def mini_city():
    return load_model("mini-city")


@contextlib.contextmanager
def serving(server):
    """Run an HTTP server on a background thread; yields its base URL."""
    t = threading.Thread(target=server.serve_forever, daemon=True)
    t.start()
    try:
        host, port = server.server_address[:2]
        yield f"http://{host}:{port}"
    finally:
        server.shutdown()
        server.server_close()


def http(method, url, doc=None, timeout=10):
    """JSON request; returns (status, body)."""
    data = None if doc is None else json.dumps(doc).encode()
    req = urllib.request.Request(url, data=data, method=method, headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, json.load(resp)
    except urllib.error.HTTPError as exc:
        return exc.code, json.load(exc)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
