"""Quasi-discrete closure spaces induced by graphs.

Points are addressed by a stable string id and a dense integer index; subsets
of points are :class:`PointSet` values backed by a Python int used as a bitset.
Everything here is immutable once built.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping


class SpaceError(ValueError):
    """Invalid point, edge, or set for a given space."""


class ModelFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _iter_bits(bits: int) -> Iterator[int]:
    while bits:
        low = bits & -bits
        yield low.bit_length() - 1
        bits ^= low


@dataclass(frozen=True)
class PointSet:
    """A subset of the points of a space of ``size`` points."""

    bits: int
    size: int

    @classmethod
    def empty(cls, size: int) -> PointSet:
        return cls(0, size)

    @classmethod
    def full(cls, size: int) -> PointSet:
        return cls((1 << size) - 1, size)

    @classmethod
    def of(cls, indices: Iterable[int], size: int) -> PointSet:
        bits = 0
        for i in indices:
            if not 0 <= i < size:
                raise SpaceError(f"point index {i} out of range for {size} points")
            bits |= 1 << i
        return cls(bits, size)

    def _check(self, other: PointSet) -> None:
        if other.size != self.size:
            raise SpaceError(f"point sets over different spaces ({self.size} vs {other.size})")

    def __or__(self, other: PointSet) -> PointSet:
        self._check(other)
        return PointSet(self.bits | other.bits, self.size)

    def __and__(self, other: PointSet) -> PointSet:
        self._check(other)
        return PointSet(self.bits & other.bits, self.size)

    def __sub__(self, other: PointSet) -> PointSet:
        self._check(other)
        return PointSet(self.bits & ~other.bits, self.size)

    def __invert__(self) -> PointSet:
        return PointSet(((1 << self.size) - 1) & ~self.bits, self.size)

    def __contains__(self, index: object) -> bool:
        return isinstance(index, int) and index >= 0 and bool(self.bits >> index & 1)

    def __iter__(self) -> Iterator[int]:
        return _iter_bits(self.bits)

    def __len__(self) -> int:
        return bin(self.bits).count("1")

    def __bool__(self) -> bool:
        return self.bits != 0

    def issubset(self, other: PointSet) -> bool:
        self._check(other)
        return self.bits & ~other.bits == 0

    def isdisjoint(self, other: PointSet) -> bool:
        self._check(other)
        return self.bits & other.bits == 0

    def __repr__(self) -> str:
        return f"PointSet({sorted(self)}, size={self.size})"


@dataclass(frozen=True, eq=False)
class SpaceGraph:
    """Points plus a binary adjacency relation.

    With ``symmetric=True`` every edge is stored in both directions, which is
    the case for accessibility graphs.
    """

    ids: tuple[str, ...]
    edges: frozenset[tuple[int, int]]
    symmetric: bool
    index: Mapping[str, int] = field(repr=False)
    succ: tuple[tuple[int, ...], ...] = field(repr=False)
    pred: tuple[tuple[int, ...], ...] = field(repr=False)
    succ_mask: tuple[int, ...] = field(repr=False)
    digest: str = field(repr=False)

    @classmethod
    def build(
        cls,
        ids: Iterable[str],
        edges: Iterable[tuple[str, str]],
        symmetric: bool = True,
    ) -> SpaceGraph:
        ids = tuple(ids)
        index: dict[str, int] = {}
        for i, pid in enumerate(ids):
            if not pid or any(c.isspace() for c in pid):
                raise SpaceError(f"invalid point id {pid!r}")
            if pid in index:
                raise SpaceError(f"duplicate point id {pid!r}")
            index[pid] = i
        rel: set[tuple[int, int]] = set()
        for a, b in edges:
            if a not in index or b not in index:
                missing = a if a not in index else b
                raise SpaceError(f"edge endpoint {missing!r} is not a registered point")
            if a == b:
                raise SpaceError(f"self-loop on {a!r}")
            rel.add((index[a], index[b]))
            if symmetric:
                rel.add((index[b], index[a]))
        return cls._from_relation(ids, index, frozenset(rel), symmetric)

    @classmethod
    def _from_relation(cls, ids, index, rel, symmetric) -> SpaceGraph:
        n = len(ids)
        succ: list[list[int]] = [[] for _ in range(n)]
        pred: list[list[int]] = [[] for _ in range(n)]
        for a, b in sorted(rel):
            succ[a].append(b)
            pred[b].append(a)
        masks = []
        for out in succ:
            m = 0
            for b in out:
                m |= 1 << b
            masks.append(m)
        h = hashlib.sha256()
        h.update(f"symmetric {symmetric}\n".encode())
        for pid in ids:
            h.update(f"point {pid}\n".encode())
        for a, b in sorted(rel):
            h.update(f"edge {a} {b}\n".encode())
        return cls(
            ids=ids,
            edges=rel,
            symmetric=symmetric,
            index=dict(index),
            succ=tuple(tuple(s) for s in succ),
            pred=tuple(tuple(p) for p in pred),
            succ_mask=tuple(masks),
            digest=h.hexdigest(),
        )

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def size(self) -> int:
        return len(self.ids)

    def undirected_edges(self) -> list[tuple[str, str]]:
        """Edges as id pairs, each symmetric pair reported once."""
        out = []
        for a, b in sorted(self.edges):
            if self.symmetric and a > b:
                continue
            out.append((self.ids[a], self.ids[b]))
        return out

    def points(self, ids: Iterable[str]) -> PointSet:
        try:
            return PointSet.of((self.index[i] for i in ids), self.size)
        except KeyError as exc:
            raise SpaceError(f"unknown point {exc.args[0]!r}") from None

    def names(self, s: PointSet) -> list[str]:
        self.validate(s)
        return [self.ids[i] for i in s]

    def empty(self) -> PointSet:
        return PointSet.empty(self.size)

    def full(self) -> PointSet:
        return PointSet.full(self.size)

    def validate(self, s: PointSet) -> None:
        if s.size != self.size or s.bits >> self.size:
            raise SpaceError("point set contains points foreign to this space")


def closure(space: SpaceGraph, a: PointSet) -> PointSet:
    """``a`` together with every relation-successor of its members."""
    space.validate(a)
    bits = a.bits
    masks = space.succ_mask
    for i in _iter_bits(a.bits):
        bits |= masks[i]
    return PointSet(bits, a.size)


def interior(space: SpaceGraph, a: PointSet) -> PointSet:
    return ~closure(space, ~a)


class Boundary(str, Enum):
    FULL = "full"
    INTERIOR = "interior_b"
    CLOSURE = "closure_b"


def boundary(space: SpaceGraph, a: PointSet, variant: Boundary | str = Boundary.FULL) -> PointSet:
    variant = Boundary(variant)
    if variant is Boundary.FULL:
        return closure(space, a) - interior(space, a)
    if variant is Boundary.INTERIOR:
        return a - interior(space, a)
    return closure(space, a) - a


def _digest_layer(layer: Mapping[str, PointSet]) -> str:
    h = hashlib.sha256()
    for name in sorted(layer):
        h.update(f"{name}:{layer[name].bits:x}\n".encode())
    return h.hexdigest()


@dataclass(frozen=True, eq=False)
class ClosureModel:
    """A closure space plus a valuation of propositions.

    The valuation is split into a static layer (names, categories) and a
    dynamic layer (entity presence) so that refreshing positions does not copy
    the static part. Unknown propositions evaluate to the empty set.
    """

    space: SpaceGraph
    static: Mapping[str, PointSet]
    dynamic: Mapping[str, PointSet] = field(default_factory=dict)
    static_digest: str = field(default="", repr=False)
    version: str = field(default="", repr=False)

    def __post_init__(self) -> None:
        for layer in (self.static, self.dynamic):
            for name, s in layer.items():
                if s.size != self.space.size or s.bits >> s.size:
                    raise SpaceError(f"valuation of {name!r} is not a subset of the space")
        if not self.static_digest:
            object.__setattr__(self, "static_digest", _digest_layer(self.static))
        h = hashlib.sha256()
        h.update(self.space.digest.encode())
        h.update(self.static_digest.encode())
        if self.dynamic:
            h.update(_digest_layer(self.dynamic).encode())
        object.__setattr__(self, "version", h.hexdigest()[:16])

    @classmethod
    def from_ids(
        cls, space: SpaceGraph, valuation: Mapping[str, Iterable[str]]
    ) -> ClosureModel:
        return cls(space, {p: space.points(ids) for p, ids in valuation.items()})

    def valuation(self, prop: str) -> PointSet:
        s = self.dynamic.get(prop)
        if s is None:
            s = self.static.get(prop)
        return s if s is not None else self.space.empty()

    @property
    def propositions(self) -> set[str]:
        return set(self.static) | set(self.dynamic)

    def with_dynamic(self, dynamic: Mapping[str, PointSet]) -> ClosureModel:
        """Same space and static valuation, new dynamic layer."""
        return ClosureModel(self.space, self.static, dict(dynamic), self.static_digest)

    def assignment_count(self) -> int:
        return sum(len(s) for s in self.static.values()) + sum(
            len(s) for s in self.dynamic.values()
        )


# -- text format -------------------------------------------------------------

def parse_model(text: str) -> ClosureModel:
    """Parse the line-oriented model format.

    Directives: ``points N``, ``point <id>``, ``edge <id> <id>``,
    ``symmetric true|false``, ``prop <name> <id>...``. ``#`` starts a comment.
    """
    declared = None
    ids: list[str] = []
    edges: list[tuple[str, str, int]] = []
    props: dict[str, list[str]] = {}
    prop_lines: dict[str, int] = {}
    symmetric = True
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, *args = line.split()
        if word == "points":
            if len(args) != 1 or not args[0].isdigit():
                raise ModelFormatError("expected 'points <count>'", lineno)
            declared = int(args[0])
        elif word == "point":
            if len(args) != 1:
                raise ModelFormatError("expected 'point <id>'", lineno)
            ids.append(args[0])
        elif word == "edge":
            if len(args) != 2:
                raise ModelFormatError("expected 'edge <id> <id>'", lineno)
            edges.append((args[0], args[1], lineno))
        elif word == "symmetric":
            if args not in (["true"], ["false"]):
                raise ModelFormatError("expected 'symmetric true|false'", lineno)
            symmetric = args[0] == "true"
        elif word == "prop":
            if not args:
                raise ModelFormatError("expected 'prop <name> <id>...'", lineno)
            props.setdefault(args[0], []).extend(args[1:])
            prop_lines.setdefault(args[0], lineno)
        else:
            raise ModelFormatError(f"unknown directive {word!r}", lineno)
    if declared is not None and declared != len(ids):
        raise ModelFormatError(f"header declares {declared} points, found {len(ids)}")
    known = set(ids)
    for a, b, lineno in edges:
        for end in (a, b):
            if end not in known:
                raise ModelFormatError(f"dangling edge endpoint {end!r}", lineno)
    for name, members in props.items():
        for m in members:
            if m not in known:
                raise ModelFormatError(f"prop {name!r} names unknown point {m!r}", prop_lines[name])
    try:
        space = SpaceGraph.build(ids, [(a, b) for a, b, _ in edges], symmetric)
    except SpaceError as exc:
        raise ModelFormatError(str(exc)) from None
    return ClosureModel.from_ids(space, props)


def dump_model(model: ClosureModel) -> str:
    space = model.space
    lines = [f"points {space.size}", f"symmetric {'true' if space.symmetric else 'false'}"]
    lines += [f"point {pid}" for pid in space.ids]
    lines += [f"edge {a} {b}" for a, b in space.undirected_edges()]
    for layer in (model.static, model.dynamic):
        for name in sorted(layer):
            lines.append(" ".join(["prop", name, *space.names(layer[name])]))
    return "\n".join(lines) + "\n"
