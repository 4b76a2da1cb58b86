"""SLCS formulas: syntax tree, text syntax, and desugaring to the core.

Concrete syntax (ASCII)::

    true  false  p  !f  f & g  f | g  C f  N f  N3 f  f S g  f T g  f R(g) h

``!``, ``C`` and ``N<k>`` bind tightest, then ``&``, then ``|``; the spatial
binaries ``S``, ``T`` and ``R(..)`` bind loosest and associate to the right.
The identifiers ``C``, ``S``, ``T``, ``R``, ``N``/``N<k>``, ``true`` and
``false`` are reserved.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class _Node:
    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((type(self).__name__,) + self._key()))

    def _key(self) -> tuple:
        return tuple(getattr(self, f) for f in self.__dataclass_fields__ if f != "_hash")

    def __hash__(self) -> int:
        return self._hash  # type: ignore[attr-defined]

    def __str__(self) -> str:
        return render(self)


def _node(cls):
    # frozen dataclass with a cached structural hash; eq stays structural
    cls = dataclass(frozen=True, eq=True)(cls)
    cls.__hash__ = _Node.__hash__
    return cls


@_node
class Prop(_Node):
    name: str


@_node
class Top(_Node):
    pass


@_node
class Not(_Node):
    arg: "Formula"


@_node
class And(_Node):
    left: "Formula"
    right: "Formula"


@_node
class Or(_Node):
    left: "Formula"
    right: "Formula"


@_node
class Close(_Node):
    arg: "Formula"


@_node
class Surround(_Node):
    left: "Formula"
    right: "Formula"


@_node
class Near(_Node):
    n: int
    arg: "Formula"

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"Near arity must be a positive integer, got {self.n!r}")
        super().__post_init__()


@_node
class Reach(_Node):
    left: "Formula"
    right: "Formula"


@_node
class ReachThrough(_Node):
    source: "Formula"
    through: "Formula"
    target: "Formula"


Formula = Union[Prop, Top, Not, And, Or, Close, Surround, Near, Reach, ReachThrough]

CORE_TYPES = (Prop, Top, Not, And, Close, Surround)


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, (Prop, Top)):
        return ()
    if isinstance(f, (Not, Close, Near)):
        return (f.arg,)
    if isinstance(f, ReachThrough):
        return (f.source, f.through, f.target)
    return (f.left, f.right)


def depth(f: Formula) -> int:
    return 1 + max((depth(c) for c in children(f)), default=0)


def size(f: Formula) -> int:
    return 1 + sum(size(c) for c in children(f))


def props(f: Formula) -> set[str]:
    if isinstance(f, Prop):
        return {f.name}
    out: set[str] = set()
    for c in children(f):
        out |= props(c)
    return out


def is_core(f: Formula) -> bool:
    return isinstance(f, CORE_TYPES) and all(is_core(c) for c in children(f))


# -- desugaring ---------------------------------------------------------------

def desugar(f: Formula, _memo: dict | None = None) -> Formula:
    """Rewrite derived operators into Prop/Top/Not/And/Close/Surround."""
    memo = {} if _memo is None else _memo
    hit = memo.get(f)
    if hit is not None:
        return hit
    if isinstance(f, (Prop, Top)):
        out = f
    elif isinstance(f, Not):
        out = Not(desugar(f.arg, memo))
    elif isinstance(f, And):
        out = And(desugar(f.left, memo), desugar(f.right, memo))
    elif isinstance(f, Close):
        out = Close(desugar(f.arg, memo))
    elif isinstance(f, Surround):
        out = Surround(desugar(f.left, memo), desugar(f.right, memo))
    elif isinstance(f, Or):
        out = Not(And(Not(desugar(f.left, memo)), Not(desugar(f.right, memo))))
    elif isinstance(f, Near):
        out = desugar(f.arg, memo)
        for _ in range(f.n):
            out = Close(out)
    elif isinstance(f, Reach):
        # phi T psi  =  phi & !((!psi) S !(phi | psi))
        phi, psi = f.left, f.right
        out = desugar(And(phi, Not(Surround(Not(psi), Not(Or(phi, psi))))), memo)
    elif isinstance(f, ReachThrough):
        # phi R(psi) zeta  =  phi T ((psi T zeta) & (psi T phi))
        phi, psi, zeta = f.source, f.through, f.target
        out = desugar(Reach(phi, And(Reach(psi, zeta), Reach(psi, phi))), memo)
    else:
        raise TypeError(f"not a formula: {f!r}")
    memo[f] = out
    return out


# -- rendering ----------------------------------------------------------------

def render(f: Formula) -> str:
    """Fully parenthesised text that parses back to an equal tree."""
    if isinstance(f, Prop):
        return f.name
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Not):
        return "!" + render(f.arg)
    if isinstance(f, Close):
        return "C " + render(f.arg)
    if isinstance(f, Near):
        return f"N{f.n} " + render(f.arg)
    if isinstance(f, And):
        return f"({render(f.left)} & {render(f.right)})"
    if isinstance(f, Or):
        return f"({render(f.left)} | {render(f.right)})"
    if isinstance(f, Surround):
        return f"({render(f.left)} S {render(f.right)})"
    if isinstance(f, Reach):
        return f"({render(f.left)} T {render(f.right)})"
    if isinstance(f, ReachThrough):
        return f"({render(f.source)} R({render(f.through)}) {render(f.target)})"
    raise TypeError(f"not a formula: {f!r}")


# -- parsing ------------------------------------------------------------------

class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, position: int, expected: str = ""):
        self.position = position
        self.expected = expected
        hint = f"; expected {expected}" if expected else ""
        super().__init__(f"{message} at position {position}{hint}")


_TOKEN = re.compile(r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[!&|()]))")
_NEAR = re.compile(r"N([0-9]*)")
_RESERVED = {"C", "S", "T", "R", "true", "false"}


@dataclass
class _Tok:
    kind: str  # ident | kw | op | eof
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos, "a proposition, operator or '('")
        start = m.start("ident") if m.group("ident") else m.start("op")
        if m.group("ident"):
            word = m.group("ident")
            kind = "kw" if word in _RESERVED or _NEAR.fullmatch(word) else "ident"
            toks.append(_Tok(kind, word, start))
        else:
            toks.append(_Tok("op", m.group("op"), start))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


@dataclass
class _Parser:
    toks: list[_Tok]
    i: int = field(default=0)

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        if self.cur.text != text or self.cur.kind not in ("op", "kw"):
            self.fail(f"'{text}'")
        self.take()

    def fail(self, expected: str):
        tok = self.cur
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise FormulaSyntaxError(f"unexpected {found}", tok.pos, expected)

    def spatial(self) -> Formula:
        left = self.disj()
        tok = self.cur
        if tok.kind == "kw" and tok.text in ("S", "T"):
            self.take()
            right = self.spatial()
            return Surround(left, right) if tok.text == "S" else Reach(left, right)
        if tok.kind == "kw" and tok.text == "R":
            self.take()
            self.expect("(")
            through = self.spatial()
            self.expect(")")
            target = self.spatial()
            return ReachThrough(left, through, target)
        return left

    def disj(self) -> Formula:
        f = self.conj()
        while self.cur.kind == "op" and self.cur.text == "|":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.unary()
        while self.cur.kind == "op" and self.cur.text == "&":
            self.take()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        tok = self.cur
        if tok.kind == "op" and tok.text == "!":
            self.take()
            return Not(self.unary())
        if tok.kind == "kw" and tok.text == "C":
            self.take()
            return Close(self.unary())
        if tok.kind == "kw" and (m := _NEAR.fullmatch(tok.text)):
            n = int(m.group(1)) if m.group(1) else 1
            if n < 1:
                raise FormulaSyntaxError("nearness arity must be at least 1", tok.pos)
            self.take()
            return Near(n, self.unary())
        return self.atom()

    def atom(self) -> Formula:
        tok = self.cur
        if tok.kind == "ident":
            self.take()
            return Prop(tok.text)
        if tok.kind == "kw" and tok.text == "true":
            self.take()
            return Top()
        if tok.kind == "kw" and tok.text == "false":
            self.take()
            return Not(Top())
        if tok.kind == "op" and tok.text == "(":
            self.take()
            f = self.spatial()
            self.expect(")")
            return f
        self.fail("a proposition, 'true', 'false', '!', 'C', 'N<k>' or '('")


def parse(text: str) -> Formula:
    if not text or not text.strip():
        raise FormulaSyntaxError("empty formula", 0, "a formula")
    p = _Parser(_tokenize(text))
    f = p.spatial()
    if p.cur.kind != "eof":
        p.fail("end of input or a binary operator")
    return f
