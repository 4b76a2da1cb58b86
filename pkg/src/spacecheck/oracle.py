"""Brute-force reference semantics for small models.

Every operator, derived ones included, is decided point by point with plain
Python sets and explicit walk enumeration. Nothing here goes through
``desugar`` or the bitset evaluator, so the two can be compared.
"""

from __future__ import annotations

from .formula import (
    And, Close, Formula, Near, Not, Or, Prop, Reach, ReachThrough, Surround, Top,
)
from .space import ClosureModel, PointSet

ORACLE_BOUND = 12


class OracleRefused(ValueError):
    pass


def _walk_exists(adj: dict[int, set[int]], start: int, allowed: set[int], goal: set[int]) -> bool:
    """Is there a walk start=x0,...,xk with xk in goal and every xi in allowed?"""
    if start not in allowed:
        return False
    stack = [start]
    seen = {start}
    while stack:
        x = stack.pop()
        if x in goal:
            return True
        for y in adj[x]:
            if y in allowed and y not in seen:
                seen.add(y)
                stack.append(y)
    return False


def oracle_sat(model: ClosureModel, f: Formula, bound: int = ORACLE_BOUND) -> PointSet:
    space = model.space
    n = space.size
    if n > bound:
        raise OracleRefused(f"model has {n} points, oracle bound is {bound}")
    points = set(range(n))
    adj: dict[int, set[int]] = {x: set() for x in points}
    for a, b in space.edges:
        adj[a].add(b)

    def close(s: set[int]) -> set[int]:
        return {x for x in points if x in s or any(x in adj[y] for y in s)}

    def reach(a: set[int], b: set[int]) -> set[int]:
        # a point of a, from which a b-point is reachable with every step
        # before the target inside a
        return {x for x in a if any(_walk_exists(adj, x, a | {t}, {t}) for t in b)}

    def ev(g: Formula) -> set[int]:
        if isinstance(g, Prop):
            return set(model.valuation(g.name))
        if isinstance(g, Top):
            return set(points)
        if isinstance(g, Not):
            return points - ev(g.arg)
        if isinstance(g, And):
            return ev(g.left) & ev(g.right)
        if isinstance(g, Or):
            return ev(g.left) | ev(g.right)
        if isinstance(g, Close):
            return close(ev(g.arg))
        if isinstance(g, Near):
            s = ev(g.arg)
            for _ in range(g.n):
                s = close(s)
            return s
        if isinstance(g, Surround):
            phi, psi = ev(g.left), ev(g.right)
            not_psi = points - psi
            escape = (points - phi) & not_psi
            return {x for x in phi if not _walk_exists(adj, x, not_psi, escape)}
        if isinstance(g, Reach):
            return reach(ev(g.left), ev(g.right))
        if isinstance(g, ReachThrough):
            phi, psi, zeta = ev(g.source), ev(g.through), ev(g.target)
            return reach(phi, reach(psi, zeta) & reach(psi, phi))
        raise TypeError(f"not a formula: {g!r}")

    return PointSet.of(ev(f), n)
