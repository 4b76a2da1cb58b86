"""Global model checking of SLCS formulas over a closure model.

``sat`` returns the set of points satisfying a formula; ``check`` reports
whether that set is non-empty. Derived operators are desugared first, so the
evaluator only handles the six core constructs.
"""

from __future__ import annotations

import threading
from collections import OrderedDict, deque

from .formula import And, Close, Formula, Not, Prop, Surround, Top, desugar
from .space import ClosureModel, PointSet, closure


def surround(model: ClosureModel, phi: PointSet, psi: PointSet) -> PointSet:
    """Points of ``phi`` from which no walk escapes to ``!phi & !psi``
    without first meeting ``psi``.

    Backward flooding: start from the escape set and repeatedly add
    ``!psi`` points that have a successor already marked bad.
    """
    space = model.space
    not_psi = ~psi
    bad = (~phi) & not_psi
    pred = space.pred
    queue = deque(bad)
    bits = bad.bits
    allowed = not_psi.bits
    while queue:
        y = queue.popleft()
        for x in pred[y]:
            m = 1 << x
            if allowed & m and not bits & m:
                bits |= m
                queue.append(x)
    return phi - PointSet(bits, phi.size)


def _eval(model: ClosureModel, f: Formula, memo: dict) -> PointSet:
    hit = memo.get(f)
    if hit is not None:
        return hit
    if isinstance(f, Prop):
        out = model.valuation(f.name)
    elif isinstance(f, Top):
        out = model.space.full()
    elif isinstance(f, Not):
        out = ~_eval(model, f.arg, memo)
    elif isinstance(f, And):
        out = _eval(model, f.left, memo) & _eval(model, f.right, memo)
    elif isinstance(f, Close):
        out = closure(model.space, _eval(model, f.arg, memo))
    elif isinstance(f, Surround):
        out = surround(model, _eval(model, f.left, memo), _eval(model, f.right, memo))
    else:
        raise TypeError(f"not a core formula: {type(f).__name__}")
    memo[f] = out
    return out


def sat(model: ClosureModel, f: Formula) -> PointSet:
    return _eval(model, desugar(f), {})


def check(model: ClosureModel, f: Formula) -> bool:
    return bool(sat(model, f))


class Checker:
    """Evaluator with a bounded result cache keyed by model version and the
    desugared formula. Safe to share between threads."""

    def __init__(self, max_entries: int = 1024):
        self.max_entries = max_entries
        self._results: OrderedDict[tuple[str, Formula], PointSet] = OrderedDict()
        self._core: dict[Formula, Formula] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def core(self, f: Formula) -> Formula:
        with self._lock:
            c = self._core.get(f)
        if c is None:
            c = desugar(f)
            with self._lock:
                if len(self._core) >= self.max_entries:
                    self._core.clear()
                self._core[f] = c
        return c

    def sat(self, model: ClosureModel, f: Formula) -> PointSet:
        key = (model.version, self.core(f))
        with self._lock:
            hit = self._results.get(key)
            if hit is not None:
                self._results.move_to_end(key)
                self.hits += 1
                return hit
            self.misses += 1
        out = _eval(model, key[1], {})
        with self._lock:
            self._results[key] = out
            while len(self._results) > self.max_entries:
                self._results.popitem(last=False)
        return out

    def check(self, model: ClosureModel, f: Formula) -> bool:
        return bool(self.sat(model, f))
