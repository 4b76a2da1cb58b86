"""Runtime spatial verification of IoT systems over closure spaces, with
tooling to weigh cloud deployments of the checker."""

from .checker import Checker, check, sat
from .formula import FormulaSyntaxError, desugar, parse, render
from .oracle import oracle_sat
from .space import (
    Boundary, ClosureModel, PointSet, SpaceError, SpaceGraph, boundary, closure, interior,
    parse_model,
)

__all__ = [
    "Boundary", "Checker", "ClosureModel", "FormulaSyntaxError", "PointSet", "SpaceError",
    "SpaceGraph", "boundary", "check", "closure", "desugar", "interior", "oracle_sat", "parse",
    "parse_model", "render", "sat",
]
