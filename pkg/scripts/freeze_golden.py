"""Freeze mini-city expectations computed with the brute-force oracle.

Run once; tests compare the bitset checker against the frozen file.
"""

import json
from pathlib import Path

from spacecheck.formula import parse
from spacecheck.oracle import oracle_sat
from spacecheck.service import load_model
from spacecheck.store import Snapshot, to_valuation
from spacecheck.workload import PROPERTIES

SCENARIOS = {
    "lone_bike_museum": {"b1": "museum"},
    "lone_bike_bus_stop1": {"b1": "bus_stop1"},
    "lone_bike_bridge2": {"b1": "bridge2"},
    "three_bikes": {"b1": "museum", "b2": "bus_stop1", "b3": "bridge2"},
    "bikes_park_metro": {"b1": "park", "b2": "metro1"},
    "no_bikes": {},
}

FORMULAS = {
    "F2": PROPERTIES["F2"],
    "near_museum_bike": "N (museum & bike)",
    "bike_far_from_square": "bike & !N2 main_square",
    "bus_reach_square": "bus_stop T main_square",
    "not_bridge_surrounded": "!bridge S bridge",
}


def main() -> None:
    model = load_model("mini-city")
    out = {"model_version": model.version, "formulas": FORMULAS, "cases": {}}
    for name, positions in SCENARIOS.items():
        m = to_valuation(Snapshot.from_positions(positions), model, "bike")
        out["cases"][name] = {
            "positions": positions,
            "sat": {k: sorted(m.space.names(oracle_sat(m, parse(f)))) for k, f in FORMULAS.items()},
        }
    path = Path(__file__).resolve().parent.parent / "tests" / "golden" / "mini_city.json"
    path.write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
