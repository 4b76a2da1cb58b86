"""Evaluate the three taxi properties on a synthetic model of the published
size and report build and evaluation times.

    python3 scripts/scale_check.py [--seed 1] [--taxis 1000] [--repeat 3]
"""

import argparse
import random
import time

from spacecheck.checker import sat
from spacecheck.formula import desugar, parse, size
from spacecheck.ingest import synth_model
from spacecheck.store import Snapshot, to_valuation
from spacecheck.workload import PROPERTIES


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--nodes", type=int, default=5152)
    ap.add_argument("--edges", type=int, default=36805)
    ap.add_argument("--props", type=int, default=15456)
    ap.add_argument("--taxis", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    t0 = time.perf_counter()
    model = synth_model(args.nodes, args.edges, args.props, seed=args.seed)
    print(f"model {model.version}: {model.space.size} nodes, {len(model.space.undirected_edges())} edges, "
          f"{model.assignment_count()} assignments, built in {time.perf_counter() - t0:.2f}s")
    rng = random.Random(args.seed)
    taxis = {f"taxi{i}": f"poi{rng.randrange(args.nodes)}" for i in range(args.taxis)}
    m = to_valuation(Snapshot.from_positions(taxis), model, "taxi")
    for name in ("P1", "P2", "P3"):
        f = parse(PROPERTIES[name])
        times = []
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            points = sat(m, f)
            times.append(time.perf_counter() - t0)
        print(f"{name}: core size {size(desugar(f)):4d}, {len(points):5d} satisfying points, "
              f"best {min(times) * 1000:.1f} ms, worst {max(times) * 1000:.1f} ms")


if __name__ == "__main__":
    main()
