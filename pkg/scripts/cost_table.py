"""Per-period, daily and monthly cost of each bundled deployment plan.

    python3 scripts/cost_table.py [--plan plans.json]
"""

import argparse
from pathlib import Path

from spacecheck.workload import estimate_cost, load_plans

PUBLISHED_MONTHLY = {"containers": 456.96, "monolith": 932.63, "faas": 771.67}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--plan", help="plan JSON (defaults to the bundled replication plans)")
    args = ap.parse_args()
    plans = load_plans(Path(args.plan).read_text() if args.plan else None)

    first = next(iter(plans.values()))
    labels = [p.label or str(i) for i, p in enumerate(first.periods)]
    print(f"{'period':8}{'calls':>7}" + "".join(f"{n:>12}" for n in plans))
    for i, label in enumerate(labels):
        calls = first.periods[i].calls
        costs = [estimate_cost(p).per_period[i] for p in plans.values()]
        print(f"{label:8}{calls:>7}" + "".join(f"{c:12.2f}" for c in costs))
    ests = {n: estimate_cost(p) for n, p in plans.items()}
    print(f"{'day':8}{sum(p.calls for p in first.periods):>7}" + "".join(f"{e.daily:12.2f}" for e in ests.values()))
    print(f"{'month':8}{'':>7}" + "".join(f"{e.monthly:12.2f}" for e in ests.values()))
    if not args.plan:
        print(f"{'target':8}{'':>7}" + "".join(f"{PUBLISHED_MONTHLY.get(n, float('nan')):12.2f}" for n in plans))


if __name__ == "__main__":
    main()
