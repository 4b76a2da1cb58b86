"""Command-line entry point: ``spacecheck <subcommand> ...``.

Exit status: 0 on success, 1 on runtime failure, 2 on usage errors (bad flags,
missing input files). ``check --exit-by-verdict`` exits 3 when unsatisfied.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from . import ingest
from .checker import sat
from .formula import FormulaSyntaxError, parse
from .service import BUNDLED_MODELS, CheckerService, load_model, make_checker_server
from .sim import load_deployments, routing_fraction, simulate
from .space import ModelFormatError, dump_model
from .store import LocationStore, Snapshot, make_cache_server, to_valuation
from .trace import DEFAULT_SLA, read_trace, write_records, write_trace
from .workload import (
    SineProfile, estimate_cost, formula_text, hour_trace, load_plans, replay, summarize, synth_trace,
)

BUNDLED_TRACES = {"hour536": "hour536.csv"}
BUNDLED_PLANS = {"table1", "table1.cfg", "table1.json"}

log = logging.getLogger("spacecheck")


class UsageError(Exception):
    pass


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _model(path: str):
    if path not in BUNDLED_MODELS:
        _existing(path)
    return load_model(path)


def _trace(path: str):
    stem = Path(path).stem if path.endswith(".csv") else path
    if not Path(path).is_file() and stem in BUNDLED_TRACES:
        with resources.as_file(resources.files("spacecheck.data").joinpath(BUNDLED_TRACES[stem])) as p:
            return read_trace(p)
    return read_trace(_existing(path))


def _print_summary(summary, as_json: bool) -> None:
    if as_json:
        print(json.dumps(summary.to_json(), indent=2))
    else:
        print(summary.table())


# -- subcommands --------------------------------------------------------------

def cmd_ingest(args) -> int:
    pois = ingest.read_pois(_existing(args.pois))
    samples = ingest.read_trajectories(_existing(args.trajectories), lonlat=args.lonlat)
    presences = ingest.match_presences(pois, samples, args.radius)
    ingest.write_presences(args.out, presences)
    print(f"{len(presences)} presences from {len(samples)} samples -> {args.out}")
    if args.model:
        space = ingest.build_accessibility(presences, pois)
        Path(args.model).write_text(dump_model(ingest.model_from_pois(space, pois)))
        print(f"model with {space.size} points, {len(space.undirected_edges())} edges -> {args.model}")
    return 0


def cmd_build_model(args) -> int:
    pois = ingest.read_pois(_existing(args.pois))
    presences = ingest.read_presences(_existing(args.presences))
    space = ingest.build_accessibility(presences, pois)
    model = ingest.model_from_pois(space, pois)
    Path(args.out).write_text(dump_model(model))
    print(f"model {model.version}: {space.size} points, {len(space.undirected_edges())} edges -> {args.out}")
    return 0


def cmd_check(args) -> int:
    model = _model(args.model)
    try:
        formula = parse(formula_text(args.formula))
    except FormulaSyntaxError as exc:
        raise UsageError(str(exc)) from None
    if args.snapshot:
        snap = Snapshot.from_json(json.loads(_existing(args.snapshot).read_text()))
    else:
        positions = {}
        for item in args.at or []:
            entity, sep, poi = item.partition("=")
            if not sep:
                raise UsageError(f"--at expects ENTITY=POI, got {item!r}")
            positions[entity] = poi
        snap = Snapshot.from_positions(positions)
    if args.snapshot or args.at:
        model = to_valuation(snap, model, args.presence_prop)
    points = sat(model, formula)
    print(f"satisfied: {'true' if points else 'false'}")
    if args.points:
        print("points: " + " ".join(model.space.names(points)))
    if args.exit_by_verdict and not points:
        return 3
    return 0


def cmd_serve_cache(args) -> int:
    server = make_cache_server(LocationStore(horizon=args.horizon), args.host, args.port)
    print(f"location cache on http://{server.server_address[0]}:{server.server_address[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_serve_checker(args) -> int:
    try:
        model = _model(args.model)
    except ModelFormatError as exc:
        print(f"error: cannot load model: {exc}", file=sys.stderr)
        return 1
    service = CheckerService(model, args.cache_url, args.workers, args.queue)
    server = make_checker_server(service, args.host, args.port)
    print(f"model-checker (model {model.version}) on "
          f"http://{server.server_address[0]}:{server.server_address[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_replay(args) -> int:
    trace = _trace(args.trace)
    records = replay(trace, args.rate, args.target, concurrency=args.concurrency, sla=args.sla,
                     timeout=args.timeout, seed=args.seed, cache_url=args.cache_url,
                     presence_prop=args.presence_prop)
    if args.out:
        write_records(args.out, records)
    _print_summary(summarize(records, args.sla), args.json)
    return 0


def cmd_simulate(args) -> int:
    text = _existing(args.config).read_text() if args.config else None
    deployments = load_deployments(text)
    if args.deployment not in deployments:
        raise UsageError(f"unknown deployment {args.deployment!r}; known: {', '.join(sorted(deployments))}")
    trace = _trace(args.trace).scaled(args.rate)
    result = simulate(trace, deployments[args.deployment], seed=args.seed, sla=args.sla, timeout=args.timeout)
    if args.out:
        write_records(args.out, result.records)
    summary = summarize(result.records, args.sla)
    _print_summary(summary, args.json)
    if result.hybrid and not args.json:
        print(f"routed to elastic: {routing_fraction(result):.1%}")
    return 0


def cmd_cost(args) -> int:
    if args.plan in BUNDLED_PLANS and not Path(args.plan).is_file():
        plans = load_plans()
    else:
        plans = load_plans(_existing(args.plan).read_text())
    out = {}
    for name, plan in plans.items():
        est = estimate_cost(plan)
        out[name] = {"per_period": list(est.per_period), "daily": est.daily, "monthly": est.monthly}
    if args.json:
        print(json.dumps(out, indent=2))
    else:
        for name, est in out.items():
            print(f"{name:12} daily {est['daily']:9.2f}   monthly {est['monthly']:9.2f}")
    return 0


def cmd_synth(args) -> int:
    if args.what == "model":
        model = ingest.synth_model(args.nodes, args.edges, args.props, args.seed)
        Path(args.out).write_text(dump_model(model))
        print(f"model {model.version}: {model.space.size} points -> {args.out}")
        return 0
    # trace POIs name points of the synthetic model of the same --nodes
    pois = [f"poi{i}" for i in range(args.nodes)]
    if args.what == "day":
        trace = synth_trace(SineProfile.fit(), seed=args.seed, pois=pois)
        write_trace(args.out, trace)
        print(f"{len(trace)} requests over 24h -> {args.out}")
    else:
        trace = hour_trace(args.requests, seed=args.seed, pois=pois)
        write_trace(args.out, trace)
        print(f"{len(trace)} requests over 1h -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spacecheck", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--sla", type=float, default=DEFAULT_SLA, help="SLA threshold in seconds")
    shared.add_argument("--json", action="store_true", help="emit a JSON document")

    s = sub.add_parser("ingest", help="match trajectories to POIs")
    s.add_argument("--pois", required=True)
    s.add_argument("--trajectories", required=True)
    s.add_argument("--lonlat", action="store_true", help="header-less rows are entity,time,lon,lat")
    s.add_argument("--radius", type=float, default=ingest.DEFAULT_RADIUS_M)
    s.add_argument("--out", required=True, help="presence CSV")
    s.add_argument("--model", help="also write the accessibility model here")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("build-model", help="accessibility model from presences")
    s.add_argument("--pois", required=True)
    s.add_argument("--presences", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_build_model)

    s = sub.add_parser("check", help="evaluate a formula on a model")
    s.add_argument("--model", required=True, help="model file or 'mini-city'")
    s.add_argument("--formula", required=True, help="formula text or a property name (P1, P2, P3, F2)")
    s.add_argument("--snapshot", help="snapshot JSON as served by GET /locations")
    s.add_argument("--at", action="append", metavar="ENTITY=POI")
    s.add_argument("--presence-prop", default="taxi")
    s.add_argument("--points", action="store_true", help="list satisfying points")
    s.add_argument("--exit-by-verdict", action="store_true")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("serve-cache", help="run the location cache")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8081)
    s.add_argument("--horizon", type=float, help="drop entities unseen for this many seconds")
    s.set_defaults(func=cmd_serve_cache)

    s = sub.add_parser("serve-checker", help="run the model-checker service")
    s.add_argument("--model", required=True)
    s.add_argument("--cache-url")
    s.add_argument("--workers", type=int)
    s.add_argument("--queue", type=int, default=1024)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8080)
    s.set_defaults(func=cmd_serve_checker)

    s = sub.add_parser("replay", parents=[shared], help="replay a trace against a target")
    s.add_argument("--trace", required=True, help="trace CSV or 'hour536'")
    s.add_argument("--rate", type=float, default=1.0, help="time multiplier")
    s.add_argument("--target", required=True, help="checker URL or sim:NAME")
    s.add_argument("--concurrency", type=int, default=64)
    s.add_argument("--timeout", type=float, default=120.0)
    s.add_argument("--cache-url")
    s.add_argument("--presence-prop", default="taxi")
    s.add_argument("--out", help="write RequestRecord CSV")
    s.set_defaults(func=cmd_replay)

    s = sub.add_parser("simulate", parents=[shared], help="simulate a deployment")
    s.add_argument("--deployment", required=True)
    s.add_argument("--trace", required=True, help="trace CSV or 'hour536'")
    s.add_argument("--rate", type=float, default=1.0, help="time multiplier")
    s.add_argument("--config", help="deployment JSON (defaults to the bundled calibration)")
    s.add_argument("--timeout", type=float, default=120.0)
    s.add_argument("--out", help="write RequestRecord CSV")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("cost", parents=[shared], help="estimate deployment cost")
    s.add_argument("--plan", default="table1", help="cost plan JSON or 'table1'")
    s.set_defaults(func=cmd_cost)

    s = sub.add_parser("synth", parents=[shared], help="generate synthetic models and traces")
    s.add_argument("what", choices=["model", "day", "hour"])
    s.add_argument("--out", required=True)
    s.add_argument("--nodes", type=int, default=5152)
    s.add_argument("--edges", type=int, default=36805)
    s.add_argument("--props", type=int, default=15456)
    s.add_argument("--requests", type=int, default=536)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
