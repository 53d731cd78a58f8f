"""Command-line driver: every pipeline stage, an agent REPL, and serve.

Each subcommand is a thin shell over a library call.  Exit codes are
machine-checkable: 0 success, 1 usage error, 2 data error, 3 internal
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .agent import AgentConfig, AgentError, model_backend, step
from .geodata import (FixtureTransport, GeoBBox, HttpMapTransport,
                      OsmParseError, TransportError, fetch_osm, parse_osm)
from .jsonio import read_json, write_bytes_atomic, write_json_atomic
from .planner import (NoFeasibleSitesError, PlanInvariantError, PlanningConfig,
                      optimize, random_deployment)
from .propagation import AntennaPattern, BaseStation, generate_radio_map
from .rendering import heatmap_png_bytes, radio_map_payload, sinr_map_payload
from .scene import (EmptySceneError, build_environment, create_grid,
                    environment_to_dict, load_environment)
from .scenarios import ScenarioTransport, resolve_area
from .sinr import compute_sinr_map, coverage_stats
from .store import LogicalClock, ProjectStore, WallClock
from .tools import create_session, default_mock_rules

USAGE_ERROR, DATA_ERROR, INTERNAL_ERROR = 1, 2, 3

DATA_ERRORS = (ValueError, KeyError, FileNotFoundError, IsADirectoryError,
               json.JSONDecodeError, OsmParseError, TransportError,
               EmptySceneError, NoFeasibleSitesError, PlanInvariantError,
               AgentError)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _parse_bbox(text: str) -> GeoBBox:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 4:
        raise ValueError("bbox must be min_lat,min_lon,max_lat,max_lon")
    return GeoBBox(*parts)


def _load_stations(path: str) -> list[BaseStation]:
    doc = read_json(path)
    stations = [BaseStation.from_dict(d) for d in doc.get("stations", [])]
    if not stations:
        raise ValueError(f"stations file {path} contains an empty station list")
    return stations


def _grid_for(scene_path: str, resolution: float):
    env = load_environment(scene_path)
    return env, create_grid(env, resolution)


def cmd_fetch_osm(args) -> int:
    if args.area:
        scenario = resolve_area(args.area)
        bbox = scenario.bbox
        transport = ScenarioTransport()
    else:
        if not args.bbox:
            raise ValueError("give either --bbox or --area")
        bbox = _parse_bbox(args.bbox)
        if args.fixture_dir:
            transport = FixtureTransport(args.fixture_dir)
        else:
            transport = HttpMapTransport(args.url or HttpMapTransport.DEFAULT_URL)
    document = fetch_osm(bbox, transport, cache_dir=args.cache_dir)
    write_bytes_atomic(args.out, document)
    print(f"wrote {args.out} ({len(document)} bytes)")
    return 0


def cmd_build_env(args) -> int:
    osm = parse_osm(Path(args.osm).read_bytes())
    env = build_environment(osm)
    write_json_atomic(args.out, environment_to_dict(env))
    print(f"wrote {args.out}: {len(env.buildings)} buildings, "
          f"{len(env.roads)} roads, {len(env.green_areas)} green areas")
    return 0


def cmd_radiomap(args) -> int:
    env, grid = _grid_for(args.scene, args.resolution)
    stations = _load_stations(args.stations)
    radio = generate_radio_map(grid, stations, env, AntennaPattern())
    write_json_atomic(args.out, radio_map_payload(radio))
    print(f"wrote {args.out}: {grid.width}x{grid.height} cells, "
          f"{len(stations)} stations")
    if args.png:
        write_bytes_atomic(args.png, heatmap_png_bytes(radio.best_path_loss))
        print(f"wrote {args.png}")
    return 0


def cmd_sinr(args) -> int:
    env, grid = _grid_for(args.scene, args.resolution)
    stations = _load_stations(args.stations)
    pattern = AntennaPattern()
    radio = generate_radio_map(grid, stations, env, pattern)
    sinr = compute_sinr_map(grid, stations, env, pattern, noise_figure=args.nf)
    report = coverage_stats(radio, sinr)
    write_json_atomic(args.out, sinr_map_payload(sinr))
    report_path = args.report or str(Path(args.out).with_name(
        Path(args.out).stem + "-report.json"))
    write_json_atomic(report_path, report.to_dict())
    print(f"wrote {args.out} and {report_path}: "
          f"PL<= {report.pl_threshold_db:g} dB on "
          f"{float(report.pl_compliant_fraction):.1%}, SINR> "
          f"{report.sinr_threshold_db:g} dB on "
          f"{float(report.sinr_compliant_fraction):.1%} of outdoor cells")
    if args.png:
        write_bytes_atomic(args.png, heatmap_png_bytes(sinr.sinr_db))
        print(f"wrote {args.png}")
    return 0


def cmd_plan(args) -> int:
    cfg_doc = read_json(args.config) if args.config else {}
    resolution = args.resolution or cfg_doc.get("resolution_m", 5.0)
    env, grid = _grid_for(args.scene, resolution)

    planning = dict(cfg_doc.get("planning", {}))
    if args.seed is not None:
        planning["seed"] = args.seed
    config = PlanningConfig(**planning)

    initial_spec = cfg_doc.get("initial_stations")
    if isinstance(initial_spec, list):
        initial = [BaseStation.from_dict(d) for d in initial_spec]
    elif isinstance(initial_spec, dict):
        initial = random_deployment(grid, env, config,
                                    count=initial_spec.get("count", 3),
                                    seed=initial_spec.get("seed", 0))
    else:
        initial = []

    plan = optimize(env, grid, AntennaPattern(), config, initial=initial)
    write_json_atomic(args.out, plan.to_dict())
    print(f"wrote {args.out}: {len(plan.stations)} stations, "
          f"coverage {plan.achieved_coverage:.1%}, "
          f"{'compliant' if plan.compliant else 'not compliant'}")
    return 0


def cmd_agent(args) -> int:
    backend_cfg = {}
    if args.fixtures:
        backend_cfg["fixtures"] = args.fixtures
    elif args.backend == "mock":
        backend_cfg["rules"] = default_mock_rules()
    kind = {"mock": "scripted-mock", "remote": "remote-chat-api"}[args.backend]
    backend = model_backend(kind, backend_cfg)

    clock = LogicalClock() if args.backend == "mock" else WallClock()
    store = ProjectStore(args.project, clock=clock)
    agent_cfg = AgentConfig(default_area=args.area,
                            planning_overrides=read_json(args.planning)
                            if args.planning else {})
    transport = ScenarioTransport() if args.backend == "mock" else None
    session = create_session(args.session_id, store, backend,
                             config=agent_cfg, transport=transport)

    print(f"agent session {session.id} under {store.root} "
          f"(backend: {kind}); empty line or 'quit' exits")
    for line in sys.stdin:
        prompt = line.strip()
        if not prompt or prompt == "quit":
            break
        response = step(session, prompt)
        for entry in response.log_lines:
            print(f"  [log] {entry}")
        print(f"  {response.message}")
        for ref in response.artifacts:
            print(f"  [artifact] {ref.id} {ref.kind}: {store.resolve(ref)}")
    return 0


def cmd_serve(args) -> int:
    from .service import ServiceConfig, run_service

    doc = read_json(args.config)
    run_service(ServiceConfig(**doc))
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="radioplan",
                     description="Radio map generation and network planning")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("fetch-osm", help="download or load an OSM extract")
    p.add_argument("--bbox", help="min_lat,min_lon,max_lat,max_lon")
    p.add_argument("--area", help="bundled scenario name instead of a bbox")
    p.add_argument("--out", required=True)
    p.add_argument("--url", help="OSM API endpoint override")
    p.add_argument("--fixture-dir", help="serve from <dir>/<bbox-key>.osm files")
    p.add_argument("--cache-dir", help="cache directory keyed by bbox")
    p.set_defaults(func=cmd_fetch_osm)

    p = sub.add_parser("build-env", help="build the environment model")
    p.add_argument("--osm", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_env)

    p = sub.add_parser("radiomap", help="generate a best-path-loss radio map")
    p.add_argument("--scene", required=True)
    p.add_argument("--stations", required=True)
    p.add_argument("--resolution", type=float, default=5.0)
    p.add_argument("--out", required=True)
    p.add_argument("--png")
    p.set_defaults(func=cmd_radiomap)

    p = sub.add_parser("sinr", help="compute the SINR map and coverage report")
    p.add_argument("--scene", required=True)
    p.add_argument("--stations", required=True)
    p.add_argument("--resolution", type=float, default=5.0)
    p.add_argument("--nf", type=float, default=7.0, help="noise figure in dB")
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--png")
    p.set_defaults(func=cmd_sinr)

    p = sub.add_parser("plan", help="optimize the station deployment")
    p.add_argument("--scene", required=True)
    p.add_argument("--config", help="planning config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--resolution", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("agent", help="interactive agent prompt loop")
    p.add_argument("--backend", choices=["mock", "remote"], default="mock")
    p.add_argument("--fixtures", help="scripted completions JSON for the mock")
    p.add_argument("--project", default="./radioplan-project")
    p.add_argument("--area", help="default area for bare import prompts")
    p.add_argument("--session-id", default="session-001")
    p.add_argument("--planning", help="planning overrides JSON file")
    p.set_defaults(func=cmd_agent)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DATA_ERRORS as exc:
        print(f"radioplan: error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except KeyboardInterrupt:
        return INTERNAL_ERROR
    except Exception as exc:  # anything unexpected
        print(f"radioplan: internal error: {exc}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
