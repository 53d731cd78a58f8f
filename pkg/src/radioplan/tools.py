"""The agent's tool set: map import, environment, grid, maps, planning.

Each tool reads and writes named session-state slots; the planner uses
those slot revisions to decide when a past invocation still covers a
request and when (say, after network optimization changed the stations)
a radio map has to be regenerated.
"""

from __future__ import annotations

import logging

from . import scenarios
from .agent import (AgentConfig, AgentSession, Profile, ToolExecutionError,
                    ToolParam, ToolRegistry, ToolResult, ToolSpec,
                    default_profile)
from .geodata import GeoBBox, fetch_osm, parse_osm
from .jsonio import dumps_canonical
from .planner import (PlanningConfig, default_seed_radius, optimize,
                      random_deployment)
from .propagation import AntennaPattern, BaseStation, generate_radio_map
from .rendering import heatmap_png_bytes, radio_map_payload, sinr_map_payload
from .scene import build_environment, create_grid, environment_to_dict
from .sinr import compute_sinr_map, coverage_stats
from .store import ProjectStore

log = logging.getLogger(__name__)

SLOT_OSM = "osm"
SLOT_SCENE = "scene"
SLOT_GRID = "grid"
SLOT_STATIONS = "stations"
SLOT_RADIO_MAP = "radio_map"
SLOT_PLAN = "plan"


def _scenario_for(session: AgentSession, area: str | None):
    if area is None:
        return None
    try:
        return scenarios.resolve_area(area)
    except KeyError:
        return None


def canonicalize_tool_args(tool: str, args: dict, session: AgentSession,
                           sim_area: str | None) -> dict:
    """Fill in session defaults so equal requests get equal dedup keys."""
    cfg = session.config
    if tool == "import_osm":
        area = args.get("area") or sim_area or cfg.default_area
        if area is None:
            raise ToolExecutionError(
                "no area to import: give one in the prompt or configure a "
                "default area for the session")
        return {"area": str(area).strip().casefold()}
    if tool == "create_simulation_area":
        scenario = _scenario_for(session, sim_area or cfg.default_area)
        resolution = args.get("resolution_m") or cfg.resolution_m or (
            scenario.default_resolution_m if scenario else 5.0)
        return {"resolution_m": float(resolution),
                "station_count": int(args.get("station_count",
                                              cfg.initial_station_count)),
                "seed": int(args.get("seed", cfg.deployment_seed))}
    if tool == "generate_radio_map":
        return {"noise_figure_db": float(args.get("noise_figure_db",
                                                  cfg.noise_figure_db))}
    if tool == "optimize_network":
        out = {"seed": int(args.get("seed", 0))}
        for key in ("coverage_target", "pl_threshold", "max_stations",
                    "iteration_budget", "min_spacing"):
            if key in args:
                out[key] = args[key]
        return out
    return dict(args)


def _require(session: AgentSession, slot: str, tool: str):
    value = session.state.get(slot)
    if value is None:
        raise ToolExecutionError(
            f"{tool} needs {slot!r} but no prior stage produced it")
    return value


def _planning_config(session: AgentSession, args: dict) -> PlanningConfig:
    overrides = dict(session.config.planning_overrides)
    scenario = _scenario_for(session, session.current_area)
    if scenario is not None:
        for key, value in scenario.planning_overrides().items():
            overrides.setdefault(key, value)
    for key in ("coverage_target", "pl_threshold", "max_stations",
                "iteration_budget", "min_spacing"):
        if key in args:
            overrides[key] = args[key]
    overrides["seed"] = args.get("seed", 0)
    return PlanningConfig(**overrides)


def _pattern(session: AgentSession) -> AntennaPattern:
    return AntennaPattern()


# -- executors ---------------------------------------------------------


def run_import_osm(session: AgentSession, args: dict, progress) -> ToolResult:
    area = args["area"]
    scenario = _scenario_for(session, area)
    if scenario is None:
        raise ToolExecutionError(
            f"unknown area {area!r}; bundled areas: "
            + ", ".join(sorted(scenarios.SCENARIOS)))
    transport = session.transport or scenarios.ScenarioTransport()
    progress(10, "fetching OSM document")
    document = fetch_osm(scenario.bbox, transport,
                         cache_dir=session.store.osm_cache_dir)
    progress(60, "parsing")
    osm = parse_osm(document)
    artifact = session.store.add_artifact(session.id, "osm",
                                          f"{scenario.name}.osm", document)
    session.state[SLOT_OSM] = osm
    session.state["bbox"] = scenario.bbox
    session.current_area = area
    session.bump(SLOT_OSM)
    progress(100)
    return ToolResult(
        summary=(f"imported OSM for {scenario.name}: {osm.node_count} nodes, "
                 f"{osm.way_count} ways"),
        artifacts=[artifact])


def run_create_environment(session: AgentSession, args: dict, progress) -> ToolResult:
    osm = _require(session, SLOT_OSM, "create_environment")
    progress(20, "building environment")
    env = build_environment(osm)
    doc = dumps_canonical(environment_to_dict(env)).encode("utf-8")
    artifact = session.store.add_artifact(session.id, "scene", "scene.json", doc)
    session.state[SLOT_SCENE] = env
    session.bump(SLOT_SCENE)
    progress(100)
    return ToolResult(
        summary=(f"outdoor environment: {len(env.buildings)} buildings, "
                 f"{len(env.roads)} roads, {len(env.green_areas)} green areas"),
        artifacts=[artifact])


def run_create_simulation_area(session: AgentSession, args: dict,
                               progress) -> ToolResult:
    env = _require(session, SLOT_SCENE, "create_simulation_area")
    resolution = args["resolution_m"]
    progress(20, "laying grid")
    grid = create_grid(env, resolution)
    cfg = _planning_config(session, {})
    progress(60, "deploying initial stations")
    stations = random_deployment(grid, env, cfg, count=args["station_count"],
                                 seed=args["seed"],
                                 within_radius_m=default_seed_radius(grid))
    session.state[SLOT_GRID] = grid
    session.state[SLOT_STATIONS] = stations
    session.bump(SLOT_GRID)
    session.bump(SLOT_STATIONS)
    progress(100)
    return ToolResult(
        summary=(f"grid {grid.width}x{grid.height} at {resolution:g} m "
                 f"({grid.outdoor_count()} outdoor cells); deployed "
                 f"{len(stations)} initial stations"))


def run_generate_radio_map(session: AgentSession, args: dict, progress) -> ToolResult:
    env = _require(session, SLOT_SCENE, "generate_radio_map")
    grid = _require(session, SLOT_GRID, "generate_radio_map")
    stations = _require(session, SLOT_STATIONS, "generate_radio_map")
    pattern = _pattern(session)
    nf = args["noise_figure_db"]

    progress(10, "computing best path loss")
    radio = generate_radio_map(grid, stations, env, pattern)
    progress(50, "computing SINR")
    sinr = compute_sinr_map(grid, stations, env, pattern, noise_figure=nf)
    report = coverage_stats(radio, sinr)

    rev = session.state_revs.get(SLOT_STATIONS, 0)
    adds = []
    adds.append(session.store.add_artifact(
        session.id, "radio_map_json", f"radio-map-r{rev}.json",
        dumps_canonical(radio_map_payload(radio)).encode("utf-8")))
    adds.append(session.store.add_artifact(
        session.id, "radio_map_png", f"radio-map-r{rev}.png",
        heatmap_png_bytes(radio.best_path_loss)))
    progress(75, "rendering SINR heatmap")
    adds.append(session.store.add_artifact(
        session.id, "sinr_map_json", f"sinr-map-r{rev}.json",
        dumps_canonical(sinr_map_payload(sinr)).encode("utf-8")))
    adds.append(session.store.add_artifact(
        session.id, "sinr_map_png", f"sinr-map-r{rev}.png",
        heatmap_png_bytes(sinr.sinr_db)))
    adds.append(session.store.add_artifact(
        session.id, "report_json", f"coverage-report-r{rev}.json",
        dumps_canonical(report.to_dict()).encode("utf-8")))

    session.state[SLOT_RADIO_MAP] = radio
    session.bump(SLOT_RADIO_MAP)
    progress(100)
    return ToolResult(
        summary=(f"radio map over {report.outdoor_cells} outdoor cells: "
                 f"{float(report.pl_compliant_fraction):.1%} at PL <= "
                 f"{report.pl_threshold_db:g} dB, "
                 f"{float(report.sinr_compliant_fraction):.1%} at SINR > "
                 f"{report.sinr_threshold_db:g} dB"),
        artifacts=adds)


def run_optimize_network(session: AgentSession, args: dict, progress) -> ToolResult:
    env = _require(session, SLOT_SCENE, "optimize_network")
    grid = _require(session, SLOT_GRID, "optimize_network")
    stations = _require(session, SLOT_STATIONS, "optimize_network")
    cfg = _planning_config(session, args)
    pattern = _pattern(session)

    progress(5, "searching deployments")
    plan = optimize(env, grid, pattern, cfg, initial=list(stations))
    progress(85, "serializing plan")
    artifact = session.store.add_artifact(
        session.id, "plan_json", f"plan-seed{cfg.seed}.json",
        dumps_canonical(plan.to_dict()).encode("utf-8"))

    session.state[SLOT_STATIONS] = list(plan.stations)
    session.state[SLOT_PLAN] = plan
    session.bump(SLOT_STATIONS)
    session.bump(SLOT_PLAN)
    progress(100)
    return ToolResult(
        summary=(f"optimized deployment: {len(plan.stations)} stations, "
                 f"{plan.achieved_coverage:.1%} coverage, "
                 f"{'compliant' if plan.compliant else 'not compliant'}"),
        artifacts=[artifact])


def build_default_registry() -> ToolRegistry:
    registry = ToolRegistry()
    registry.register(ToolSpec(
        name="import_osm",
        description="Download (or load from fixtures) the OSM extract for an area.",
        params=(ToolParam("area", "string"),),
        writes=(SLOT_OSM,)), run_import_osm)
    registry.register(ToolSpec(
        name="create_environment",
        description="Build the outdoor environment model from the imported map.",
        dependencies=("import_osm",),
        reads=(SLOT_OSM,), writes=(SLOT_SCENE,)), run_create_environment)
    registry.register(ToolSpec(
        name="create_simulation_area",
        description="Lay the simulation grid and randomly deploy initial stations.",
        params=(ToolParam("resolution_m", "number"),
                ToolParam("station_count", "integer"),
                ToolParam("seed", "integer")),
        dependencies=("create_environment",),
        reads=(SLOT_SCENE,), writes=(SLOT_GRID, SLOT_STATIONS)),
        run_create_simulation_area)
    registry.register(ToolSpec(
        name="generate_radio_map",
        description="Compute best-path-loss and SINR maps with a coverage report.",
        params=(ToolParam("noise_figure_db", "number"),),
        dependencies=("create_simulation_area",),
        reads=(SLOT_SCENE, SLOT_GRID, SLOT_STATIONS), writes=(SLOT_RADIO_MAP,)),
        run_generate_radio_map)
    registry.register(ToolSpec(
        name="optimize_network",
        description="Optimize station placement, count, power, azimuth, and tilt.",
        params=(ToolParam("seed", "integer"),
                ToolParam("coverage_target", "number"),
                ToolParam("pl_threshold", "number"),
                ToolParam("max_stations", "integer"),
                ToolParam("iteration_budget", "integer"),
                ToolParam("min_spacing", "number")),
        dependencies=("generate_radio_map",),
        reads=(SLOT_SCENE, SLOT_GRID, SLOT_STATIONS),
        writes=(SLOT_STATIONS, SLOT_PLAN)), run_optimize_network)
    registry.check_acyclic()
    return registry


# -- session construction and restore ----------------------------------


def create_session(session_id: str, store: ProjectStore, backend,
                   profile: Profile | None = None,
                   config: AgentConfig | None = None,
                   transport=None, event_sink=None) -> AgentSession:
    session = AgentSession(
        session_id=session_id,
        profile=profile or default_profile(str(store.root)),
        registry=build_default_registry(),
        backend=backend,
        store=store,
        config=config,
        transport=transport,
        event_sink=event_sink)
    _restore(session, config_given=config is not None)
    return session


def state_snapshot(session: AgentSession) -> dict:
    """Serializable slice of session state for restart rehydration."""
    bbox = session.state.get("bbox")
    grid = session.state.get(SLOT_GRID)
    stations = session.state.get(SLOT_STATIONS)
    return {
        "current_area": session.current_area,
        "state_revs": dict(session.state_revs),
        "rev_counter": session._rev_counter,
        "task_counter": session._task_counter,
        "config": session.config.to_dict(),
        "bbox": bbox.to_dict() if bbox is not None else None,
        "resolution_m": grid.resolution if grid is not None else None,
        "stations": [s.to_dict() for s in stations] if stations else None,
    }


def _restore(session: AgentSession, config_given: bool = False) -> None:
    """Rebuild memory and state slots from a prior run's persistence."""
    records, degraded = session.store.read_transcript(session.id)
    if degraded:
        session.degraded = True
    if records:
        from .agent import TaskRecord

        for rec in records:
            session.memory.long_term.append(TaskRecord.from_dict(rec))

    snap = session.store.load_session_state(session.id)
    if not snap:
        return
    if not config_given and snap.get("config"):
        # Keep the original session defaults so canonicalized arguments
        # (and with them the duplicate suppression) stay stable.
        session.config = AgentConfig.from_dict(snap["config"])
    session.current_area = snap.get("current_area")
    session.state_revs = dict(snap.get("state_revs", {}))
    session._rev_counter = snap.get("rev_counter", 0)
    session._task_counter = snap.get("task_counter", 0)

    bbox = snap.get("bbox")
    stations = snap.get("stations")
    try:
        if session.current_area and bbox:
            transport = session.transport or scenarios.ScenarioTransport()
            document = fetch_osm(GeoBBox.from_dict(bbox), transport,
                                 cache_dir=session.store.osm_cache_dir)
            osm = parse_osm(document)
            session.state[SLOT_OSM] = osm
            session.state["bbox"] = GeoBBox.from_dict(bbox)
            if session.state_revs.get(SLOT_SCENE):
                session.state[SLOT_SCENE] = build_environment(osm)
            if session.state_revs.get(SLOT_GRID) and snap.get("resolution_m"):
                session.state[SLOT_GRID] = create_grid(
                    session.state[SLOT_SCENE], snap["resolution_m"])
        if stations:
            session.state[SLOT_STATIONS] = [BaseStation.from_dict(s)
                                            for s in stations]
    except Exception as exc:  # a partial restore still serves artifacts
        session.degraded = True
        log.warning("session %s: state restore incomplete: %s", session.id, exc)


def default_mock_rules() -> list[dict]:
    """Scripted completions reproducing the canonical four-prompt flow.

    One import rule per named area keeps the fixtures explicit; the bare
    import pattern falls back to the session's configured default area.
    """
    rules = [
        {"prompt_pattern": f"Import osm file of {alias}*",
         "completion": ('Importing the map now.\n'
                        f'TOOL import_osm ARGS {{"area": "{alias}"}}')}
        for alias in ("HITSZ", "Hyde Park", "synthetic-urban", "suburban",
                      "open-park")
    ]
    rules.extend([
        {"prompt_pattern": "Import osm file*",
         "completion": 'TOOL import_osm ARGS {}'},
        {"prompt_pattern": "Create outdoor environment*",
         "completion": 'TOOL create_environment ARGS {}'},
        {"prompt_pattern": "Simulation area creation*",
         "completion": 'TOOL create_simulation_area ARGS {}'},
        {"prompt_pattern": "Radio Map Generation*",
         "completion": 'TOOL generate_radio_map ARGS {}'},
        {"prompt_pattern": "Network Optimization*",
         "completion": ('Optimizing, then regenerating the map to show the '
                        'result.\n'
                        'TOOL optimize_network ARGS {"seed": 42}\n'
                        'TOOL generate_radio_map ARGS {}')},
    ])
    return rules
