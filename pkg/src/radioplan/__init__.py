"""Radio map generation and wireless network planning, driven by prompts.

The numeric stack (geodata -> scene -> propagation -> sinr -> planner)
works as a plain library; the agent layer turns natural-language prompts
into ordered tool executions over that stack, and the HTTP service
exposes sessions, progress events, and artifacts to clients.
"""

__version__ = "0.1.0"

from .geodata import (GeoBBox, LocalPoint, OsmData, FixtureTransport,
                      HttpMapTransport, fetch_osm, parse_osm, project, unproject)
from .scene import (Building, EmptySceneError, EnvironmentModel, SimulationGrid,
                    build_environment, create_grid, load_environment,
                    save_environment)
from .propagation import (AntennaPattern, BaseStation, RadioMap, antenna_gain,
                          fspl, generate_radio_map, path_loss)
from .sinr import (CoverageReport, SinrMap, compute_sinr_map, coverage_stats,
                   thermal_noise)
from .planner import (NetworkPlan, NoFeasibleSitesError, PlanningConfig,
                      candidate_sites, evaluate_plan, optimize,
                      random_deployment)

__all__ = [
    "__version__",
    "GeoBBox", "LocalPoint", "OsmData", "FixtureTransport", "HttpMapTransport",
    "fetch_osm", "parse_osm", "project", "unproject",
    "Building", "EmptySceneError", "EnvironmentModel", "SimulationGrid",
    "build_environment", "create_grid", "load_environment", "save_environment",
    "AntennaPattern", "BaseStation", "RadioMap", "antenna_gain", "fspl",
    "generate_radio_map", "path_loss",
    "CoverageReport", "SinrMap", "compute_sinr_map", "coverage_stats",
    "thermal_noise",
    "NetworkPlan", "NoFeasibleSitesError", "PlanningConfig", "candidate_sites",
    "evaluate_plan", "optimize", "random_deployment",
]
