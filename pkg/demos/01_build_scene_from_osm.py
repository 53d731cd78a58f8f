#!/usr/bin/env python3
"""Build an outdoor scene from OSM data.

Loads the bundled dense-urban scenario, parses the OSM XML, builds the
environment model (buildings, roads, green areas), and lays the 5 m
simulation grid over it.
"""

from radioplan import build_environment, create_grid, parse_osm
from radioplan.scenarios import SCENARIOS, scenario_document


def main() -> None:
    scenario = SCENARIOS["synthetic-urban"]
    print(f"Scenario: {scenario.name} — {scenario.description}")
    print(f"BBox: {scenario.bbox.key()}")

    document = scenario_document(scenario.name)
    osm = parse_osm(document)
    print(f"Parsed {osm.node_count} nodes, {osm.way_count} ways")

    env = build_environment(osm)
    heights = sorted(b.height for b in env.buildings)
    print(f"Environment: {len(env.buildings)} buildings "
          f"(heights {heights[0]:.0f}–{heights[-1]:.0f} m), "
          f"{len(env.roads)} roads, {len(env.green_areas)} green areas")

    grid = create_grid(env, resolution=scenario.default_resolution_m)
    indoor = int(grid.indoor_mask.sum())
    print(f"Grid: {grid.width} x {grid.height} cells at "
          f"{grid.resolution:g} m — {indoor} indoor, "
          f"{grid.outdoor_count()} outdoor")


if __name__ == "__main__":
    main()
