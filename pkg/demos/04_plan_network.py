#!/usr/bin/env python3
"""Automatic cell planning: before/after coverage comparison.

Starts from three naively dropped stations, runs the optimizer under the
80%-at-100-dB compliance target with 50 m spacing, and reports how both
compliance metrics moved.  Writes before/after heatmaps.
"""

from radioplan import (AntennaPattern, PlanningConfig, build_environment,
                       compute_sinr_map, coverage_stats, create_grid,
                       generate_radio_map, optimize, parse_osm,
                       random_deployment)
from radioplan.planner import default_seed_radius
from radioplan.rendering import save_heatmap_png
from radioplan.scenarios import SCENARIOS, scenario_document


def report_for(stations, grid, env, pattern):
    radio = generate_radio_map(grid, stations, env, pattern)
    sinr = compute_sinr_map(grid, stations, env, pattern)
    return radio, coverage_stats(radio, sinr)


def main() -> None:
    scenario = SCENARIOS["synthetic-urban"]
    env = build_environment(parse_osm(scenario_document(scenario.name)))
    grid = create_grid(env, resolution=scenario.default_resolution_m)
    pattern = AntennaPattern()
    config = PlanningConfig(seed=42, **scenario.planning_overrides())

    initial = random_deployment(grid, env, config, count=3, seed=42,
                                within_radius_m=default_seed_radius(grid))
    radio_before, before = report_for(initial, grid, env, pattern)
    print("Before planning (3 naively placed stations):")
    print(f"  PL coverage   {float(before.pl_compliant_fraction):.1%}")
    print(f"  SINR coverage {float(before.sinr_compliant_fraction):.1%}")

    plan = optimize(env, grid, pattern, config, initial=initial)
    radio_after, after = report_for(plan.stations, grid, env, pattern)
    print(f"After planning ({len(plan.stations)} stations, "
          f"{'compliant' if plan.compliant else 'not compliant'}):")
    print(f"  PL coverage   {float(after.pl_compliant_fraction):.1%}")
    print(f"  SINR coverage {float(after.sinr_compliant_fraction):.1%}")
    for s in plan.stations:
        print(f"  {s.id}: ({s.position.x:+.0f}, {s.position.y:+.0f}) m, "
              f"azimuth {s.azimuth:g}°, tilt {s.down_tilt:g}°, "
              f"{s.tx_power:g} dBm")

    save_heatmap_png(radio_before.best_path_loss, "coverage_before.png")
    save_heatmap_png(radio_after.best_path_loss, "coverage_after.png")
    print("Wrote coverage_before.png and coverage_after.png")


if __name__ == "__main__":
    main()
