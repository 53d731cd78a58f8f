#!/usr/bin/env python3
"""SINR analysis and the coverage-compliance report.

Computes the SINR map for the same deployment as the radio-map demo and
prints the compliance fractions against the planning thresholds
(PL <= 100 dB, SINR > 5 dB).
"""

from radioplan import (AntennaPattern, BaseStation, build_environment,
                       compute_sinr_map, coverage_stats, create_grid,
                       generate_radio_map, parse_osm, thermal_noise)
from radioplan.geodata import LocalPoint
from radioplan.rendering import save_heatmap_png
from radioplan.scenarios import scenario_document


def main() -> None:
    env = build_environment(parse_osm(scenario_document("synthetic-urban")))
    grid = create_grid(env, resolution=5.0)
    pattern = AntennaPattern()

    stations = [
        BaseStation(id="north", position=LocalPoint(0.0, 120.0), azimuth=0.0),
        BaseStation(id="south-east", position=LocalPoint(110.0, -90.0), azimuth=135.0),
        BaseStation(id="west", position=LocalPoint(-140.0, -20.0), azimuth=270.0),
    ]

    noise = thermal_noise(stations[0].bandwidth, 7.0)
    print(f"Noise floor at 80 MHz with a 7 dB noise figure: {noise:.2f} dBm")

    radio = generate_radio_map(grid, stations, env, pattern)
    sinr = compute_sinr_map(grid, stations, env, pattern, noise_figure=7.0)
    report = coverage_stats(radio, sinr)

    print(f"Outdoor cells: {report.outdoor_cells}")
    print(f"PL <= {report.pl_threshold_db:g} dB: "
          f"{report.pl_compliant_cells} cells "
          f"({float(report.pl_compliant_fraction):.1%})")
    print(f"SINR > {report.sinr_threshold_db:g} dB: "
          f"{report.sinr_compliant_cells} cells "
          f"({float(report.sinr_compliant_fraction):.1%})")

    save_heatmap_png(sinr.sinr_db, "sinr_map.png")
    print("Wrote sinr_map.png")


if __name__ == "__main__":
    main()
