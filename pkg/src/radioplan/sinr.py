"""SINR maps and coverage-compliance statistics.

At each outdoor cell the serving station's received power is the signal;
every other station's received power sums (in linear milliwatts) into the
interference, on top of the thermal noise floor for the serving
bandwidth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .geodata import GeoBBox
from .propagation import (AntennaPattern, BaseStation, RX_HEIGHT_M, RadioMap,
                          WALL_LOSS_DB, received_power_matrix)
from .scene import EnvironmentModel, SimulationGrid

THERMAL_NOISE_DENSITY_DBM_HZ = -174.0   # kT at 290 K, rounded convention
DEFAULT_NOISE_FIGURE_DB = 7.0
DEFAULT_PL_THRESHOLD_DB = 100.0
DEFAULT_SINR_THRESHOLD_DB = 5.0


def mw_from_dbm(dbm):
    """Convert dBm to linear milliwatts. Accepts scalars or arrays."""
    out = np.power(10.0, np.asarray(dbm, dtype=float) / 10.0)
    return out if out.ndim else float(out)


def dbm_from_mw(mw):
    """Convert linear milliwatts to dBm. Accepts scalars or arrays."""
    out = 10.0 * np.log10(np.asarray(mw, dtype=float))
    return out if out.ndim else float(out)


def thermal_noise(bandwidth: float, noise_figure: float = DEFAULT_NOISE_FIGURE_DB) -> float:
    """Receiver noise floor in dBm: -174 + 10*log10(bandwidth) + noise figure."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    return THERMAL_NOISE_DENSITY_DBM_HZ + 10.0 * math.log10(bandwidth) + noise_figure


@dataclass
class SinrMap:
    """Per-cell SINR in dB over a grid; indoor cells hold NaN."""

    grid: SimulationGrid
    stations: list[BaseStation]
    sinr_db: np.ndarray         # float (height, width), NaN indoor
    serving_idx: np.ndarray     # int (height, width), -1 indoor
    origin: GeoBBox

    def serving_id(self, row: int, col: int) -> str | None:
        idx = int(self.serving_idx[row, col])
        return None if idx < 0 else self.stations[idx].id


def compute_sinr_map(grid: SimulationGrid, stations: list[BaseStation],
                     env: EnvironmentModel, pattern: AntennaPattern | None = None,
                     noise_figure: float = DEFAULT_NOISE_FIGURE_DB,
                     wall_loss_db: float = WALL_LOSS_DB,
                     rx_height: float = RX_HEIGHT_M) -> SinrMap:
    """SINR per outdoor cell, consistent with the radio map's serving choice.

    The noise floor uses the serving station's bandwidth plus the given
    noise figure.
    """
    if not stations:
        raise ValueError("station list is empty")
    pattern = pattern or AntennaPattern()
    stations, rx_dbm = received_power_matrix(grid, stations, env, pattern,
                                             wall_loss_db, rx_height)
    rx_mw = mw_from_dbm(rx_dbm)                       # (n, cells)
    serving = rx_dbm.argmax(axis=0)                   # first max = lowest id
    cells = np.arange(rx_mw.shape[1])
    signal = rx_mw[serving, cells]
    interference = rx_mw.sum(axis=0) - signal
    noise_mw = mw_from_dbm(np.array(
        [thermal_noise(s.bandwidth, noise_figure) for s in stations]))[serving]
    sinr = 10.0 * np.log10(signal / (interference + noise_mw))

    h, w = grid.height, grid.width
    sinr = sinr.reshape(h, w).astype(float)
    serving = serving.reshape(h, w).astype(int)
    sinr[grid.indoor_mask] = np.nan
    serving[grid.indoor_mask] = -1
    return SinrMap(grid, stations, sinr, serving, env.origin)


@dataclass
class CoverageReport:
    """Compliance fractions over outdoor cells, computed on exact counts."""

    pl_threshold_db: float
    sinr_threshold_db: float
    outdoor_cells: int
    pl_compliant_cells: int
    sinr_compliant_cells: int

    @property
    def pl_compliant_fraction(self) -> Fraction:
        return Fraction(self.pl_compliant_cells, self.outdoor_cells)

    @property
    def sinr_compliant_fraction(self) -> Fraction:
        return Fraction(self.sinr_compliant_cells, self.outdoor_cells)

    def to_dict(self) -> dict:
        return {
            "pl_threshold_db": self.pl_threshold_db,
            "sinr_threshold_db": self.sinr_threshold_db,
            "outdoor_cells": self.outdoor_cells,
            "pl_compliant_cells": self.pl_compliant_cells,
            "sinr_compliant_cells": self.sinr_compliant_cells,
            "pl_compliant_fraction": float(self.pl_compliant_fraction),
            "sinr_compliant_fraction": float(self.sinr_compliant_fraction),
        }


def coverage_stats(radio_map: RadioMap, sinr_map: SinrMap,
                   pl_threshold: float = DEFAULT_PL_THRESHOLD_DB,
                   sinr_threshold: float = DEFAULT_SINR_THRESHOLD_DB) -> CoverageReport:
    """Count compliant outdoor cells: PL at or below the loss threshold,
    SINR strictly above the ratio threshold."""
    if radio_map.grid is not sinr_map.grid and (
            radio_map.grid.width != sinr_map.grid.width
            or radio_map.grid.height != sinr_map.grid.height):
        raise ValueError("radio map and SINR map use different grids")
    outdoor = ~radio_map.grid.indoor_mask
    total = int(outdoor.sum())
    if total == 0:
        raise ValueError("grid has no outdoor cells")
    pl_ok = int((radio_map.best_path_loss[outdoor] <= pl_threshold).sum())
    sinr_ok = int((sinr_map.sinr_db[outdoor] > sinr_threshold).sum())
    return CoverageReport(pl_threshold, sinr_threshold, total, pl_ok, sinr_ok)
