"""Path-loss model and radio-map assembly.

Effective loss from a station to a cell is free-space path loss over the
3D distance, plus a fixed per-wall penalty for every building boundary the
2D transmitter-to-cell segment crosses, minus the sector antenna gain in
the cell's direction.  This is an open, documented stand-in for
ray-traced prediction: buildings dominate the loss structure in dense
scenes while open areas stay close to line-of-sight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geodata import GeoBBox, LocalPoint
from .scene import EnvironmentModel, SimulationGrid, points_in_polygon

SPEED_OF_LIGHT_M_S = 299_792_458.0
# 20*log10(4*pi/c); about -147.55 dB
FSPL_CONSTANT_DB = 20.0 * math.log10(4.0 * math.pi / SPEED_OF_LIGHT_M_S)
MIN_DISTANCE_M = 1.0
RX_HEIGHT_M = 1.5
WALL_LOSS_DB = 10.0


@dataclass(frozen=True)
class BaseStation:
    """A sector site with position and radio parameters."""

    id: str
    position: LocalPoint
    mast_height: float = 2.4          # m
    tx_power: float = 30.0            # dBm (1 W)
    azimuth: float = 0.0              # degrees clockwise from north
    down_tilt: float = 0.0            # degrees below horizontal
    frequency: float = 5e9            # Hz
    bandwidth: float = 80e6           # Hz

    def __post_init__(self) -> None:
        if not math.isfinite(self.tx_power):
            raise ValueError("tx_power must be finite")
        if not 0.0 <= self.azimuth < 360.0:
            raise ValueError(f"azimuth must be in [0, 360), got {self.azimuth}")
        if not 0.0 <= self.down_tilt <= 90.0:
            raise ValueError(f"down_tilt must be in [0, 90], got {self.down_tilt}")
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")

    def to_dict(self) -> dict:
        return {"id": self.id, "x_m": self.position.x, "y_m": self.position.y,
                "mast_height_m": self.mast_height, "tx_power_dbm": self.tx_power,
                "azimuth_deg": self.azimuth, "down_tilt_deg": self.down_tilt,
                "frequency_hz": self.frequency, "bandwidth_hz": self.bandwidth}

    @classmethod
    def from_dict(cls, d: dict) -> "BaseStation":
        return cls(id=str(d["id"]), position=LocalPoint(d["x_m"], d["y_m"]),
                   mast_height=d.get("mast_height_m", 2.4),
                   tx_power=d.get("tx_power_dbm", 30.0),
                   azimuth=d.get("azimuth_deg", 0.0),
                   down_tilt=d.get("down_tilt_deg", 0.0),
                   frequency=d.get("frequency_hz", 5e9),
                   bandwidth=d.get("bandwidth_hz", 80e6))


@dataclass(frozen=True)
class AntennaPattern:
    """Parabolic sector pattern with independent azimuth/elevation clamps."""

    theta_3db_az: float = 65.0        # degrees
    theta_3db_el: float = 10.0        # degrees
    max_attenuation: float = 20.0     # dB
    boresight_gain: float = 8.0       # dBi

    def __post_init__(self) -> None:
        if not 0.0 < self.theta_3db_az <= 180.0:
            raise ValueError("theta_3db_az must be in (0, 180]")
        if not 0.0 < self.theta_3db_el <= 180.0:
            raise ValueError("theta_3db_el must be in (0, 180]")
        if self.max_attenuation < 0:
            raise ValueError("max_attenuation must be non-negative")


def wrap_angle(deg):
    """Normalize an angle in degrees to (-180, 180]. Works on arrays."""
    wrapped = -((-np.asarray(deg) + 180.0) % 360.0 - 180.0)
    return wrapped if wrapped.ndim else float(wrapped)


def fspl(distance: float, frequency: float):
    """Free-space path loss 20*log10(4*pi*d*f/c) in dB.

    Distances below 1 m are clamped to avoid the singularity at the mast.
    Accepts scalars or arrays.
    """
    d = np.maximum(np.asarray(distance, dtype=float), MIN_DISTANCE_M)
    loss = 20.0 * np.log10(d) + 20.0 * np.log10(frequency) + FSPL_CONSTANT_DB
    return loss if loss.ndim else float(loss)


def antenna_gain(pattern: AntennaPattern, az_offset, el_offset):
    """Relative gain in dB at the given boresight offsets (degrees).

    gain = boresight - min(12*(az/theta_az)^2, A_m) - min(12*(el/theta_el)^2, A_m)
    so an offset of half the 3 dB beamwidth costs exactly 3 dB.
    Accepts scalars or arrays.
    """
    az = np.asarray(az_offset, dtype=float)
    el = np.asarray(el_offset, dtype=float)
    a_az = np.minimum(12.0 * (az / pattern.theta_3db_az) ** 2, pattern.max_attenuation)
    a_el = np.minimum(12.0 * (el / pattern.theta_3db_el) ** 2, pattern.max_attenuation)
    gain = pattern.boresight_gain - a_az - a_el
    return gain if gain.ndim else float(gain)


def count_wall_crossings(p1: LocalPoint, p2: LocalPoint, edges: np.ndarray) -> int:
    """Number of building wall segments properly crossed by p1->p2.

    ``edges`` is the (n, 4) array from EnvironmentModel.building_edges().
    Each crossed polygon edge counts once, so passing through a building
    counts its entry and exit walls separately.
    """
    if len(edges) == 0:
        return 0
    counts = _crossing_matrix(np.array([[p1.x, p1.y]]), np.array([p2.x, p2.y]), edges)
    return int(counts[0])


def _crossing_matrix(targets: np.ndarray, source: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Wall-crossing counts for segments source -> targets[i].

    targets: (n, 2); source: (2,); edges: (m, 4). Returns (n,) int array.
    Uses the strict-straddle orientation test, matching the scalar
    geometry in :mod:`radioplan.scene`.
    """
    if len(edges) == 0:
        return np.zeros(len(targets), dtype=int)
    sx, sy = source
    tx, ty = targets[:, 0:1], targets[:, 1:2]          # (n, 1)
    x1, y1 = edges[:, 0], edges[:, 1]                  # (m,)
    x2, y2 = edges[:, 2], edges[:, 3]

    # orient(source, target, edge endpoints)
    dx_st, dy_st = tx - sx, ty - sy                    # (n, 1)
    o1 = dx_st * (y1 - sy) - dy_st * (x1 - sx)         # (n, m)
    o2 = dx_st * (y2 - sy) - dy_st * (x2 - sx)
    # orient(edge start, edge end, source/target)
    dx_e, dy_e = x2 - x1, y2 - y1                      # (m,)
    o3 = dx_e * (sy - y1) - dy_e * (sx - x1)           # (m,)
    o4 = dx_e * (ty - y1) - dy_e * (tx - x1)           # (n, m)
    crosses = (o1 * o2 < 0.0) & (o3 * o4 < 0.0)
    return crosses.sum(axis=1).astype(int)


def _offsets_toward(bs: BaseStation, targets: np.ndarray, rx_height: float):
    """Azimuth/elevation boresight offsets (deg) and 3D distance (m) to targets."""
    dx = targets[:, 0] - bs.position.x
    dy = targets[:, 1] - bs.position.y
    d2d = np.sqrt(dx * dx + dy * dy)
    dz = bs.mast_height - rx_height
    d3d = np.sqrt(d2d * d2d + dz * dz)
    bearing = np.degrees(np.arctan2(dx, dy))           # clockwise from north
    az_off = wrap_angle(bearing - bs.azimuth)
    depression = np.degrees(np.arctan2(dz, d2d))
    el_off = wrap_angle(depression - bs.down_tilt)
    return az_off, el_off, d3d


def station_path_loss_field(bs: BaseStation, targets: np.ndarray,
                            edges: np.ndarray, pattern: AntennaPattern,
                            wall_loss_db: float = WALL_LOSS_DB,
                            rx_height: float = RX_HEIGHT_M) -> np.ndarray:
    """Effective path loss (dB) from one station to each target point."""
    az_off, el_off, d3d = _offsets_toward(bs, targets, rx_height)
    walls = _crossing_matrix(targets, np.array([bs.position.x, bs.position.y]), edges)
    return (fspl(d3d, bs.frequency) + wall_loss_db * walls
            - antenna_gain(pattern, az_off, el_off))


def path_loss(bs: BaseStation, cell_center: LocalPoint, env: EnvironmentModel,
              pattern: AntennaPattern, wall_loss_db: float = WALL_LOSS_DB,
              rx_height: float = RX_HEIGHT_M) -> float:
    """Effective path loss (dB) from a station to one outdoor cell center."""
    point = np.array([[cell_center.x, cell_center.y]])
    for b in env.buildings:
        if points_in_polygon(point, b.ring())[0]:
            raise ValueError("cell center is indoor; path loss is only "
                             "defined for outdoor cells")
    return float(station_path_loss_field(bs, point, env.building_edges(), pattern,
                                         wall_loss_db, rx_height)[0])


@dataclass
class RadioMap:
    """Per-cell best path loss and serving station over a grid.

    ``best_path_loss`` holds NaN and ``serving_idx`` -1 for indoor cells.
    Stations are kept sorted by id; ties in received power resolve to the
    lowest station id.
    """

    grid: SimulationGrid
    stations: list[BaseStation]
    best_path_loss: np.ndarray   # float (height, width), NaN indoor
    serving_idx: np.ndarray      # int (height, width), -1 indoor
    origin: GeoBBox

    def serving_id(self, row: int, col: int) -> str | None:
        idx = int(self.serving_idx[row, col])
        return None if idx < 0 else self.stations[idx].id


def _sorted_stations(stations: list[BaseStation]) -> list[BaseStation]:
    ids = [s.id for s in stations]
    if len(set(ids)) != len(ids):
        raise ValueError("station ids must be unique")
    return sorted(stations, key=lambda s: s.id)


def received_power_matrix(grid: SimulationGrid, stations: list[BaseStation],
                          env: EnvironmentModel, pattern: AntennaPattern,
                          wall_loss_db: float = WALL_LOSS_DB,
                          rx_height: float = RX_HEIGHT_M) -> tuple[list[BaseStation], np.ndarray]:
    """Received power (dBm) per station per cell, stations sorted by id.

    Returns (stations_sorted, matrix of shape (n_stations, height*width)).
    Indoor cells are computed like any other and masked by callers.
    """
    stations = _sorted_stations(stations)
    targets = grid.cell_centers().reshape(-1, 2)
    edges = env.building_edges()
    rows = [s.tx_power - station_path_loss_field(s, targets, edges, pattern,
                                                 wall_loss_db, rx_height)
            for s in stations]
    return stations, np.vstack(rows)


def generate_radio_map(grid: SimulationGrid, stations: list[BaseStation],
                       env: EnvironmentModel, pattern: AntennaPattern | None = None,
                       wall_loss_db: float = WALL_LOSS_DB,
                       rx_height: float = RX_HEIGHT_M) -> RadioMap:
    """Best path loss and serving station for every outdoor cell.

    The serving station maximizes received power (transmit power minus
    effective loss); best_path_loss is that station's loss.  Equal powers
    resolve deterministically to the lowest station id.
    """
    if not stations:
        raise ValueError("station list is empty")
    pattern = pattern or AntennaPattern()
    stations, rx_power = received_power_matrix(grid, stations, env, pattern,
                                               wall_loss_db, rx_height)
    serving = rx_power.argmax(axis=0)                       # first max = lowest id
    losses = np.array([s.tx_power for s in stations])[serving] - rx_power[serving, np.arange(rx_power.shape[1])]

    h, w = grid.height, grid.width
    best = losses.reshape(h, w).astype(float)
    serving = serving.reshape(h, w).astype(int)
    best[grid.indoor_mask] = np.nan
    serving[grid.indoor_mask] = -1
    return RadioMap(grid, stations, best, serving, env.origin)
