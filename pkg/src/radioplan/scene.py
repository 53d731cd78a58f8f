"""Outdoor environment model and the simulation grid laid over it.

Buildings, roads, and green areas come from tagged OSM ways.  The grid is
a regular cell lattice tiling the scene bounds; each cell is classified
indoor/outdoor by whether its center falls inside a building footprint.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geodata import GeoBBox, LocalPoint, OsmData, project

log = logging.getLogger(__name__)

METERS_PER_LEVEL = 3.0
DEFAULT_BUILDING_HEIGHT_M = 10.0

GREEN_TAGS = (("leisure", "park"), ("landuse", "grass"), ("landuse", "forest"))


class EmptySceneError(ValueError):
    """The parsed area contains no buildings, roads, or green areas."""


def polygon_area(points: list[tuple[float, float]]) -> float:
    """Signed shoelace area; positive for counterclockwise rings."""
    area = 0.0
    n = len(points)
    for i in range(n):
        x1, y1 = points[i]
        x2, y2 = points[(i + 1) % n]
        area += x1 * y2 - x2 * y1
    return area / 2.0


def _segments_properly_cross(p1, p2, q1, q2) -> bool:
    # Strict straddle test: shared endpoints and touches do not count.
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    return (o1 * o2 < 0.0) and (o3 * o4 < 0.0)


def is_simple_polygon(points: list[tuple[float, float]]) -> bool:
    """True if no two non-adjacent edges of the closed ring cross."""
    n = len(points)
    if n < 3:
        return False
    edges = [(points[i], points[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or j == (i + 1) % n or (j + 1) % n == i:
                continue  # adjacent edges share a vertex
            if _segments_properly_cross(*edges[i], *edges[j]):
                return False
    return True


@dataclass
class Building:
    """Closed footprint (first vertex not repeated) with a height."""

    footprint: list[LocalPoint]
    height: float

    def __post_init__(self) -> None:
        if len(self.footprint) < 3:
            raise ValueError("building footprint needs at least 3 vertices")
        if self.height <= 0:
            raise ValueError(f"building height must be positive, got {self.height}")
        ring = [(p.x, p.y) for p in self.footprint]
        if abs(polygon_area(ring)) <= 0.0:
            raise ValueError("building footprint has zero area")
        if not is_simple_polygon(ring):
            raise ValueError("building footprint is self-intersecting")

    def ring(self) -> np.ndarray:
        """Footprint as an (n, 2) array, first vertex not repeated."""
        return np.array([(p.x, p.y) for p in self.footprint], dtype=float)


@dataclass
class EnvironmentModel:
    """Buildings, roads, and green areas in the local metric frame."""

    buildings: list[Building]
    roads: list[list[LocalPoint]]
    green_areas: list[list[LocalPoint]]
    bounds: tuple[float, float, float, float]  # (min_x, min_y, max_x, max_y)
    origin: GeoBBox

    def building_edges(self) -> np.ndarray:
        """All building wall segments as an (n_edges, 4) array of x1,y1,x2,y2."""
        segs = []
        for b in self.buildings:
            ring = b.ring()
            nxt = np.roll(ring, -1, axis=0)
            segs.append(np.hstack([ring, nxt]))
        if not segs:
            return np.zeros((0, 4), dtype=float)
        return np.vstack(segs)


@dataclass
class SimulationGrid:
    """Regular cell lattice over the environment bounds.

    Cell (i, j) has its center at origin_corner + ((i + 1/2), (j + 1/2)) *
    resolution, with i counting columns (east) and j rows (north).  The
    indoor mask is True where a cell center lies inside any building.
    """

    origin_cell_center: LocalPoint
    resolution: float
    width: int
    height: int
    indoor_mask: np.ndarray  # bool, shape (height, width)

    def __post_init__(self) -> None:
        if self.resolution <= 0:
            raise ValueError("grid resolution must be positive")
        if self.width * self.height < 1:
            raise ValueError("grid must contain at least one cell")
        if self.indoor_mask.shape != (self.height, self.width):
            raise ValueError("indoor mask shape does not match grid dimensions")

    @property
    def min_corner(self) -> LocalPoint:
        return LocalPoint(self.origin_cell_center.x - self.resolution / 2.0,
                          self.origin_cell_center.y - self.resolution / 2.0)

    def cell_centers(self) -> np.ndarray:
        """Centers as a (height, width, 2) array of x, y."""
        xs = self.min_corner.x + (np.arange(self.width) + 0.5) * self.resolution
        ys = self.min_corner.y + (np.arange(self.height) + 0.5) * self.resolution
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx, gy], axis=-1)

    def outdoor_count(self) -> int:
        return int((~self.indoor_mask).sum())


def _way_points(osm: OsmData, refs: list[int], origin: GeoBBox) -> list[LocalPoint]:
    return [project(*osm.nodes[r], origin) for r in refs]


def _building_height(tags: dict[str, str]) -> float:
    raw = tags.get("height")
    if raw is not None:
        try:
            return float(raw.split()[0])
        except ValueError:
            pass
    levels = tags.get("building:levels")
    if levels is not None:
        try:
            return float(levels) * METERS_PER_LEVEL
        except ValueError:
            pass
    return DEFAULT_BUILDING_HEIGHT_M


def _nodes_bbox(osm: OsmData) -> GeoBBox:
    lats = [lat for lat, _ in osm.nodes.values()]
    lons = [lon for _, lon in osm.nodes.values()]
    # Pad degenerate extents so the bbox invariants hold.
    eps = 1e-5
    return GeoBBox(min(lats) - eps, min(lons) - eps, max(lats) + eps, max(lons) + eps)


def build_environment(osm: OsmData) -> EnvironmentModel:
    """Build the outdoor environment from parsed OSM data.

    Closed ways tagged ``building=*`` become buildings; ``highway=*`` ways
    become roads; park/grass/forest ways become green areas.  Heights use
    the numeric ``height`` tag when present, else ``building:levels`` times
    3 m, else a 10 m default.
    """
    if not osm.nodes:
        raise EmptySceneError("document contains no nodes")
    origin = osm.declared_bounds or _nodes_bbox(osm)

    buildings: list[Building] = []
    roads: list[list[LocalPoint]] = []
    greens: list[list[LocalPoint]] = []

    for way_id, (refs, tags) in osm.ways.items():
        closed = len(refs) >= 4 and refs[0] == refs[-1]
        if "building" in tags and closed:
            points = _way_points(osm, refs[:-1], origin)
            try:
                buildings.append(Building(points, _building_height(tags)))
            except ValueError as exc:
                log.warning("dropping degenerate building way %d: %s", way_id, exc)
        elif "highway" in tags:
            roads.append(_way_points(osm, refs, origin))
        elif any(tags.get(k) == v for k, v in GREEN_TAGS):
            ring = refs[:-1] if closed else refs
            greens.append(_way_points(osm, ring, origin))

    if not buildings and not roads and not greens:
        raise EmptySceneError("no buildings, roads, or green areas found; "
                              "is the bounding box correct?")

    xs, ys = [], []
    for b in buildings:
        xs.extend(p.x for p in b.footprint)
        ys.extend(p.y for p in b.footprint)
    for line in roads + greens:
        xs.extend(p.x for p in line)
        ys.extend(p.y for p in line)
    for lat, lon in ((origin.min_lat, origin.min_lon), (origin.max_lat, origin.max_lon)):
        corner = project(lat, lon, origin)
        xs.append(corner.x)
        ys.append(corner.y)
    bounds = (min(xs), min(ys), max(xs), max(ys))
    return EnvironmentModel(buildings, roads, greens, bounds, origin)


def points_in_polygon(points: np.ndarray, ring: np.ndarray) -> np.ndarray:
    """Even-odd crossing test for an (n, 2) point array against one ring."""
    x, y = points[:, 0], points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at_y = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < x_at_y)
    return inside


def create_grid(env: EnvironmentModel, resolution: float = 5.0) -> SimulationGrid:
    """Lay the simulation grid over the environment bounds.

    Cell counts are ceil(extent / resolution) per axis, so the tiled grid
    rectangle covers the scene bounds (the last row/column may extend past
    them when the extent is not a multiple of the resolution).
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    min_x, min_y, max_x, max_y = env.bounds
    extent_x, extent_y = max_x - min_x, max_y - min_y
    if extent_x <= 0 or extent_y <= 0:
        raise ValueError("environment bounds are degenerate")
    if resolution > extent_x or resolution > extent_y:
        raise ValueError(f"resolution {resolution} m exceeds scene extent "
                         f"({extent_x:.1f} x {extent_y:.1f} m)")

    width = math.ceil(extent_x / resolution)
    height = math.ceil(extent_y / resolution)
    origin_center = LocalPoint(min_x + resolution / 2.0, min_y + resolution / 2.0)

    grid = SimulationGrid(origin_center, resolution, width, height,
                          indoor_mask=np.zeros((height, width), dtype=bool))
    centers = grid.cell_centers().reshape(-1, 2)
    mask = np.zeros(len(centers), dtype=bool)
    for b in env.buildings:
        mask |= points_in_polygon(centers, b.ring())
    grid.indoor_mask = mask.reshape(height, width)
    return grid


SCENE_SCHEMA_VERSION = 1


def environment_to_dict(env: EnvironmentModel) -> dict:
    return {
        "version": SCENE_SCHEMA_VERSION,
        "origin": env.origin.to_dict(),
        "bounds": {"min_x": env.bounds[0], "min_y": env.bounds[1],
                   "max_x": env.bounds[2], "max_y": env.bounds[3]},
        "buildings": [{"footprint": [[p.x, p.y] for p in b.footprint],
                       "height_m": b.height} for b in env.buildings],
        "roads": [[[p.x, p.y] for p in line] for line in env.roads],
        "green_areas": [[[p.x, p.y] for p in ring] for ring in env.green_areas],
    }


def environment_from_dict(doc: dict) -> EnvironmentModel:
    version = doc.get("version")
    if version != SCENE_SCHEMA_VERSION:
        raise ValueError(f"unsupported scene schema version {version!r}")
    origin = GeoBBox.from_dict(doc["origin"])
    buildings = [Building([LocalPoint(x, y) for x, y in b["footprint"]], b["height_m"])
                 for b in doc["buildings"]]
    roads = [[LocalPoint(x, y) for x, y in line] for line in doc["roads"]]
    greens = [[LocalPoint(x, y) for x, y in ring] for ring in doc["green_areas"]]
    bounds = (doc["bounds"]["min_x"], doc["bounds"]["min_y"],
              doc["bounds"]["max_x"], doc["bounds"]["max_y"])
    return EnvironmentModel(buildings, roads, greens, bounds, origin)


def save_environment(env: EnvironmentModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(environment_to_dict(env), indent=2, sort_keys=True))


def load_environment(path: str | Path) -> EnvironmentModel:
    return environment_from_dict(json.loads(Path(path).read_text()))
