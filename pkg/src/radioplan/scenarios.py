"""Bundled synthetic scenarios for demos, tests, and offline agent runs.

Each scenario is a deterministic OSM XML document generated in a local
metric frame and unprojected to WGS84: a dense campus-like urban block
grid, a sparse suburban area, and a mostly open park.  The familiar site
names "HITSZ" and "Hyde Park" alias the urban and park scenes so the
canonical prompt sequences resolve without network access.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .geodata import GeoBBox, LocalPoint, unproject


@dataclass(frozen=True)
class Scenario:
    name: str
    bbox: GeoBBox
    description: str
    default_resolution_m: float = 5.0
    # Planning overrides suited to the scene's density; open scenes plan
    # with fewer stations so interference stays in check.
    max_stations: int = 10
    iteration_budget: int = 400

    def planning_overrides(self) -> dict:
        return {"max_stations": self.max_stations,
                "iteration_budget": self.iteration_budget}


def _bbox_around(lat: float, lon: float, half_x_m: float, half_y_m: float) -> GeoBBox:
    # Inverse-project the corners of a +-half extent about (lat, lon).
    probe = GeoBBox(lat - 0.01, lon - 0.01, lat + 0.01, lon + 0.01)
    max_lat, max_lon = unproject(LocalPoint(half_x_m, half_y_m), probe)
    min_lat, min_lon = unproject(LocalPoint(-half_x_m, -half_y_m), probe)
    return GeoBBox(min_lat, min_lon, max_lat, max_lon)


_URBAN = Scenario("synthetic-urban", _bbox_around(22.59, 113.97, 210.0, 210.0),
                  "dense campus-like block grid, around 50 buildings",
                  max_stations=10)
_SUBURBAN = Scenario("suburban", _bbox_around(22.70, 114.10, 260.0, 260.0),
                     "around 10 detached buildings with connecting roads",
                     max_stations=4)
_PARK = Scenario("open-park", _bbox_around(51.507, -0.165, 400.0, 400.0),
                 "open green area with at most a few pavilions",
                 default_resolution_m=10.0, max_stations=8)

SCENARIOS: dict[str, Scenario] = {s.name: s for s in (_URBAN, _SUBURBAN, _PARK)}

# Prompt-friendly aliases; the real sites' extracts are not bundled, so
# these resolve to synthetic stand-ins with comparable character.
AREA_ALIASES = {
    "hitsz": "synthetic-urban",
    "hyde park": "open-park",
}


def resolve_area(name: str) -> Scenario:
    key = name.strip().casefold()
    key = AREA_ALIASES.get(key, key)
    if key not in SCENARIOS:
        known = ", ".join(sorted(SCENARIOS) + sorted(AREA_ALIASES))
        raise KeyError(f"unknown area {name!r}; bundled areas: {known}")
    return SCENARIOS[key]


class _OsmDoc:
    """Tiny OSM XML writer over a local frame anchored at a bbox center."""

    def __init__(self, bbox: GeoBBox):
        self.bbox = bbox
        self.next_id = 1
        self.nodes: list[str] = []
        self.ways: list[str] = []

    def _node(self, x: float, y: float) -> int:
        lat, lon = unproject(LocalPoint(x, y), self.bbox)
        node_id = self.next_id
        self.next_id += 1
        self.nodes.append(
            f'  <node id="{node_id}" lat="{lat:.7f}" lon="{lon:.7f}"/>')
        return node_id

    def add_way(self, points: list[tuple[float, float]], tags: dict[str, str],
                closed: bool = False) -> None:
        refs = [self._node(x, y) for x, y in points]
        if closed:
            refs.append(refs[0])
        way_id = self.next_id
        self.next_id += 1
        nds = "\n".join(f'    <nd ref="{r}"/>' for r in refs)
        tag_lines = "\n".join(f'    <tag k="{k}" v="{v}"/>' for k, v in tags.items())
        body = nds + ("\n" + tag_lines if tag_lines else "")
        self.ways.append(f'  <way id="{way_id}">\n{body}\n  </way>')

    def add_rect(self, cx: float, cy: float, w: float, h: float,
                 tags: dict[str, str]) -> None:
        self.add_way([(cx - w / 2, cy - h / 2), (cx + w / 2, cy - h / 2),
                      (cx + w / 2, cy + h / 2), (cx - w / 2, cy + h / 2)],
                     tags, closed=True)

    def to_bytes(self) -> bytes:
        b = self.bbox
        lines = ['<?xml version="1.0" encoding="UTF-8"?>',
                 '<osm version="0.6" generator="radioplan-scenarios">',
                 f'  <bounds minlat="{b.min_lat:.7f}" minlon="{b.min_lon:.7f}"'
                 f' maxlat="{b.max_lat:.7f}" maxlon="{b.max_lon:.7f}"/>']
        lines.extend(self.nodes)
        lines.extend(self.ways)
        lines.append("</osm>")
        return "\n".join(lines).encode("utf-8")


def _urban_document() -> bytes:
    doc = _OsmDoc(_URBAN.bbox)
    rng = random.Random(91)
    # 7x7 block grid with one building per block, a few blocks left open.
    open_blocks = {(1, 4), (3, 3), (5, 1)}
    for bi in range(7):
        for bj in range(7):
            if (bi, bj) in open_blocks:
                continue
            cx = -180.0 + bi * 60.0 + rng.uniform(-6.0, 6.0)
            cy = -180.0 + bj * 60.0 + rng.uniform(-6.0, 6.0)
            w = rng.uniform(22.0, 38.0)
            h = rng.uniform(22.0, 38.0)
            style = rng.random()
            if style < 0.4:
                tags = {"building": "yes", "height": f"{rng.randint(12, 40)}"}
            elif style < 0.8:
                tags = {"building": "apartments",
                        "building:levels": f"{rng.randint(3, 12)}"}
            else:
                tags = {"building": "yes"}
            doc.add_rect(cx, cy, w, h, tags)
    for k in range(-2, 3):
        y = k * 90.0 + 30.0
        doc.add_way([(-205.0, y), (205.0, y)], {"highway": "residential"})
    doc.add_way([(-30.0, -205.0), (-30.0, 205.0)], {"highway": "primary"})
    doc.add_rect(120.0, -150.0, 50.0, 40.0, {"leisure": "park"})
    return doc.to_bytes()


def _suburban_document() -> bytes:
    doc = _OsmDoc(_SUBURBAN.bbox)
    rng = random.Random(17)
    for k in range(10):
        cx = rng.uniform(-200.0, 200.0)
        cy = rng.uniform(-200.0, 200.0)
        tags = ({"building": "house", "building:levels": f"{rng.randint(1, 3)}"}
                if k % 2 else {"building": "yes", "height": f"{rng.randint(6, 15)}"})
        doc.add_rect(cx, cy, rng.uniform(15.0, 30.0), rng.uniform(12.0, 25.0), tags)
    doc.add_way([(-250.0, 0.0), (250.0, 0.0)], {"highway": "secondary"})
    doc.add_way([(0.0, -250.0), (0.0, 250.0)], {"highway": "residential"})
    doc.add_rect(-140.0, 150.0, 80.0, 60.0, {"landuse": "grass"})
    return doc.to_bytes()


def _park_document() -> bytes:
    doc = _OsmDoc(_PARK.bbox)
    doc.add_way([(-390.0, -390.0), (390.0, -390.0), (390.0, 390.0),
                 (-390.0, 390.0)], {"leisure": "park"}, closed=True)
    doc.add_rect(-180.0, 120.0, 25.0, 18.0, {"building": "yes", "height": "6"})
    doc.add_rect(210.0, -230.0, 20.0, 20.0, {"building": "yes", "height": "5"})
    doc.add_way([(-390.0, 0.0), (390.0, 0.0)], {"highway": "footway"})
    return doc.to_bytes()


_BUILDERS = {
    "synthetic-urban": _urban_document,
    "suburban": _suburban_document,
    "open-park": _park_document,
}


def scenario_document(name: str) -> bytes:
    """Deterministic OSM XML bytes for a bundled scenario."""
    scenario = resolve_area(name)
    return _BUILDERS[scenario.name]()


class ScenarioTransport:
    """MapTransport serving the bundled scenario documents by bbox."""

    def fetch(self, bbox: GeoBBox) -> bytes:
        for scenario in SCENARIOS.values():
            if scenario.bbox.key() == bbox.key():
                return scenario_document(scenario.name)
        from .geodata import TransportError

        raise TransportError(f"bbox {bbox.key()} does not match a bundled scenario")
