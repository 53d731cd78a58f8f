"""OpenStreetMap acquisition and parsing, plus the local metric frame.

Geographic input is an OSM XML v0.6 subset (node, way, tag elements;
relations are skipped).  All downstream geometry lives in a local
east/north frame in meters, obtained by an equirectangular projection
about the center of the requested bounding box.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

log = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0


class TransportError(RuntimeError):
    """An OSM document could not be retrieved."""


class OsmParseError(ValueError):
    """A document is not usable OSM XML."""


@dataclass(frozen=True)
class GeoBBox:
    """WGS84 bounding box in degrees."""

    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float

    def __post_init__(self) -> None:
        if not (-90.0 <= self.min_lat < self.max_lat <= 90.0):
            raise ValueError(f"invalid latitude range [{self.min_lat}, {self.max_lat}]")
        if not (-180.0 <= self.min_lon < self.max_lon <= 180.0):
            raise ValueError(f"invalid longitude range [{self.min_lon}, {self.max_lon}]")

    @property
    def center(self) -> tuple[float, float]:
        return ((self.min_lat + self.max_lat) / 2.0, (self.min_lon + self.max_lon) / 2.0)

    def key(self) -> str:
        """Canonical string used for cache file names and fixture lookup."""
        return (f"{self.min_lat:.6f}_{self.min_lon:.6f}"
                f"_{self.max_lat:.6f}_{self.max_lon:.6f}")

    def to_dict(self) -> dict:
        return {"min_lat": self.min_lat, "min_lon": self.min_lon,
                "max_lat": self.max_lat, "max_lon": self.max_lon}

    @classmethod
    def from_dict(cls, d: dict) -> "GeoBBox":
        return cls(d["min_lat"], d["min_lon"], d["max_lat"], d["max_lon"])


@dataclass(frozen=True)
class LocalPoint:
    """Meters east (x) and north (y) of the projection origin."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite local point ({self.x}, {self.y})")

    def distance_to(self, other: "LocalPoint") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass
class OsmData:
    """Parsed nodes and ways of one OSM document.

    Node coordinates stay in degrees; projection happens when the
    environment model is built.
    """

    nodes: dict[int, tuple[float, float]] = field(default_factory=dict)
    ways: dict[int, tuple[list[int], dict[str, str]]] = field(default_factory=dict)
    declared_bounds: GeoBBox | None = None

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def way_count(self) -> int:
        return len(self.ways)


class MapTransport(Protocol):
    """Pluggable fetcher for raw OSM documents."""

    def fetch(self, bbox: GeoBBox) -> bytes: ...


class HttpMapTransport:
    """Downloads an extract from an OSM-API compatible endpoint."""

    DEFAULT_URL = "https://api.openstreetmap.org/api/0.6/map"

    def __init__(self, url: str = DEFAULT_URL, timeout_s: float = 60.0):
        self.url = url
        self.timeout_s = timeout_s

    def fetch(self, bbox: GeoBBox) -> bytes:
        import requests

        params = {"bbox": f"{bbox.min_lon},{bbox.min_lat},{bbox.max_lon},{bbox.max_lat}"}
        try:
            resp = requests.get(self.url, params=params, timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise TransportError(f"OSM download failed: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(
                f"OSM endpoint returned HTTP {resp.status_code}: {resp.text[:200]}")
        return resp.content


class FixtureTransport:
    """Serves documents from a directory of ``<bbox-key>.osm`` files."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def fetch(self, bbox: GeoBBox) -> bytes:
        path = self.root / f"{bbox.key()}.osm"
        if not path.exists():
            raise TransportError(f"no fixture for bbox {bbox.key()} under {self.root}")
        return path.read_bytes()


def _cache_path(cache_dir: Path, bbox: GeoBBox) -> Path:
    digest = hashlib.sha256(bbox.key().encode("ascii")).hexdigest()[:16]
    return cache_dir / f"{digest}.osm"


def fetch_osm(bbox: GeoBBox, transport: MapTransport,
              cache_dir: str | Path | None = None) -> bytes:
    """Fetch the OSM document covering ``bbox``, caching it on disk.

    With a cache directory, repeated fetches of the same bbox hit the
    transport exactly once.  The cache write is atomic
    (write-temp-then-rename) so concurrent fetches are safe.
    """
    if cache_dir is not None:
        cache_dir = Path(cache_dir)
        path = _cache_path(cache_dir, bbox)
        if path.exists():
            log.debug("osm cache hit for %s", bbox.key())
            return path.read_bytes()

    document = transport.fetch(bbox)
    if b"<osm" not in document[:4096]:
        raise TransportError("transport returned a document without an <osm> root")

    if cache_dir is not None:
        cache_dir.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp.{os.getpid()}")
        tmp.write_bytes(document)
        os.replace(tmp, path)
    return document


def parse_osm(document: bytes) -> OsmData:
    """Parse an OSM XML document into nodes and ways.

    Ways referencing a node that is missing from the document (commonly
    clipped away at the bbox edge) are dropped with a warning rather than
    failing the parse.  Relations are ignored.
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        raise OsmParseError(f"not parseable as XML: {exc}") from exc
    if root.tag != "osm":
        raise OsmParseError(f"expected <osm> root element, got <{root.tag}>")

    data = OsmData()
    bounds_el = root.find("bounds")
    if bounds_el is not None:
        try:
            data.declared_bounds = GeoBBox(
                float(bounds_el.get("minlat")), float(bounds_el.get("minlon")),
                float(bounds_el.get("maxlat")), float(bounds_el.get("maxlon")))
        except (TypeError, ValueError):
            data.declared_bounds = None

    for node in root.iter("node"):
        data.nodes[int(node.get("id"))] = (float(node.get("lat")), float(node.get("lon")))

    for way in root.iter("way"):
        way_id = int(way.get("id"))
        refs = [int(nd.get("ref")) for nd in way.iter("nd")]
        if any(ref not in data.nodes for ref in refs):
            log.warning("dropping way %d: dangling node reference", way_id)
            continue
        tags = {tag.get("k"): tag.get("v") for tag in way.iter("tag")}
        data.ways[way_id] = (refs, tags)
    return data


def project(lat: float, lon: float, origin: GeoBBox) -> LocalPoint:
    """Equirectangular projection of a WGS84 point about the bbox center.

    x = R * rad(lon - lon0) * cos(rad(lat0)), y = R * rad(lat - lat0).
    Accurate to well under 0.1% over the few-km scenes this toolkit
    targets, and trivially invertible (see :func:`unproject`).
    """
    lat0, lon0 = origin.center
    x = EARTH_RADIUS_M * math.radians(lon - lon0) * math.cos(math.radians(lat0))
    y = EARTH_RADIUS_M * math.radians(lat - lat0)
    return LocalPoint(x, y)


def unproject(point: LocalPoint, origin: GeoBBox) -> tuple[float, float]:
    """Inverse of :func:`project`; returns (lat, lon) in degrees."""
    lat0, lon0 = origin.center
    lat = lat0 + math.degrees(point.y / EARTH_RADIUS_M)
    lon = lon0 + math.degrees(point.x / (EARTH_RADIUS_M * math.cos(math.radians(lat0))))
    return lat, lon
