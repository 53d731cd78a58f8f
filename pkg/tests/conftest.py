import math
from pathlib import Path

import pytest

from radioplan.geodata import GeoBBox, LocalPoint
from radioplan.scene import Building, EnvironmentModel, create_grid

FIXTURES = Path(__file__).parent / "fixtures"

# Any small valid bbox works as a frame origin for hand-built scenes.
FRAME = GeoBBox(22.59, 113.96, 22.60, 113.97)


def rect_building(cx: float, cy: float, w: float, h: float, height: float = 10.0) -> Building:
    return Building([LocalPoint(cx - w / 2, cy - h / 2),
                     LocalPoint(cx + w / 2, cy - h / 2),
                     LocalPoint(cx + w / 2, cy + h / 2),
                     LocalPoint(cx - w / 2, cy + h / 2)], height)


def make_env(size_x: float, size_y: float,
             buildings: list[Building] | None = None) -> EnvironmentModel:
    """Hand-built scene with bounds [0, size_x] x [0, size_y]."""
    return EnvironmentModel(buildings=list(buildings or []), roads=[],
                            green_areas=[], bounds=(0.0, 0.0, size_x, size_y),
                            origin=FRAME)


@pytest.fixture
def open_env_100():
    return make_env(100.0, 100.0)


@pytest.fixture
def grid_100(open_env_100):
    return create_grid(open_env_100, resolution=5.0)


@pytest.fixture
def hitsz_doc() -> bytes:
    return (FIXTURES / "hitsz_campus.osm").read_bytes()
