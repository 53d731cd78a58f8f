"""Grid JSON payloads and PNG heatmaps for radio and SINR maps.

The color ramp is part of the wire contract: web clients rendering grid
JSON client-side use the same table, so exported PNGs and in-browser
heatmaps agree.  Low values are blue, high values purple; cells without
data (indoor) are neutral gray.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image

from .geodata import unproject
from .propagation import RadioMap
from .sinr import SinrMap

# (position in [0, 1], (r, g, b)) stops, linearly interpolated.
COLOR_RAMP: tuple[tuple[float, tuple[int, int, int]], ...] = (
    (0.00, (25, 60, 255)),     # blue
    (0.20, (0, 200, 220)),     # teal
    (0.40, (0, 210, 80)),      # green
    (0.60, (240, 220, 0)),     # yellow
    (0.80, (255, 80, 0)),      # orange-red
    (1.00, (160, 0, 200)),     # purple
)
NODATA_RGB = (128, 128, 128)


def ramp_color(t: float) -> tuple[int, int, int]:
    """Interpolate the shared ramp at t in [0, 1] (clipped)."""
    t = min(1.0, max(0.0, t))
    for (t0, c0), (t1, c1) in zip(COLOR_RAMP, COLOR_RAMP[1:]):
        if t <= t1:
            f = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            return tuple(round(a + f * (b - a)) for a, b in zip(c0, c1))
    return COLOR_RAMP[-1][1]


def _grid_payload(values: np.ndarray, serving_idx: np.ndarray, stations,
                  grid, origin, kind: str) -> dict:
    origin_lat, origin_lon = unproject(grid.min_corner, origin)
    flat_vals = values.reshape(-1)
    flat_serv = serving_idx.reshape(-1)
    ids = [s.id for s in stations]
    return {
        "kind": kind,
        "origin_lat": origin_lat,
        "origin_lon": origin_lon,
        "resolution_m": grid.resolution,
        "width": grid.width,
        "height": grid.height,
        "nodata": None,
        "values": [None if math.isnan(v) else round(float(v), 4) for v in flat_vals],
        "serving": [None if s < 0 else ids[s] for s in flat_serv],
    }


def radio_map_payload(radio_map: RadioMap) -> dict:
    return _grid_payload(radio_map.best_path_loss, radio_map.serving_idx,
                         radio_map.stations, radio_map.grid, radio_map.origin,
                         kind="path_loss_db")


def sinr_map_payload(sinr_map: SinrMap) -> dict:
    return _grid_payload(sinr_map.sinr_db, sinr_map.serving_idx,
                         sinr_map.stations, sinr_map.grid, sinr_map.origin,
                         kind="sinr_db")


def heatmap_image(values: np.ndarray, vmin: float | None = None,
                  vmax: float | None = None, cell_px: int = 4) -> Image.Image:
    """Render a (height, width) value array to an RGB image.

    Row 0 is the southern edge of the grid, so the array is flipped
    vertically to put north at the top of the image.  NaN cells render
    gray.
    """
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        vmin, vmax = 0.0, 1.0
    else:
        vmin = float(finite.min()) if vmin is None else vmin
        vmax = float(finite.max()) if vmax is None else vmax
    span = vmax - vmin if vmax > vmin else 1.0

    h, w = values.shape
    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    for r in range(h):
        for c in range(w):
            v = values[r, c]
            rgb[r, c] = NODATA_RGB if not np.isfinite(v) else ramp_color((v - vmin) / span)
    rgb = rgb[::-1]  # north up
    img = Image.fromarray(rgb, mode="RGB")
    if cell_px > 1:
        img = img.resize((w * cell_px, h * cell_px), Image.NEAREST)
    return img


def heatmap_png_bytes(values: np.ndarray, vmin: float | None = None,
                      vmax: float | None = None, cell_px: int = 4) -> bytes:
    import io

    buf = io.BytesIO()
    heatmap_image(values, vmin, vmax, cell_px).save(buf, format="PNG")
    return buf.getvalue()


def save_heatmap_png(values: np.ndarray, path: str | Path,
                     vmin: float | None = None, vmax: float | None = None,
                     cell_px: int = 4) -> None:
    from .jsonio import write_bytes_atomic

    write_bytes_atomic(path, heatmap_png_bytes(values, vmin, vmax, cell_px))
