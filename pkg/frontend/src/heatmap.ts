/**
 * Pure grid-JSON heatmap rasterization.
 *
 * Rendering is a pure function of the payload: the same grid always
 * produces the same RGBA buffer.  Row 0 of the payload is the southern
 * edge, so rows are flipped to put north at the top of the raster.
 */

import { NODATA_RGB, rampColor } from './colormap';
import type { GridPayload } from './types';

export interface Raster {
  width: number;
  height: number;
  /** RGBA, row-major from the top of the image. */
  data: Uint8ClampedArray;
  vmin: number;
  vmax: number;
}

export class GridSchemaError extends Error {}

export function validateGrid(grid: GridPayload): void {
  if (!Number.isInteger(grid.width) || !Number.isInteger(grid.height) ||
      grid.width < 1 || grid.height < 1) {
    throw new GridSchemaError(`bad grid dimensions ${grid.width}x${grid.height}`);
  }
  if (!Array.isArray(grid.values) ||
      grid.values.length !== grid.width * grid.height) {
    throw new GridSchemaError(
      `values length ${grid.values?.length} != ${grid.width * grid.height}`);
  }
}

export function valueRange(grid: GridPayload): [number, number] {
  let vmin = Infinity;
  let vmax = -Infinity;
  for (const v of grid.values) {
    if (v === null) continue;
    if (v < vmin) vmin = v;
    if (v > vmax) vmax = v;
  }
  if (vmin === Infinity) {
    vmin = 0;
    vmax = 1;
  }
  return [vmin, vmax];
}

export function renderGridRaster(grid: GridPayload): Raster {
  validateGrid(grid);
  const [vmin, vmax] = valueRange(grid);
  const span = vmax > vmin ? vmax - vmin : 1;
  const data = new Uint8ClampedArray(grid.width * grid.height * 4);
  for (let row = 0; row < grid.height; row++) {
    const srcRow = grid.height - 1 - row;   // north up
    for (let col = 0; col < grid.width; col++) {
      const v = grid.values[srcRow * grid.width + col];
      const rgb = v === null ? NODATA_RGB : rampColor((v - vmin) / span);
      const o = (row * grid.width + col) * 4;
      data[o] = rgb[0];
      data[o + 1] = rgb[1];
      data[o + 2] = rgb[2];
      data[o + 3] = 255;
    }
  }
  return { width: grid.width, height: grid.height, data, vmin, vmax };
}

/** Cell lookup for hover inspection; row/col in grid coordinates. */
export function cellAt(grid: GridPayload, col: number, row: number): {
  value: number | null; serving: string | null;
} {
  if (col < 0 || col >= grid.width || row < 0 || row >= grid.height) {
    return { value: null, serving: null };
  }
  const idx = row * grid.width + col;
  return { value: grid.values[idx], serving: grid.serving?.[idx] ?? null };
}
