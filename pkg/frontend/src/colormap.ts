/**
 * Shared heatmap color ramp.
 *
 * This table is part of the wire contract with the service: exported
 * PNGs and client-side renders must agree.  Low values are blue, high
 * values purple; cells without data render neutral gray.
 */

export type Rgb = [number, number, number];

export const COLOR_RAMP: ReadonlyArray<readonly [number, Rgb]> = [
  [0.0, [25, 60, 255]],     // blue
  [0.2, [0, 200, 220]],     // teal
  [0.4, [0, 210, 80]],      // green
  [0.6, [240, 220, 0]],     // yellow
  [0.8, [255, 80, 0]],      // orange-red
  [1.0, [160, 0, 200]],     // purple
];

export const NODATA_RGB: Rgb = [128, 128, 128];

/** Interpolate the ramp at t in [0, 1] (clipped). */
export function rampColor(t: number): Rgb {
  const clamped = Math.min(1, Math.max(0, t));
  for (let k = 0; k + 1 < COLOR_RAMP.length; k++) {
    const [t0, c0] = COLOR_RAMP[k];
    const [t1, c1] = COLOR_RAMP[k + 1];
    if (clamped <= t1) {
      const f = t1 === t0 ? 0 : (clamped - t0) / (t1 - t0);
      return [
        Math.round(c0[0] + f * (c1[0] - c0[0])),
        Math.round(c0[1] + f * (c1[1] - c0[1])),
        Math.round(c0[2] + f * (c1[2] - c0[2])),
      ];
    }
  }
  return COLOR_RAMP[COLOR_RAMP.length - 1][1];
}
