/** Row-major single-channel rasters shared by the file formats. */

export interface Raster {
  height: number;
  width: number;
  /** length height*width, row-major */
  data: Float64Array;
}

export function makeRaster(height: number, width: number, fill = 0): Raster {
  const data = new Float64Array(height * width);
  if (fill !== 0) data.fill(fill);
  return { height, width, data };
}

export function rasterMinMax(r: Raster): { min: number; max: number } {
  let min = Infinity;
  let max = -Infinity;
  for (const v of r.data) {
    if (!Number.isFinite(v)) continue;
    if (v < min) min = v;
    if (v > max) max = v;
  }
  return { min, max };
}

/** Min-max normalize finite values to [0, 1]; non-finite cells become 0. */
export function normalize01(r: Raster): Raster {
  const { min, max } = rasterMinMax(r);
  const out = makeRaster(r.height, r.width);
  const span = max > min ? max - min : 1;
  for (let i = 0; i < r.data.length; i++) {
    const v = r.data[i];
    out.data[i] = Number.isFinite(v) ? (v - min) / span : 0;
  }
  return out;
}
