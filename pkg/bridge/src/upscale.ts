/** 4x pre-upscaling for the feature path. The pretrained slot (hat)
 * requires external weights; the bypass is separable Catmull-Rom bicubic. */

import { MissingWeightsError } from "./extract.js";
import { Raster, makeRaster } from "./raster.js";

export interface UpscaleOptions {
  model: "bicubic" | "hat";
  weightsPath?: string;
}

function catmullRom(p0: number, p1: number, p2: number, p3: number, t: number): number {
  const t2 = t * t;
  const t3 = t2 * t;
  return 0.5 * ((2 * p1) + (-p0 + p2) * t +
    (2 * p0 - 5 * p1 + 4 * p2 - p3) * t2 +
    (-p0 + 3 * p1 - 3 * p2 + p3) * t3);
}

function sampleRow(row: Float64Array, n: number, pos: number): number {
  const i = Math.floor(pos);
  const t = pos - i;
  const at = (k: number) => row[Math.max(0, Math.min(n - 1, k))];
  return catmullRom(at(i - 1), at(i), at(i + 1), at(i + 2), t);
}

export function upscale4x(img: Raster, opts: UpscaleOptions = { model: "bicubic" }): Raster {
  if (opts.model === "hat") {
    throw new MissingWeightsError(
      "hat requires pretrained weights; fetch them separately or use the " +
      "bicubic bypass",
    );
  }
  const { height: h, width: w } = img;
  const oh = 4 * h;
  const ow = 4 * w;
  // horizontal pass
  const mid = makeRaster(h, ow);
  const rowBuf = new Float64Array(w);
  for (let y = 0; y < h; y++) {
    rowBuf.set(img.data.subarray(y * w, (y + 1) * w));
    for (let x = 0; x < ow; x++) {
      mid.data[y * ow + x] = sampleRow(rowBuf, w, (x + 0.5) / 4 - 0.5);
    }
  }
  // vertical pass
  const out = makeRaster(oh, ow);
  const colBuf = new Float64Array(h);
  for (let x = 0; x < ow; x++) {
    for (let y = 0; y < h; y++) colBuf[y] = mid.data[y * ow + x];
    for (let y = 0; y < oh; y++) {
      out.data[y * ow + x] = sampleRow(colBuf, h, (y + 0.5) / 4 - 0.5);
    }
  }
  return out;
}
