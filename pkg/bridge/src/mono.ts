/** Monocular prior production (left view, positive inverse-depth proxy).
 *
 * The pretrained slot (depthpro) fails with a diagnostic without weights.
 * Two weight-free stand-ins keep the contract testable: "groundtruth"
 * turns a GT disparity raster into a perfect-model prior (gaps filled from
 * the nearest valid cell on the row), and "vertical" is the classic
 * ground-plane heuristic (lower rows nearer). A JSON sidecar records the
 * model and its focal-length estimate when it has one.
 */

import { writeFileSync } from "node:fs";
import { MissingWeightsError } from "./extract.js";
import { readPfm, writePfm } from "./pfm.js";
import { Raster, makeRaster } from "./raster.js";

export interface MonoOptions {
  model: "groundtruth" | "vertical" | "depthpro";
  gtPath?: string;
  weightsPath?: string;
}

function fillRowGaps(r: Raster): Raster {
  const out = makeRaster(r.height, r.width);
  let globalSum = 0;
  let globalN = 0;
  for (const v of r.data) {
    if (Number.isFinite(v)) {
      globalSum += v;
      globalN++;
    }
  }
  if (globalN === 0) throw new Error("ground-truth raster has no finite cells");
  const globalMean = globalSum / globalN;
  for (let y = 0; y < r.height; y++) {
    for (let x = 0; x < r.width; x++) {
      let v = r.data[y * r.width + x];
      if (!Number.isFinite(v)) {
        let best = Infinity;
        let pick = globalMean;
        for (let xx = 0; xx < r.width; xx++) {
          const w = r.data[y * r.width + xx];
          if (Number.isFinite(w) && Math.abs(xx - x) < best) {
            best = Math.abs(xx - x);
            pick = w;
          }
        }
        v = pick;
      }
      out.data[y * r.width + x] = v;
    }
  }
  return out;
}

export interface MonoResult {
  priorPath: string;
  sidecarPath: string;
  focalLengthPx: number | null;
}

export function monoPrior(
  image: Raster,
  outPath: string,
  opts: MonoOptions,
): MonoResult {
  let prior: Raster;
  let focal: number | null = null;
  if (opts.model === "depthpro") {
    throw new MissingWeightsError(
      "depthpro requires pretrained weights; fetch them separately and " +
      "point --weights at the checkpoint",
    );
  } else if (opts.model === "groundtruth") {
    if (!opts.gtPath) throw new Error("groundtruth model needs --gt");
    prior = fillRowGaps(readPfm(opts.gtPath));
  } else {
    // ground-plane heuristic: lower image rows are nearer
    prior = makeRaster(image.height, image.width);
    for (let y = 0; y < image.height; y++) {
      for (let x = 0; x < image.width; x++) {
        prior.data[y * image.width + x] = 1 + y;
      }
    }
  }
  // strictly positive finite raster; the consumer min-max normalizes on load
  let min = Infinity;
  for (const v of prior.data) min = Math.min(min, v);
  if (min <= 0) {
    for (let i = 0; i < prior.data.length; i++) prior.data[i] += 1 - min;
  }
  writePfm(prior, outPath);
  const sidecarPath = outPath.replace(/\.pfm$/, "") + ".json";
  writeFileSync(
    sidecarPath,
    JSON.stringify({ model: opts.model, focal_length_px: focal }, null, 2) + "\n",
  );
  return { priorPath: outPath, sidecarPath, focalLengthPx: focal };
}
