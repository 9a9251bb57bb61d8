/** Stereo feature extraction producing B2FT volumes the matcher ingests.
 *
 * The pretrained extractor slot (raft-stereo) requires externally fetched
 * weights and fails with a diagnostic when they are absent; the "patch"
 * extractor is a deterministic, weight-free stand-in (zero-mean,
 * L2-normalized intensity patches) so the full file contract can run
 * anywhere. Volumes are written un-doubled; the matcher resamples them
 * onto its half-pixel grid.
 */

import { FeatureVolume, writeB2ft } from "./b2ft.js";
import { Raster } from "./raster.js";

export class MissingWeightsError extends Error {}

export interface ExtractOptions {
  model: "patch" | "raft-stereo";
  /** (row, col) patch radius for the stand-in extractor */
  radius?: [number, number];
  weightsPath?: string;
}

function clamp(v: number, lo: number, hi: number): number {
  return v < lo ? lo : v > hi ? hi : v;
}

export function patchFeatureVolume(img: Raster, radius: [number, number]): FeatureVolume {
  const [ry, rx] = radius;
  const rows = 2 * ry + 1;
  const cols = 2 * rx + 1;
  const channels = rows * cols;
  const { height, width } = img;
  const data = new Float32Array(height * width * channels);
  const patch = new Float64Array(channels);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      let k = 0;
      let mean = 0;
      for (let dy = -ry; dy <= ry; dy++) {
        const yy = clamp(y + dy, 0, height - 1);
        for (let dx = -rx; dx <= rx; dx++) {
          const xx = clamp(x + dx, 0, width - 1);
          const v = img.data[yy * width + xx];
          patch[k++] = v;
          mean += v;
        }
      }
      mean /= channels;
      let norm = 0;
      for (let i = 0; i < channels; i++) {
        patch[i] -= mean;
        norm += patch[i] * patch[i];
      }
      norm = Math.sqrt(norm);
      const base = (y * width + x) * channels;
      if (norm > 1e-4) {
        for (let i = 0; i < channels; i++) data[base + i] = patch[i] / norm;
      } // else: all-zero padding sample (textureless patch)
    }
  }
  return { height, widthSamples: width, channels, doubled: false, normalized: true, data };
}

export interface ExtractResult {
  leftPath: string;
  rightPath: string;
  channels: number;
}

export function extractFeatures(
  left: Raster,
  right: Raster,
  leftOut: string,
  rightOut: string,
  opts: ExtractOptions,
): ExtractResult {
  if (left.height !== right.height || left.width !== right.width) {
    throw new Error(
      `dimension mismatch: left ${left.height}x${left.width}, ` +
      `right ${right.height}x${right.width}`,
    );
  }
  if (opts.model === "raft-stereo") {
    throw new MissingWeightsError(
      "raft-stereo requires pretrained weights; fetch them separately and " +
      "point --weights at the checkpoint (weights are never vendored)",
    );
  }
  const radius = opts.radius ?? [1, 2];
  const fl = patchFeatureVolume(left, radius);
  const fr = patchFeatureVolume(right, radius);
  writeB2ft(fl, leftOut);
  writeB2ft(fr, rightOut);
  return { leftPath: leftOut, rightPath: rightOut, channels: fl.channels };
}
