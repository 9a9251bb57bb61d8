/** Per-image fill-in regression: six 3x3 Conv2D layers, each followed by
 * ReLU. Input is the monocular prior normalized to [0, 1]; the target is
 * the matcher's disparity where its data mask is set, min-max normalized
 * over those cells; the loss is MSE restricted to the mask.
 *
 * Training follows the fixed regimen: AdamW (decoupled weight decay) at
 * lr 2.5e-4, scaled by 0.9 every 25 epochs, 125 epochs. One epoch is a
 * shuffled pass over the image's overlapping patches (the network is fully
 * convolutional, so patch training and full-raster prediction agree).
 */

import * as tf from "@tensorflow/tfjs";
import { writeFileSync } from "node:fs";
import { readPfm, writePfm } from "./pfm.js";
import { readPgm } from "./pgm.js";
import { Raster, makeRaster, normalize01 } from "./raster.js";

export class FcrnError extends Error {}

export interface FcrnConfig {
  filters: number;
  kernelSize: number;
  lr: number;
  lrGamma: number;
  lrStepEpochs: number;
  epochs: number;
  weightDecay: number;
  patchSize: number;
  patchStride: number;
  /** stop once the full-raster masked MSE drops to this value (0 disables) */
  targetLoss: number;
  seed: number;
}

export const DEFAULT_CONFIG: FcrnConfig = {
  filters: 32,
  kernelSize: 3,
  lr: 0.00025,
  lrGamma: 0.9,
  lrStepEpochs: 25,
  epochs: 125,
  weightDecay: 0.01,
  patchSize: 32,
  patchStride: 16,
  targetLoss: 0,
  seed: 0,
};

export interface FcrnResult {
  epochsRun: number;
  finalMaskedMse: number;
  lossHistory: number[];
}

/** Deterministic shuffle source (referenced implementation: LCG). */
function lcg(seed: number): () => number {
  let state = (seed >>> 0) || 1;
  return () => {
    state = (state * 1103515245 + 12345) & 0x7fffffff;
    return state / 0x7fffffff;
  };
}

function buildModel(cfg: FcrnConfig): tf.Sequential {
  const model = tf.sequential();
  model.add(tf.layers.conv2d({
    inputShape: [null as unknown as number, null as unknown as number, 1],
    filters: cfg.filters, kernelSize: cfg.kernelSize, padding: "same",
    activation: "relu",
  }));
  for (let i = 0; i < 4; i++) {
    model.add(tf.layers.conv2d({
      filters: cfg.filters, kernelSize: cfg.kernelSize, padding: "same",
      activation: "relu",
    }));
  }
  model.add(tf.layers.conv2d({
    filters: 1, kernelSize: cfg.kernelSize, padding: "same", activation: "relu",
  }));
  return model;
}

function toTensor(r: Raster): tf.Tensor4D {
  return tf.tensor4d(Array.from(r.data), [1, r.height, r.width, 1]);
}

function patchCoords(h: number, w: number, size: number, stride: number): Array<[number, number]> {
  const coords: Array<[number, number]> = [];
  const ph = Math.min(size, h);
  const pw = Math.min(size, w);
  for (let y = 0; y + ph <= h; y += stride) {
    for (let x = 0; x + pw <= w; x += stride) coords.push([y, x]);
  }
  if (coords.length === 0) coords.push([0, 0]);
  return coords;
}

export async function trainFcrn(
  prior01: Raster,
  target01: Raster,
  mask: Raster,
  cfg: FcrnConfig,
): Promise<{ model: tf.Sequential; result: FcrnResult }> {
  let maskCount = 0;
  for (const v of mask.data) if (v > 0) maskCount++;
  if (maskCount === 0) {
    throw new FcrnError("data mask is empty: no supervision for the regression");
  }
  const { height: h, width: w } = prior01;
  const model = buildModel(cfg);
  const full = toTensor(prior01);
  const fullTarget = toTensor(target01);
  const fullMask = toTensor(mask);
  const fullMaskSum = fullMask.sum();

  const rand = lcg(cfg.seed);
  const coords = patchCoords(h, w, cfg.patchSize, cfg.patchStride);
  const ph = Math.min(cfg.patchSize, h);
  const pw = Math.min(cfg.patchSize, w);

  let lr = cfg.lr;
  let opt = tf.train.adam(lr);
  const history: number[] = [];
  let epochsRun = 0;
  try {
    for (let epoch = 0; epoch < cfg.epochs; epoch++) {
      if (epoch > 0 && epoch % cfg.lrStepEpochs === 0) {
        lr *= cfg.lrGamma;
        opt.dispose();
        opt = tf.train.adam(lr);
      }
      for (let i = coords.length - 1; i > 0; i--) {
        const j = Math.floor(rand() * (i + 1));
        [coords[i], coords[j]] = [coords[j], coords[i]];
      }
      for (const [y, x] of coords) {
        const px = full.slice([0, y, x, 0], [1, ph, pw, 1]);
        const pt = fullTarget.slice([0, y, x, 0], [1, ph, pw, 1]);
        const pm = fullMask.slice([0, y, x, 0], [1, ph, pw, 1]);
        const msum = pm.sum();
        const msumVal = (await msum.data())[0];
        if (msumVal > 0) {
          opt.minimize(() => tf.tidy(() => {
            const pred = model.apply(px) as tf.Tensor4D;
            return pred.sub(pt).square().mul(pm).sum().div(msum) as tf.Scalar;
          }));
          if (cfg.weightDecay > 0) {
            // decoupled weight decay on the conv kernels (AdamW semantics)
            for (const layer of model.layers) {
              const kernel = layer.getWeights()[0];
              if (kernel) {
                const decayed = tf.tidy(() => kernel.mul(1 - lr * cfg.weightDecay));
                layer.setWeights([decayed, layer.getWeights()[1]]);
                decayed.dispose();
              }
            }
          }
        }
        px.dispose(); pt.dispose(); pm.dispose(); msum.dispose();
      }
      const lossT = tf.tidy(() => {
        const pred = model.apply(full) as tf.Tensor4D;
        return pred.sub(fullTarget).square().mul(fullMask).sum().div(fullMaskSum);
      });
      const loss = (await lossT.data())[0];
      lossT.dispose();
      epochsRun = epoch + 1;
      history.push(loss);
      if (Number.isNaN(loss)) {
        throw new FcrnError(`training diverged (loss NaN) at epoch ${epoch}`);
      }
      if (cfg.targetLoss > 0 && loss <= cfg.targetLoss) break;
    }
  } finally {
    full.dispose(); fullTarget.dispose(); fullMask.dispose(); fullMaskSum.dispose();
    opt.dispose();
  }
  return {
    model,
    result: {
      epochsRun,
      finalMaskedMse: history[history.length - 1],
      lossHistory: history,
    },
  };
}

export interface FcrnFillResult extends FcrnResult {
  outPath: string;
  sidecarPath: string;
}

export async function fcrnFill(
  priorPath: string,
  disparityPath: string,
  maskPath: string,
  outPath: string,
  overrides: Partial<FcrnConfig> = {},
): Promise<FcrnFillResult> {
  const cfg: FcrnConfig = { ...DEFAULT_CONFIG, ...overrides };
  const prior = readPfm(priorPath);
  const disparity = readPfm(disparityPath);
  const maskRaw = readPgm(maskPath);
  if (disparity.height !== prior.height || disparity.width !== prior.width ||
      maskRaw.height !== prior.height || maskRaw.width !== prior.width) {
    throw new FcrnError("prior, disparity, and mask dimensions differ");
  }
  const mask = makeRaster(prior.height, prior.width);
  for (let i = 0; i < mask.data.length; i++) {
    mask.data[i] = maskRaw.data[i] > 127 && Number.isFinite(disparity.data[i]) ? 1 : 0;
  }
  // normalize target over supervised cells only
  let lo = Infinity;
  let hi = -Infinity;
  for (let i = 0; i < mask.data.length; i++) {
    if (mask.data[i] > 0) {
      lo = Math.min(lo, disparity.data[i]);
      hi = Math.max(hi, disparity.data[i]);
    }
  }
  const span = hi > lo ? hi - lo : 1;
  const target01 = makeRaster(prior.height, prior.width);
  for (let i = 0; i < target01.data.length; i++) {
    target01.data[i] = mask.data[i] > 0 ? (disparity.data[i] - lo) / span : 0;
  }
  const { model, result } = await trainFcrn(normalize01(prior), target01, mask, cfg);

  const fullIn = toTensor(normalize01(prior));
  const predT = tf.tidy(() => model.apply(fullIn) as tf.Tensor4D);
  const pred = await predT.data();
  fullIn.dispose(); predT.dispose(); model.dispose();
  const out = makeRaster(prior.height, prior.width);
  for (let i = 0; i < out.data.length; i++) out.data[i] = pred[i] * span + lo;
  writePfm(out, outPath);
  const sidecarPath = outPath.replace(/\.pfm$/, "") + ".json";
  writeFileSync(sidecarPath, JSON.stringify({
    config: cfg,
    target_lo: lo,
    target_hi: hi,
    epochs_run: result.epochsRun,
    final_masked_mse: result.finalMaskedMse,
  }, null, 2) + "\n");
  return { ...result, outPath, sidecarPath };
}
