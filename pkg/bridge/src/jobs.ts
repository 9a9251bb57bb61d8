/** Job files: one JSON object per run, validated up front, outputs written
 * atomically (temp + rename). */

import { renameSync } from "node:fs";
import { z } from "zod";
import { extractFeatures } from "./extract.js";
import { fcrnFill } from "./fcrn.js";
import { monoPrior } from "./mono.js";
import { readPfm, writePfm } from "./pfm.js";
import { readPgm, writePgm } from "./pgm.js";
import { Raster } from "./raster.js";
import { upscale4x } from "./upscale.js";

export const extractJobSchema = z.object({
  task: z.literal("extract"),
  left: z.string(),
  right: z.string(),
  leftOut: z.string(),
  rightOut: z.string(),
  model: z.enum(["patch", "raft-stereo"]).default("patch"),
  radius: z.tuple([z.number().int(), z.number().int()]).optional(),
  weightsPath: z.string().optional(),
});

export const monoJobSchema = z.object({
  task: z.literal("mono"),
  image: z.string(),
  out: z.string(),
  model: z.enum(["groundtruth", "vertical", "depthpro"]).default("vertical"),
  gtPath: z.string().optional(),
  weightsPath: z.string().optional(),
});

export const fcrnJobSchema = z.object({
  task: z.literal("fcrn"),
  prior: z.string(),
  disparity: z.string(),
  mask: z.string(),
  out: z.string(),
  filters: z.number().int().positive().optional(),
  epochs: z.number().int().positive().optional(),
  patchSize: z.number().int().positive().optional(),
  patchStride: z.number().int().positive().optional(),
  targetLoss: z.number().nonnegative().optional(),
  seed: z.number().int().optional(),
});

export const upscaleJobSchema = z.object({
  task: z.literal("upscale"),
  image: z.string(),
  out: z.string(),
  model: z.enum(["bicubic", "hat"]).default("bicubic"),
  weightsPath: z.string().optional(),
});

export const jobSchema = z.discriminatedUnion("task", [
  extractJobSchema, monoJobSchema, fcrnJobSchema, upscaleJobSchema,
]);

export type Job = z.infer<typeof jobSchema>;

function loadImage(path: string): Raster {
  return path.endsWith(".pfm") ? readPfm(path) : readPgm(path);
}

async function withAtomic<T>(
  finalPath: string,
  run: (tmpPath: string) => Promise<T> | T,
): Promise<T> {
  const tmp = finalPath + ".tmp";
  const out = await run(tmp);
  renameSync(tmp, finalPath);
  return out;
}

export async function runJob(job: Job): Promise<Record<string, unknown>> {
  switch (job.task) {
    case "extract": {
      const left = loadImage(job.left);
      const right = loadImage(job.right);
      const res = await withAtomic(job.rightOut, async (tmpRight) =>
        withAtomic(job.leftOut, (tmpLeft) =>
          extractFeatures(left, right, tmpLeft, tmpRight, {
            model: job.model, radius: job.radius, weightsPath: job.weightsPath,
          })));
      return { task: "extract", channels: res.channels,
               left: job.leftOut, right: job.rightOut };
    }
    case "mono": {
      const image = loadImage(job.image);
      const res = await withAtomic(job.out, (tmp) =>
        monoPrior(image, tmp, {
          model: job.model, gtPath: job.gtPath, weightsPath: job.weightsPath,
        }));
      return { task: "mono", prior: job.out, sidecar: res.sidecarPath,
               focal_length_px: res.focalLengthPx };
    }
    case "fcrn": {
      const res = await withAtomic(job.out, (tmp) =>
        fcrnFill(job.prior, job.disparity, job.mask, tmp, {
          ...(job.filters !== undefined && { filters: job.filters }),
          ...(job.epochs !== undefined && { epochs: job.epochs }),
          ...(job.patchSize !== undefined && { patchSize: job.patchSize }),
          ...(job.patchStride !== undefined && { patchStride: job.patchStride }),
          ...(job.targetLoss !== undefined && { targetLoss: job.targetLoss }),
          ...(job.seed !== undefined && { seed: job.seed }),
        }));
      return { task: "fcrn", out: job.out, epochs_run: res.epochsRun,
               final_masked_mse: res.finalMaskedMse };
    }
    case "upscale": {
      const image = loadImage(job.image);
      const out = upscale4x(image, { model: job.model, weightsPath: job.weightsPath });
      await withAtomic(job.out, (tmp) => {
        if (job.out.endsWith(".pfm")) writePfm(out, tmp);
        else writePgm(out, tmp);
      });
      return { task: "upscale", out: job.out,
               height: out.height, width: out.width };
    }
  }
}
