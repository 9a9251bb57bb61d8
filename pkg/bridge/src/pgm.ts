/** Binary (P5) PGM reading and writing, maxval 255. */

import { readFileSync, writeFileSync } from "node:fs";
import { Raster, makeRaster } from "./raster.js";

export class PgmError extends Error {}

export function readPgm(path: string): Raster {
  const buf = readFileSync(path);
  const text = buf.toString("ascii", 0, Math.min(buf.length, 64));
  const m = text.match(/^P5\s+(\d+)\s+(\d+)\s+(\d+)\s/);
  if (!m) throw new PgmError(`${path}: not a binary PGM`);
  const [, w, h, maxval] = m;
  const width = parseInt(w, 10);
  const height = parseInt(h, 10);
  if (parseInt(maxval, 10) > 255) throw new PgmError(`${path}: 16-bit PGM unsupported`);
  const start = m[0].length;
  if (buf.length - start < width * height) throw new PgmError(`${path}: truncated`);
  const out = makeRaster(height, width);
  for (let i = 0; i < width * height; i++) out.data[i] = buf[start + i];
  return out;
}

/** Values are clamped and rounded to [0, 255]. */
export function writePgm(r: Raster, path: string): void {
  const header = Buffer.from(`P5\n${r.width} ${r.height}\n255\n`, "ascii");
  const payload = Buffer.alloc(r.width * r.height);
  for (let i = 0; i < payload.length; i++) {
    payload[i] = Math.max(0, Math.min(255, Math.round(r.data[i])));
  }
  writeFileSync(path, Buffer.concat([header, payload]));
}
