/** Grayscale PFM: "Pf", dims, scale (sign = endianness), rows bottom-up.
 * Invalid cells are +Infinity per the Middlebury disparity convention. */

import { readFileSync, writeFileSync } from "node:fs";
import { Raster, makeRaster } from "./raster.js";

export class PfmError extends Error {}

function nextToken(buf: Buffer, pos: { i: number }): string {
  while (pos.i < buf.length && /\s/.test(String.fromCharCode(buf[pos.i]))) pos.i++;
  const start = pos.i;
  while (pos.i < buf.length && !/\s/.test(String.fromCharCode(buf[pos.i]))) pos.i++;
  if (start === pos.i) throw new PfmError("unexpected end of PFM header");
  return buf.toString("ascii", start, pos.i);
}

export function readPfm(path: string): Raster {
  const buf = readFileSync(path);
  const pos = { i: 0 };
  const magic = nextToken(buf, pos);
  if (magic === "PF") throw new PfmError(`${path}: color PFM unsupported`);
  if (magic !== "Pf") throw new PfmError(`${path}: not a PFM file`);
  const width = parseInt(nextToken(buf, pos), 10);
  const height = parseInt(nextToken(buf, pos), 10);
  const scale = parseFloat(nextToken(buf, pos));
  pos.i++; // single whitespace after the scale line
  const little = scale < 0;
  const need = width * height * 4;
  if (buf.length - pos.i < need) throw new PfmError(`${path}: truncated payload`);
  const out = makeRaster(height, width);
  for (let y = 0; y < height; y++) {
    const srcRow = height - 1 - y; // stored bottom-up
    for (let x = 0; x < width; x++) {
      const off = pos.i + (srcRow * width + x) * 4;
      const v = little ? buf.readFloatLE(off) : buf.readFloatBE(off);
      if (Number.isNaN(v)) throw new PfmError(`${path}: NaN payload`);
      out.data[y * width + x] = v;
    }
  }
  return out;
}

export function writePfm(r: Raster, path: string): void {
  const header = Buffer.from(`Pf\n${r.width} ${r.height}\n-1.0\n`, "ascii");
  const payload = Buffer.alloc(r.width * r.height * 4);
  for (let y = 0; y < r.height; y++) {
    const dstRow = r.height - 1 - y;
    for (let x = 0; x < r.width; x++) {
      payload.writeFloatLE(r.data[y * r.width + x], (dstRow * r.width + x) * 4);
    }
  }
  writeFileSync(path, Buffer.concat([header, payload]));
}
