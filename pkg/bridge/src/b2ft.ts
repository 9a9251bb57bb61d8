/** B2FT feature-volume container: magic "B2FT", u32 version=1, u32 height,
 * u32 width_samples, u32 channels, u8 doubled, u8 normalized, 6 reserved
 * bytes, then little-endian float32 data, row-major, channel-fastest. */

import { readFileSync, writeFileSync } from "node:fs";

export class B2ftError extends Error {}

export interface FeatureVolume {
  height: number;
  widthSamples: number;
  channels: number;
  doubled: boolean;
  normalized: boolean;
  /** length height*widthSamples*channels */
  data: Float32Array;
}

const MAGIC = "B2FT";
const VERSION = 1;
const HEADER_BYTES = 28;

export function writeB2ft(fv: FeatureVolume, path: string): void {
  const expected = fv.height * fv.widthSamples * fv.channels;
  if (fv.data.length !== expected) {
    throw new B2ftError(`data length ${fv.data.length} != ${expected}`);
  }
  const header = Buffer.alloc(HEADER_BYTES);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt32LE(VERSION, 4);
  header.writeUInt32LE(fv.height, 8);
  header.writeUInt32LE(fv.widthSamples, 12);
  header.writeUInt32LE(fv.channels, 16);
  header.writeUInt8(fv.doubled ? 1 : 0, 20);
  header.writeUInt8(fv.normalized ? 1 : 0, 21);
  const payload = Buffer.alloc(fv.data.length * 4);
  for (let i = 0; i < fv.data.length; i++) payload.writeFloatLE(fv.data[i], i * 4);
  writeFileSync(path, Buffer.concat([header, payload]));
}

export function readB2ft(path: string): FeatureVolume {
  const buf = readFileSync(path);
  if (buf.length < HEADER_BYTES) throw new B2ftError(`${path}: truncated header`);
  if (buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new B2ftError(`${path}: not a B2FT file`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) throw new B2ftError(`${path}: unsupported version ${version}`);
  const height = buf.readUInt32LE(8);
  const widthSamples = buf.readUInt32LE(12);
  const channels = buf.readUInt32LE(16);
  const doubled = buf.readUInt8(20) === 1;
  const normalized = buf.readUInt8(21) === 1;
  const count = height * widthSamples * channels;
  if (buf.length - HEADER_BYTES < count * 4) {
    throw new B2ftError(`${path}: truncated payload`);
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) data[i] = buf.readFloatLE(HEADER_BYTES + i * 4);
  return { height, widthSamples, channels, doubled, normalized, data };
}
