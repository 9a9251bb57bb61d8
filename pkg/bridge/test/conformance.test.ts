/** Bridge outputs drive a full match+fill run of the matcher on a real
 * 256x256 photograph pair (constant-shift planar scene). */

import { execFileSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { beforeAll, describe, expect, it } from "vitest";
import { readB2ft } from "../src/b2ft.js";
import { MissingWeightsError, extractFeatures } from "../src/extract.js";
import { monoPrior } from "../src/mono.js";
import { readPfm } from "../src/pfm.js";
import { readPgm } from "../src/pgm.js";
import { upscale4x } from "../src/upscale.js";

const here = dirname(fileURLToPath(import.meta.url));
let dataDir: string;
let workDir: string;

beforeAll(() => {
  workDir = mkdtempSync(join(tmpdir(), "bridge-conf-"));
  dataDir = join(workDir, "data");
  execFileSync("python3", [join(here, "..", "scripts", "make_testdata.py"), dataDir]);
}, 120_000);

describe("extract_features", () => {
  it("produces loadable volumes that drive match+fill", () => {
    const left = readPgm(join(dataDir, "left.pgm"));
    const right = readPgm(join(dataDir, "right.pgm"));
    const leftOut = join(workDir, "left.b2ft");
    const rightOut = join(workDir, "right.b2ft");
    const res = extractFeatures(left, right, leftOut, rightOut, { model: "patch" });
    expect(res.channels).toBe(15);
    const fv = readB2ft(leftOut);
    expect(fv.height).toBe(256);
    expect(fv.widthSamples).toBe(256);
    expect(fv.doubled).toBe(false);

    const prior = monoPrior(left, join(workDir, "prior.pfm"), {
      model: "groundtruth", gtPath: join(dataDir, "gt.pfm"),
    });
    expect(existsSync(prior.sidecarPath)).toBe(true);

    const out = join(workDir, "run");
    execFileSync("python3", ["-m", "cyclostereo.cli", "match",
      "--left", join(dataDir, "left.pgm"),
      "--right", join(dataDir, "right.pgm"),
      "--features-left", leftOut, "--features-right", rightOut,
      "--calib", join(dataDir, "calib.txt"),
      "--prior", join(workDir, "prior.pfm"),
      "--out", out], { timeout: 300_000 });
    for (const name of ["disparity.pfm", "filled.pfm", "masks/data.pgm",
                        "report.json", "config.json"]) {
      expect(existsSync(join(out, name)), name).toBe(true);
    }
    // the planar scene has two constant-disparity bands (8, 12): the run should recover them
    // on the overwhelming majority of trusted pixels
    const disp = readPfm(join(out, "disparity.pfm"));
    let good = 0;
    let trusted = 0;
    for (let i = 0; i < disp.data.length; i++) {
      if (Number.isFinite(disp.data[i])) {
        trusted++;
        if (Math.abs(disp.data[i] - (i < disp.data.length / 2 ? 8 : 12)) < 0.5) good++;
      }
    }
    expect(trusted).toBeGreaterThan(0.5 * disp.data.length);
    expect(good / trusted).toBeGreaterThan(0.95);
    const report = JSON.parse(readFileSync(join(out, "report.json"), "utf8"));
    expect(report.lines).toBe(256);
  }, 300_000);

  it("refuses the pretrained slot without weights", () => {
    const left = readPgm(join(dataDir, "left.pgm"));
    expect(() => extractFeatures(left, left, "/tmp/x", "/tmp/y",
      { model: "raft-stereo" })).toThrow(MissingWeightsError);
  });
});

describe("mono_prior", () => {
  it("writes a strictly positive prior the consumer can normalize", () => {
    const left = readPgm(join(dataDir, "left.pgm"));
    const out = join(workDir, "vertical.pfm");
    monoPrior(left, out, { model: "vertical" });
    const prior = readPfm(out);
    for (const v of prior.data) {
      expect(Number.isFinite(v)).toBe(true);
      expect(v).toBeGreaterThan(0);
    }
  });
});

describe("upscale4x", () => {
  it("quadruples both dimensions and matches on the bypass path", () => {
    const left = readPgm(join(dataDir, "left.pgm"));
    const crop = { height: 64, width: 64, data: new Float64Array(64 * 64) };
    for (let y = 0; y < 64; y++) {
      for (let x = 0; x < 64; x++) crop.data[y * 64 + x] = left.data[y * 256 + x];
    }
    const up = upscale4x(crop, { model: "bicubic" });
    expect(up.height).toBe(256);
    expect(up.width).toBe(256);
    expect(() => upscale4x(crop, { model: "hat" })).toThrow(MissingWeightsError);
  });
});
