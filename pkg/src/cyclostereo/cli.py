"""Command-line surface: match, eval, synth, correlate, fill, compare."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import costvolume, dp, features, fileio, metrics, synth
from .config import PipelineConfig, apply_env_overrides
from .fill import DisparityMap, affine_align, fill_gaps, load_prior, project_to_left


def _parse_radius(text):
    parts = [int(v) for v in str(text).split(",")]
    return (parts[0], parts[0]) if len(parts) == 1 else (parts[0], parts[1])


def _feature_volumes(cfg, left_img, right_img, geom):
    if cfg.feature_source == "b2ft":
        fl = features.load_feature_volume(cfg.inputs["features_left"],
                                          expect=(geom.height, geom.width))
        fr = features.load_feature_volume(cfg.inputs["features_right"],
                                          expect=(geom.height, geom.width))
    else:
        extract = (features.census_patch_features if cfg.feature_source == "census"
                   else features.patch_features)
        fl = extract(left_img, cfg.census_radius)
        fr = extract(right_img, cfg.census_radius)
    if not fl.doubled:
        fl = features.double_width(fl)
    if not fr.doubled:
        fr = features.double_width(fr)
    return fl, fr


def _disparity_map_from_pfm(path, source="gt"):
    values, valid = fileio.read_pfm(path)
    return DisparityMap(height=values.shape[0], width=values.shape[1],
                        values=values, valid=valid, source=source)


def run_match(cfg):
    os.makedirs(cfg.out_dir, exist_ok=True)
    os.makedirs(os.path.join(cfg.out_dir, "masks"), exist_ok=True)
    geom = fileio.read_calib(cfg.inputs["calib"])
    left_img = fileio.load_image_gray(cfg.inputs["left"])
    right_img = fileio.load_image_gray(cfg.inputs["right"])
    if left_img.shape != (geom.height, geom.width):
        raise fileio.FormatError(
            f"left image {left_img.shape} does not match calib "
            f"{(geom.height, geom.width)}")
    if right_img.shape != left_img.shape:
        raise fileio.FormatError("left/right image dimensions differ")

    fl, fr = _feature_volumes(cfg, left_img, right_img, geom)
    slices = costvolume.build_all(fl, fr, geom, norm_scope=cfg.fm_norm)
    sol = dp.solve_all(slices, cfg.dp_params(), parallelism=cfg.parallelism,
                       geom=geom)

    left_map = project_to_left(sol, use_refined=cfg.subpixel_refine)
    fileio.write_pfm(left_map.values, os.path.join(cfg.out_dir, "disparity.pfm"),
                     valid=left_map.valid)
    fileio.write_pfm(sol.disparity_full(),
                     os.path.join(cfg.out_dir, "cyclopean.pfm"))
    fileio.write_mask_pgm(sol.stack("occ").astype(bool),
                          os.path.join(cfg.out_dir, "masks", "occlusion.pgm"))
    fileio.write_mask_pgm(sol.stack("h").astype(bool),
                          os.path.join(cfg.out_dir, "masks", "homogeneous.pgm"))
    fileio.write_mask_pgm(sol.stack("data_mask").astype(bool),
                          os.path.join(cfg.out_dir, "masks", "data.pgm"))

    with open(os.path.join(cfg.out_dir, "lines.jsonl"), "w") as f:
        for ln in sol.lines:
            rep = dp.check_gc(ln)
            f.write(json.dumps({
                "e": ln.e,
                "cost": ln.cost,
                "occluded_count": int(ln.occ.sum()),
                "homogeneous_count": int(ln.h.sum()),
                "gc1_violations": len(rep.gc1_violations),
            }) + "\n")

    if "prior" in cfg.inputs and cfg.inputs["prior"]:
        prior = load_prior(cfg.inputs["prior"])
        filled = fill_gaps(prior, left_map, mode=cfg.fill_mode)
        fileio.write_pfm(filled.values, os.path.join(cfg.out_dir, "filled.pfm"),
                         valid=filled.valid)

    summary = {
        "lines": geom.height,
        "total_cost": sum(ln.cost for ln in sol.lines),
        "occluded_cells": int(sum(int(ln.occ.sum()) for ln in sol.lines)),
        "homogeneous_cells": int(sum(int(ln.h.sum()) for ln in sol.lines)),
        "trusted_cells": int(sum(int(ln.data_mask.sum()) for ln in sol.lines)),
    }
    with open(os.path.join(cfg.out_dir, "report.json"), "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    cfg.write(os.path.join(cfg.out_dir, "config.json"))
    return 0


def cmd_match(args):
    if args.config:
        cfg = PipelineConfig.read(args.config)
    else:
        cfg = PipelineConfig()
    apply_env_overrides(cfg)
    if args.left:
        cfg.inputs["left"] = args.left
    if args.right:
        cfg.inputs["right"] = args.right
    if args.calib:
        cfg.inputs["calib"] = args.calib
    if args.features_left:
        cfg.inputs["features_left"] = args.features_left
        cfg.inputs["features_right"] = args.features_right
        cfg.feature_source = "b2ft"
    if args.census:
        cfg.feature_source = "census"
    if args.patch:
        cfg.feature_source = "patch"
    if args.prior:
        cfg.inputs["prior"] = args.prior
    if args.census_radius:
        cfg.census_radius = _parse_radius(args.census_radius)
    for name in ("lam", "eps", "tau", "parallelism"):
        v = getattr(args, name)
        if v is not None:
            setattr(cfg, name, v)
    if args.literal_gc1:
        cfg.strict_gc1_runs = False
    if args.refine:
        cfg.subpixel_refine = True
    if args.norm:
        cfg.fm_norm = args.norm
    if args.fill_mode:
        cfg.fill_mode = args.fill_mode
    if args.out:
        cfg.out_dir = args.out
    for key in ("left", "right", "calib"):
        if key not in cfg.inputs:
            raise SystemExit(f"error: --{key} is required (or supply --config)")
    return run_match(cfg)


def cmd_eval(args):
    est = _disparity_map_from_pfm(args.est, source="dp")
    gt = _disparity_map_from_pfm(args.gt, source="gt")
    report = metrics.evaluate(est, gt, tau=args.tau)
    payload = report.to_json_dict()
    if args.signed_error_png:
        raster, mean_abs = metrics.signed_error_map(est, gt)
        metrics.export_signed_error_png(raster, args.signed_error_png)
        payload["signed_error_mean_abs"] = mean_abs
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    print(text)
    return 0


def cmd_synth(args):
    with open(args.spec) as f:
        spec = synth.spec_from_json_dict(json.load(f))
    if args.seed is not None:
        import dataclasses
        spec = dataclasses.replace(spec, seed=args.seed)
    out = args.out
    os.makedirs(out, exist_ok=True)
    os.makedirs(os.path.join(out, "masks"), exist_ok=True)
    left, right, gt = synth.generate(spec)
    fileio.write_pgm(np.round(left * 255), os.path.join(out, "left.pgm"))
    fileio.write_pgm(np.round(right * 255), os.path.join(out, "right.pgm"))
    fileio.write_pfm(gt.left.values, os.path.join(out, "gt.pfm"),
                     valid=gt.left.valid)
    fileio.write_pfm(gt.cyclopean_d2, os.path.join(out, "gt_cyclopean.pfm"))
    fileio.write_mask_pgm(gt.occ, os.path.join(out, "masks", "gt_occlusion.pgm"))
    fileio.write_mask_pgm(gt.occ_left_only,
                          os.path.join(out, "masks", "gt_left_only.pgm"))
    fileio.write_mask_pgm(gt.occ_right_only,
                          os.path.join(out, "masks", "gt_right_only.pgm"))
    prior = synth.prior_standin_from_gt(gt)
    fileio.write_pfm(prior.values, os.path.join(out, "prior.pfm"))
    geom = spec.geometry()
    with open(os.path.join(out, "calib.txt"), "w") as f:
        f.write(f"cam0=[{geom.focal_length_px} 0 {spec.width / 2}; "
                f"0 {geom.focal_length_px} {spec.height / 2}; 0 0 1]\n")
        f.write(f"baseline={geom.baseline}\n")
        f.write(f"width={spec.width}\nheight={spec.height}\n")
        f.write(f"ndisp={2 * geom.max_disparity_c}\ndoffs=0\n")
    with open(os.path.join(out, "scene.json"), "w") as f:
        json.dump(spec.to_json_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    entry = {
        "name": os.path.basename(os.path.normpath(out)),
        "im0": os.path.join(out, "left.pgm"),
        "im1": os.path.join(out, "right.pgm"),
        "gt": os.path.join(out, "gt.pfm"),
        "calib": os.path.join(out, "calib.txt"),
        "prior": os.path.join(out, "prior.pfm"),
    }
    with open(os.path.join(out, "entry.json"), "w") as f:
        json.dump(entry, f, indent=2, sort_keys=True)
        f.write("\n")
    print(json.dumps(entry, sort_keys=True))
    return 0


def cmd_correlate(args):
    geom = fileio.read_calib(args.calib)
    cfg = PipelineConfig(feature_source="patch" if args.patch else "census",
                         census_radius=_parse_radius(args.census_radius),
                         inputs={})
    left_img = fileio.load_image_gray(args.left)
    right_img = fileio.load_image_gray(args.right)
    fl, fr = _feature_volumes(cfg, left_img, right_img, geom)
    sl = costvolume.build_slice(fl, fr, args.line, geom)
    costvolume.export_slice(sl, args.format, args.out)
    print(f"line {args.line}: fm_max={sl.fm_max_used:.6g} -> {args.out}")
    return 0


def cmd_fill(args):
    values, valid = fileio.read_pfm(args.disparity)
    if args.valid:
        mask = fileio.read_pgm(args.valid) > 127
        valid = valid & mask
    dp_map = DisparityMap(height=values.shape[0], width=values.shape[1],
                          values=values, valid=valid, source="dp")
    prior = load_prior(args.prior)
    filled = fill_gaps(prior, dp_map, mode=args.mode)
    fileio.write_pfm(filled.values, args.out, valid=filled.valid)
    a, b = affine_align(prior, dp_map)
    print(json.dumps({"mode": args.mode, "scale": a, "offset": b,
                      "notes": list(filled.notes)}))
    return 0


def _fmt_cell(v):
    if v is None:
        return "undef"
    if isinstance(v, float):
        return "inf" if np.isinf(v) else f"{v:.4f}"
    return str(v)


def cmd_compare(args):
    with open(args.manifest) as f:
        entries = json.load(f)
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for entry in entries:
        for key in ("im0", "im1", "gt", "calib"):
            if key not in entry:
                raise SystemExit(f"error: manifest entry missing {key!r}")
            if not os.path.exists(entry[key]):
                raise SystemExit(f"error: {entry[key]} does not exist")
        name = entry.get("name", os.path.basename(entry["im0"]))
        workdir = os.path.join(args.out, name)
        cfg = PipelineConfig(out_dir=workdir, tau=args.tau,
                             subpixel_refine=args.refine,
                             inputs={"left": entry["im0"], "right": entry["im1"],
                                     "calib": entry["calib"]})
        if entry.get("prior"):
            cfg.inputs["prior"] = entry["prior"]
        run_match(cfg)
        gt = _disparity_map_from_pfm(entry["gt"], source="gt")
        est_path = os.path.join(workdir, "filled.pfm")
        if not os.path.exists(est_path):
            est_path = os.path.join(workdir, "disparity.pfm")
        est = _disparity_map_from_pfm(est_path, source="dp")
        rows.append((name, "stereo-dp", metrics.evaluate(est, gt, tau=args.tau)))
        if entry.get("prior"):
            prior = load_prior(entry["prior"])
            prior_map = DisparityMap(height=prior.height, width=prior.width,
                                     values=prior.values,
                                     valid=np.ones_like(prior.values, dtype=bool),
                                     source="gt")
            normed = metrics.affine_normalize_to_gt(prior_map, gt)
            rows.append((name, "prior-affine", metrics.evaluate(normed, gt, tau=args.tau)))

    headers = ["name", "method", "avg_error", "bad_error", "rms_error",
               "ssim_error", "psnr_sim", "mutual_info_sim"]
    table = [headers]
    payload = []
    for name, method, rep in rows:
        d = rep.to_json_dict()
        payload.append({"name": name, "method": method, **d})
        table.append([name, method] + [
            _fmt_cell(getattr(rep, k)) for k in headers[2:]])
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in table]
    text = "\n".join(lines)
    with open(os.path.join(args.out, "compare.json"), "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    with open(os.path.join(args.out, "compare.txt"), "w") as f:
        f.write(text + "\n")
    print(text)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="cyclostereo",
                                description="Cyclopean-coordinate stereo pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("match", help="stereo pair -> disparity, masks, report")
    m.add_argument("--left")
    m.add_argument("--right")
    m.add_argument("--calib")
    m.add_argument("--census", action="store_true")
    m.add_argument("--patch", action="store_true")
    m.add_argument("--features-left")
    m.add_argument("--features-right")
    m.add_argument("--prior")
    m.add_argument("--census-radius")
    m.add_argument("--lam", type=float)
    m.add_argument("--eps", type=float)
    m.add_argument("--tau", type=float)
    m.add_argument("--literal-gc1", action="store_true",
                   help="drop the direction-consistent run constraint")
    m.add_argument("--refine", action="store_true")
    m.add_argument("--norm", choices=["line", "global"])
    m.add_argument("--fill-mode", choices=["poisson", "affine"])
    m.add_argument("--parallelism", type=int)
    m.add_argument("--out")
    m.add_argument("--config")
    m.set_defaults(func=cmd_match)

    e = sub.add_parser("eval", help="estimated vs ground-truth disparity metrics")
    e.add_argument("--est", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--tau", type=float, default=2.0)
    e.add_argument("--out")
    e.add_argument("--signed-error-png")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="generate a synthetic scene with ground truth")
    s.add_argument("--spec", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    c = sub.add_parser("correlate", help="export one line's match-distance slice")
    c.add_argument("--left", required=True)
    c.add_argument("--right", required=True)
    c.add_argument("--calib", required=True)
    c.add_argument("--census", action="store_true")
    c.add_argument("--patch", action="store_true")
    c.add_argument("--census-radius", default="1,2")
    c.add_argument("--line", type=int, required=True)
    c.add_argument("--format", choices=["csv", "pgm"], required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_correlate)

    f = sub.add_parser("fill", help="complete gaps from a monocular prior")
    f.add_argument("--disparity", required=True)
    f.add_argument("--valid")
    f.add_argument("--prior", required=True)
    f.add_argument("--mode", choices=["poisson", "affine"], default="poisson")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fill)

    cp = sub.add_parser("compare", help="batch table across methods")
    cp.add_argument("--manifest", required=True)
    cp.add_argument("--tau", type=float, default=2.0)
    cp.add_argument("--refine", action="store_true")
    cp.add_argument("--out", required=True)
    cp.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
