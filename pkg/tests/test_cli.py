import hashlib
import json
import os

import numpy as np
import pytest

from cyclostereo.cli import main
from cyclostereo.fileio import read_pfm, read_pgm


def write_scene_spec(path, width=48, height=24, disparity=4, seed=9,
                     noise=0.0):
    spec = {
        "width": width, "height": height,
        "layers": [{"x0": 14, "y0": 4, "x1": 34, "y1": 20,
                    "disparity": disparity}],
        "dot_density": 0.5, "seed": seed, "noise_sigma": noise,
        "max_disparity_c": 4,
    }
    with open(path, "w") as f:
        json.dump(spec, f)
    return spec


@pytest.fixture
def scene(tmp_path, capsys):
    spec_path = tmp_path / "scene.json"
    write_scene_spec(spec_path)
    out = tmp_path / "scene"
    assert main(["synth", "--spec", str(spec_path), "--out", str(out)]) == 0
    capsys.readouterr()
    return out


def digest(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


class TestSynthCommand:
    def test_outputs_exist(self, scene):
        for name in ("left.pgm", "right.pgm", "gt.pfm", "gt_cyclopean.pfm",
                     "calib.txt", "scene.json", "entry.json", "prior.pfm",
                     "masks/gt_occlusion.pgm"):
            assert (scene / name).exists(), name

    def test_seed_override_changes_images(self, tmp_path, capsys):
        spec_path = tmp_path / "s.json"
        write_scene_spec(spec_path)
        a, b = tmp_path / "a", tmp_path / "b"
        main(["synth", "--spec", str(spec_path), "--out", str(a)])
        main(["synth", "--spec", str(spec_path), "--out", str(b), "--seed", "77"])
        capsys.readouterr()
        assert digest(a / "left.pgm") != digest(b / "left.pgm")


class TestMatchCommand:
    def test_full_run(self, scene, tmp_path):
        out = tmp_path / "run"
        rc = main(["match", "--left", str(scene / "left.pgm"),
                   "--right", str(scene / "right.pgm"),
                   "--census", "--calib", str(scene / "calib.txt"),
                   "--prior", str(scene / "prior.pfm"),
                   "--out", str(out)])
        assert rc == 0
        disp, valid = read_pfm(out / "disparity.pfm")
        assert disp.shape == (24, 48)
        assert valid.any()
        assert read_pfm(out / "cyclopean.pfm")[0].shape == (24, 96)
        occ = read_pgm(out / "masks" / "occlusion.pgm")
        assert set(np.unique(occ)) <= {0, 255}
        lines = [json.loads(l) for l in open(out / "lines.jsonl")]
        assert len(lines) == 24
        assert all(l["gc1_violations"] == 0 for l in lines)
        assert (out / "filled.pfm").exists()
        filled, fvalid = read_pfm(out / "filled.pfm")
        assert fvalid.all()
        report = json.load(open(out / "report.json"))
        assert report["lines"] == 24

    def test_config_rerun_bit_identical(self, scene, tmp_path):
        out1 = tmp_path / "r1"
        main(["match", "--left", str(scene / "left.pgm"),
              "--right", str(scene / "right.pgm"),
              "--census", "--calib", str(scene / "calib.txt"),
              "--out", str(out1)])
        out2 = tmp_path / "r2"
        cfg = json.load(open(out1 / "config.json"))
        cfg["out_dir"] = str(out2)
        cfg_path = tmp_path / "replay.json"
        with open(cfg_path, "w") as f:
            json.dump(cfg, f)
        main(["match", "--config", str(cfg_path)])
        for name in ("disparity.pfm", "cyclopean.pfm", "masks/occlusion.pgm",
                     "masks/data.pgm", "lines.jsonl", "report.json"):
            assert digest(out1 / name) == digest(out2 / name), name

    def test_literal_gc1_and_patch_features(self, scene, tmp_path):
        out = tmp_path / "lit"
        rc = main(["match", "--left", str(scene / "left.pgm"),
                   "--right", str(scene / "right.pgm"),
                   "--patch", "--literal-gc1", "--refine",
                   "--calib", str(scene / "calib.txt"),
                   "--out", str(out)])
        assert rc == 0
        cfg = json.load(open(out / "config.json"))
        assert cfg["strict_gc1_runs"] is False
        assert cfg["feature_source"] == "patch"
        assert cfg["subpixel_refine"] is True
        assert (out / "disparity.pfm").exists()

    def test_missing_inputs(self, capsys):
        assert main(["match", "--left", "nope.pgm", "--right", "nope.pgm",
                     "--calib", "nope.txt"]) == 1
        assert "error:" in capsys.readouterr().err


class TestEvalCommand:
    def test_self_eval(self, scene, capsys):
        rc = main(["eval", "--est", str(scene / "gt.pfm"),
                   "--gt", str(scene / "gt.pfm"), "--tau", "2.0"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["avg_error"] == 0
        assert payload["bad_error"] == 0
        assert payload["psnr_sim"] == "infinite"

    def test_signed_error_png(self, scene, tmp_path, capsys):
        png = tmp_path / "err.png"
        rc = main(["eval", "--est", str(scene / "gt.pfm"),
                   "--gt", str(scene / "gt.pfm"),
                   "--signed-error-png", str(png)])
        assert rc == 0
        assert png.exists()
        capsys.readouterr()


class TestCorrelateCommand:
    def test_csv_and_pgm(self, scene, tmp_path, capsys):
        for fmt in ("csv", "pgm"):
            out = tmp_path / f"slice.{fmt}"
            rc = main(["correlate", "--left", str(scene / "left.pgm"),
                       "--right", str(scene / "right.pgm"),
                       "--calib", str(scene / "calib.txt"), "--census",
                       "--line", "10", "--format", fmt, "--out", str(out)])
            assert rc == 0
            assert out.exists()
        capsys.readouterr()


class TestFillCommand:
    def test_fill_run(self, scene, tmp_path, capsys):
        run = tmp_path / "m"
        main(["match", "--left", str(scene / "left.pgm"),
              "--right", str(scene / "right.pgm"),
              "--census", "--calib", str(scene / "calib.txt"),
              "--out", str(run)])
        out = tmp_path / "filled.pfm"
        rc = main(["fill", "--disparity", str(run / "disparity.pfm"),
                   "--prior", str(scene / "prior.pfm"),
                   "--mode", "poisson", "--out", str(out)])
        assert rc == 0
        vals, valid = read_pfm(out)
        assert valid.all()
        capsys.readouterr()


class TestCompareCommand:
    def test_stereo_beats_normalized_prior(self, scene, tmp_path, capsys):
        manifest = tmp_path / "manifest.json"
        entry = json.load(open(scene / "entry.json"))
        with open(manifest, "w") as f:
            json.dump([entry], f)
        out = tmp_path / "cmp"
        rc = main(["compare", "--manifest", str(manifest), "--out", str(out)])
        assert rc == 0
        rows = json.load(open(out / "compare.json"))
        by_method = {r["method"]: r for r in rows}
        assert by_method["stereo-dp"]["avg_error"] < by_method["prior-affine"]["avg_error"]
        text = open(out / "compare.txt").read()
        assert "stereo-dp" in text and "prior-affine" in text
        capsys.readouterr()

    def test_missing_file_fails(self, tmp_path, capsys):
        manifest = tmp_path / "m.json"
        with open(manifest, "w") as f:
            json.dump([{"name": "x", "im0": "a", "im1": "b", "gt": "c",
                        "calib": "d"}], f)
        with pytest.raises(SystemExit):
            main(["compare", "--manifest", str(manifest),
                  "--out", str(tmp_path / "o")])
        capsys.readouterr()


class TestEnvOverrides:
    def test_parallelism_env(self, scene, tmp_path, monkeypatch, capsys):
        out = tmp_path / "env"
        monkeypatch.setenv("CYCLOSTEREO_PARALLELISM", "4")
        main(["match", "--left", str(scene / "left.pgm"),
              "--right", str(scene / "right.pgm"),
              "--census", "--calib", str(scene / "calib.txt"),
              "--out", str(out)])
        cfg = json.load(open(out / "config.json"))
        assert cfg["parallelism"] == 4
        capsys.readouterr()
