import numpy as np
import pytest

from cyclostereo.costvolume import (CostVolumeError, build_all, build_slice,
                                    export_slice, fms, read_slice_csv)
from cyclostereo.costvolume import MatchDistanceSlice
from cyclostereo.features import FeatureVolume, double_width
from cyclostereo.fileio import read_pgm
from cyclostereo.geometry import EpipolarGeometry


def unit_volume(rng, h, n, c, doubled=False):
    data = rng.standard_normal((h, n, c))
    data /= np.linalg.norm(data, axis=2, keepdims=True)
    return FeatureVolume(height=h, width_samples=n, channels=c,
                         doubled=doubled, normalized=True,
                         data=data.astype(np.float32))


def geom_for(n, h, dmax):
    return EpipolarGeometry(focal_length_px=10, baseline=1, width=n, height=h,
                            max_disparity_c=dmax)


class TestFms:
    def test_identical_volumes_self_similarity(self):
        rng = np.random.default_rng(0)
        fv = unit_volume(rng, 2, 16, 8, doubled=True)
        for x2 in range(16):
            assert fms(fv, fv, 0, x2, 0) == pytest.approx(1.0, abs=1e-5)

    def test_orthogonal(self):
        a = np.zeros((1, 4, 2), np.float32)
        b = np.zeros((1, 4, 2), np.float32)
        a[..., 0] = 1
        b[..., 1] = 1
        fa = FeatureVolume(1, 4, 2, True, True, a)
        fb = FeatureVolume(1, 4, 2, True, True, b)
        assert fms(fa, fb, 0, 2, 0) == 0.0

    def test_out_of_range_marker(self):
        rng = np.random.default_rng(1)
        fv = unit_volume(rng, 1, 8, 4, doubled=True)
        assert fms(fv, fv, 0, 1, 2) is None  # x2 - d2 < 0
        assert fms(fv, fv, 0, 7, 1) is None  # x2 + d2 > 2N - 1
        assert fms(fv, fv, 0, 6, 1) == pytest.approx(
            float(np.dot(fv.data[0, 7].astype(np.float64), fv.data[0, 5])))

    def test_shifted_argmax_oracle(self):
        # right volume = left shifted by 2*d2_true half-samples
        rng = np.random.default_rng(2)
        left = unit_volume(rng, 1, 32, 12, doubled=True)
        for d2_true in (1, 2, 3):
            right = FeatureVolume(1, 32, 12, True, True,
                                  np.roll(left.data, -2 * d2_true, axis=1))
            for x2 in range(8, 24):
                sims = [fms(left, right, 0, x2, d2) for d2 in range(5)]
                sims = [-2 if s is None else s for s in sims]
                assert int(np.argmax(sims)) == d2_true


class TestBuildSlice:
    def test_identity_zero_track(self):
        rng = np.random.default_rng(3)
        native = unit_volume(rng, 2, 16, 8)
        fv = double_width(native)
        g = geom_for(16, 2, 3)
        sl = build_slice(fv, fv, 0, g)
        assert np.allclose(sl.fm[:, 0], 0.0, atol=1e-5)
        assert sl.fm_max_used == pytest.approx(1.0, abs=1e-5)
        # normalization places an exact zero at the best-match cell
        assert sl.fm[sl.valid].min() == 0.0

    def test_validity_geometry(self):
        rng = np.random.default_rng(4)
        fv = double_width(unit_volume(rng, 1, 10, 4))
        g = geom_for(10, 1, 2)
        sl = build_slice(fv, fv, 0, g)
        nx, nd = g.nx, g.nd
        for x2 in range(nx):
            for d2 in range(nd):
                expect = x2 + d2 <= nx - 1 and x2 - d2 >= 0
                assert sl.valid[x2, d2] == expect
                if not expect:
                    assert sl.fm[x2, d2] == 1.0

    def test_shifted_copy_argmin(self):
        rng = np.random.default_rng(5)
        native = unit_volume(rng, 1, 32, 16)
        left = double_width(native)
        right = FeatureVolume(1, 64, 16, True, True, np.roll(left.data, -4, axis=1))
        g = geom_for(32, 1, 4)
        sl = build_slice(left, right, 0, g)
        for x2 in range(10, 50):
            assert int(np.argmin(sl.fm[x2])) == 2  # d2 = 2 -> shift 4 half-samples

    def test_degenerate_normalizer_flag(self):
        a = np.zeros((1, 8, 2), np.float32)
        b = np.zeros((1, 8, 2), np.float32)
        a[..., 0] = 1
        b[..., 0] = -1  # anti-correlated everywhere
        fa = FeatureVolume(1, 8, 2, True, True, a)
        fb = FeatureVolume(1, 8, 2, True, True, np.abs(b) * -1)
        g = geom_for(4, 1, 1)
        sl = build_slice(fa, fb, 0, g)
        assert sl.degenerate_normalizer
        assert sl.fm_max_used == 1.0
        assert np.all(sl.fm[sl.valid] == 1.0)  # clamped

    def test_native_equals_predoubled(self):
        # on-the-fly bilinear sampling of the native volume reproduces the
        # pre-doubled slice: interpolate (and renormalize) per index here,
        # independently of double_width
        rng = np.random.default_rng(6)
        native_l = unit_volume(rng, 2, 20, 6)
        native_r = unit_volume(rng, 2, 20, 6)
        g = geom_for(20, 2, 3)
        pre = build_slice(double_width(native_l), double_width(native_r), 1, g)

        def sample(native, idx2):
            row = native.data[1].astype(np.float64)
            if idx2 % 2 == 0:
                return row[idx2 // 2]
            i = idx2 // 2
            v = (row[i] + row[min(i + 1, native.width_samples - 1)]) / 2.0
            n = np.linalg.norm(v)
            return v / n if n > 0 else v

        sims = np.zeros((g.nx, g.nd))
        for x2 in range(g.nx):
            for d2 in range(g.nd):
                if pre.valid[x2, d2]:
                    sims[x2, d2] = np.dot(sample(native_l, x2 + d2),
                                          sample(native_r, x2 - d2))
        fm = np.clip(1.0 - sims / sims[pre.valid].max(), 0, 1)
        assert np.allclose(fm[pre.valid], pre.fm[pre.valid], atol=1e-6)

    def test_global_scope(self):
        rng = np.random.default_rng(7)
        left = double_width(unit_volume(rng, 3, 16, 8))
        right = double_width(unit_volume(rng, 3, 16, 8))
        g = geom_for(16, 3, 2)
        slices = build_all(left, right, g, norm_scope="global")
        assert len({sl.fm_max_used for sl in slices}) == 1
        with pytest.raises(CostVolumeError):
            build_all(left, right, g, norm_scope="banana")


class TestExport:
    def test_pgm_quantization(self, tmp_path):
        sl = MatchDistanceSlice(e=0, nx=2, nd=2,
                                fm=np.array([[0.0, 1.0], [0.5, 1.0]]),
                                valid=np.ones((2, 2), bool), fm_max_used=1.0)
        path = tmp_path / "s.pgm"
        export_slice(sl, "pgm", path)
        img = read_pgm(path)
        assert img.tolist() == [[0, 255], [128, 255]]

    def test_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(8)
        fm = rng.random((6, 4))
        sl = MatchDistanceSlice(e=0, nx=6, nd=4, fm=fm,
                                valid=np.ones((6, 4), bool), fm_max_used=1.0)
        path = tmp_path / "s.csv"
        export_slice(sl, "csv", path)
        back = read_slice_csv(path)
        assert np.allclose(back, fm, atol=1e-6)

    def test_identity_black_column(self, tmp_path):
        rng = np.random.default_rng(9)
        fv = double_width(unit_volume(rng, 1, 16, 8))
        g = geom_for(16, 1, 3)
        sl = build_slice(fv, fv, 0, g)
        path = tmp_path / "id.pgm"
        export_slice(sl, "pgm", path)
        img = read_pgm(path)
        assert np.all(img[:, 0] <= 1)  # perfect matches at d2 = 0 render black
