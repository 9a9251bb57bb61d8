import math

import numpy as np
import pytest

from cyclostereo.geometry import (EpipolarGeometry, GeometryError,
                                  cyclopean_depth, cyclopean_to_lr,
                                  lr_depth_bias, lr_to_cyclopean)


def geom(**kw):
    base = dict(focal_length_px=100.0, baseline=1.0, width=64, height=4,
                max_disparity_c=8)
    base.update(kw)
    return EpipolarGeometry(**base)


class TestTransform:
    def test_basic(self):
        c = lr_to_cyclopean(6, 4, 64)
        assert (c.x, c.d) == (5.0, 1.0)

    def test_zero_disparity(self):
        c = lr_to_cyclopean(3, 3, 64)
        assert (c.x, c.d) == (3.0, 0.0)

    def test_half_grid(self):
        c = lr_to_cyclopean(4, 3, 64)
        assert (c.x, c.d) == (3.5, 0.5)

    def test_inverse(self):
        assert cyclopean_to_lr(5, 1, 64) == (6.0, 4.0)
        assert cyclopean_to_lr(0, 0, 64) == (0.0, 0.0)
        assert cyclopean_to_lr(3.5, 0.5, 64) == (4.0, 3.0)

    def test_out_of_range(self):
        with pytest.raises(GeometryError, match="l="):
            lr_to_cyclopean(64, 3, 64)
        with pytest.raises(GeometryError, match="r="):
            lr_to_cyclopean(3, -1, 64)
        with pytest.raises(GeometryError, match="implied l"):
            cyclopean_to_lr(63, 1, 64)

    def test_off_grid_rejected(self):
        with pytest.raises(GeometryError):
            lr_to_cyclopean(3.25, 3, 64)
        with pytest.raises(GeometryError):
            lr_to_cyclopean(3.5, 3, 64)  # mixed parity -> quarter-grid x

    def test_round_trip_exhaustive_n64(self):
        # every half-grid (x, d) whose implied l, r stay inside the image
        n = 64
        for x2 in range(2 * n):
            for d2 in range(-x2, x2 + 1):
                l2, r2 = x2 + d2, x2 - d2
                if not (0 <= l2 <= 2 * (n - 1) and 0 <= r2 <= 2 * (n - 1)):
                    continue
                l, r = cyclopean_to_lr(x2 / 2, d2 / 2, n)
                c = lr_to_cyclopean(l, r, n)
                assert (c.x2, c.d2) == (x2, d2)


class TestDepth:
    def test_unit(self):
        g = geom(focal_length_px=1.0, baseline=1.0)
        assert cyclopean_depth(0.5, g) == 1.0

    def test_factor_two(self):
        g = geom(focal_length_px=100.0, baseline=0.5)
        assert cyclopean_depth(1.0, g) == 25.0

    def test_at_infinity(self):
        with pytest.raises(GeometryError, match="infinity"):
            cyclopean_depth(0.0, geom())

    def test_offset(self):
        g = geom(disparity_offset=2.0)
        assert cyclopean_depth(1.0, g) == pytest.approx(100.0 / 4.0)

    def test_monotone_decreasing(self):
        g = geom()
        depths = [cyclopean_depth(d / 2, g) for d in range(1, 16)]
        assert all(a > b for a, b in zip(depths, depths[1:]))

    def test_inverse_consistency(self):
        g = geom(disparity_offset=3.25)
        for d in np.linspace(0.5, 7.5, 29):
            z = cyclopean_depth(d, g)
            back = (g.focal_length_px * g.baseline / z - g.disparity_offset) / 2
            assert back == pytest.approx(d, abs=1e-9)


class TestDepthBias:
    def test_degenerate_baseline(self):
        assert lr_depth_bias(1.0, 0.0, 0.0) == (1.0, 1.0)

    def test_3_4_5(self):
        assert lr_depth_bias(3.0, 2.0, 4.0) == (3.0, 5.0)

    def test_symmetric_point(self):
        dl, dr = lr_depth_bias(1.0, 0.0, 2.0)
        assert dl == pytest.approx(math.sqrt(2))
        assert dr == pytest.approx(math.sqrt(2))

    def test_dominance_random(self):
        rng = np.random.default_rng(0)
        for _ in range(2000):
            zc = rng.uniform(0.01, 100)
            off = rng.uniform(-50, 50)
            b = rng.uniform(0, 10)
            dl, dr = lr_depth_bias(zc, off, b)
            assert dl >= zc and dr >= zc

    def test_swap_symmetry(self):
        dl, dr = lr_depth_bias(2.0, 1.5, 3.0)
        dl2, dr2 = lr_depth_bias(2.0, -1.5, 3.0)
        assert (dl, dr) == (dr2, dl2)


class TestGeometryValidation:
    def test_invariants(self):
        with pytest.raises(GeometryError):
            geom(focal_length_px=0)
        with pytest.raises(GeometryError):
            geom(baseline=-1)
        with pytest.raises(GeometryError):
            geom(width=1)
        with pytest.raises(GeometryError):
            geom(max_disparity_c=0)
        with pytest.raises(GeometryError):
            geom(max_disparity_c=40)  # > (width-1)/2

    def test_grid_sizes(self):
        g = geom()
        assert g.nx == 128
        assert g.nd == 17
