import math

import numpy as np
import pytest

from moranifs import WeightSequence, attractor_equation_gap, cover, family_system, sample_measure
from moranifs.attractor import (hausdorff_distance, read_binary, read_csv, write_binary, write_csv)

from helpers import cantor


def cantor_points(level):
    """Left endpoints of the level-``level`` Cantor intervals, by ternary digits."""
    pts = np.zeros(1)
    for k in range(1, level + 1):
        pts = np.concatenate([pts, pts + 2 * 3.0 ** -k])
    return np.sort(pts)


class TestCover:
    def test_cantor_cover_matches_construction(self):
        cloud = cover(cantor(), 3.0 ** -6, anchor=[0.0])
        assert np.allclose(np.sort(cloud.points[:, 0]), cantor_points(6), atol=1e-15)
        assert cloud.scale == pytest.approx(3.0 ** -6)

    def test_scale_bounds_distance_to_finer_cover(self):
        sys = family_system("ex57")
        coarse = cover(sys, 1e-2)
        fine = cover(sys, 1e-5)
        assert hausdorff_distance(coarse.points, fine.points) <= coarse.scale + fine.scale

    def test_anchor_outside_rejected(self):
        with pytest.raises(ValueError):
            cover(cantor(), 0.1, anchor=[2.0])

    @pytest.mark.parametrize("name,params", [("constant", {}), ("ex55", {"a_rule": "down"}),
                                             ("ex57", {}), ("ex51", {}), ("ex59", {})])
    def test_attractor_equation(self, name, params):
        gap = attractor_equation_gap(family_system(name, **params), 1e-3)
        assert gap["ok"], gap


class TestSampler:
    def test_points_lie_near_attractor(self):
        sys = cantor()
        cloud = sample_measure(sys, None, 2000, 1e-6, seed=1)
        ref = cover(sys, 3.0 ** -14, anchor=[0.5]).points[:, 0]
        d = np.min(np.abs(cloud.points[:, 0][:, None] - ref[None, ::97]), axis=1)
        assert cloud.scale <= 1e-6
        # nearest cylinder anchor within one 3^-14 cell of some sampled anchor
        idx = np.searchsorted(ref, cloud.points[:, 0])
        idx = np.clip(idx, 1, len(ref) - 1)
        near = np.minimum(np.abs(ref[idx] - cloud.points[:, 0]), np.abs(ref[idx - 1] - cloud.points[:, 0]))
        assert np.all(near <= 3.0 ** -14 + 1e-6)
        assert d.shape == (2000,)

    def test_mean_of_cantor_measure(self):
        pts = sample_measure(cantor(), None, 200_000, 1e-8, seed=7).points[:, 0]
        # symmetric measure on [0,1]: mean 1/2, variance 1/8
        assert pts.mean() == pytest.approx(0.5, abs=4 * math.sqrt(1 / 8 / len(pts)))
        assert pts.var() == pytest.approx(1 / 8, rel=0.02)

    def test_same_seed_same_points_any_thread_count(self):
        sys = family_system("ex53", rho=0.5)
        a = sample_measure(sys, None, 150_000, 1e-7, seed=3, threads=1).points
        b = sample_measure(sys, None, 150_000, 1e-7, seed=3, threads=4).points
        c = sample_measure(sys, None, 150_000, 1e-7, seed=4, threads=4).points
        assert a.tobytes() == b.tobytes()
        assert a.tobytes() != c.tobytes()

    def test_prefix_of_larger_run(self):
        sys = cantor()
        a = sample_measure(sys, None, 1000, 1e-6, seed=5).points
        b = sample_measure(sys, None, 70_000, 1e-6, seed=5).points
        assert np.array_equal(a, b[:1000])

    def test_weighted(self):
        w = WeightSequence.explicit([], [[0.9, 0.1]])
        pts = sample_measure(cantor(), w, 20_000, 1e-6, seed=2).points[:, 0]
        assert np.mean(pts < 0.5) == pytest.approx(0.9, abs=0.01)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            sample_measure(cantor(), None, 0, 1e-3, seed=0)
        with pytest.raises(ValueError):
            sample_measure(cantor(), None, 10, 2.0, seed=0)


class TestIO:
    def test_csv_roundtrip(self, tmp_path):
        cloud = cover(family_system("ex51"), 0.05)
        p = tmp_path / "c.csv"
        write_csv(cloud, p)
        assert np.array_equal(read_csv(p), cloud.points)
        assert p.read_bytes().count(b"\r\n") == len(cloud)

    def test_binary_roundtrip(self, tmp_path):
        cloud = cover(family_system("ex51"), 0.05)
        p = tmp_path / "c.bin"
        write_binary(cloud, p)
        assert p.stat().st_size == 8 * cloud.points.size
        assert np.array_equal(read_binary(p, 2), cloud.points)
