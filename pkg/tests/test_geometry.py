import numpy as np
import pytest

from cfskit.geometry import BBox, ClassLabel, RngHandle, expand, iou, shrink


def random_box(rng, lo=0.0, hi=100.0, max_side=60.0):
    x1 = float(rng.uniform(lo, hi))
    y1 = float(rng.uniform(lo, hi))
    return BBox(x1, y1, x1 + float(rng.uniform(0.5, max_side)), y1 + float(rng.uniform(0.5, max_side)))


class TestBBox:
    def test_dimensions(self):
        b = BBox(2.0, 3.0, 10.0, 7.0)
        assert b.width == 8.0
        assert b.height == 4.0
        assert b.area == 32.0

    def test_invalid_corners_rejected(self):
        with pytest.raises(ValueError):
            BBox(5, 0, 4, 10)
        with pytest.raises(ValueError):
            BBox(0, 5, 10, 4)

    def test_zero_area_is_valid(self):
        b = BBox(3, 3, 3, 9)
        assert b.area == 0.0
        assert iou(b, b) == 0.0
        assert iou(b, BBox(0, 0, 10, 10)) == 0.0

    def test_translate_and_scale(self):
        b = BBox(1, 2, 3, 4)
        assert b.translate(10, -1) == BBox(11, 1, 13, 3)
        assert b.scale(2) == BBox(2, 4, 6, 8)
        with pytest.raises(ValueError):
            b.scale(0)


class TestIou:
    def test_identity(self):
        b = BBox(0, 0, 10, 10)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(BBox(0, 0, 10, 10), BBox(20, 20, 30, 30)) == 0.0

    def test_partial_overlap(self):
        # intersection 2, union 6
        assert iou(BBox(0, 0, 2, 2), BBox(1, 0, 3, 2)) == pytest.approx(1 / 3, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            a, b = random_box(rng), random_box(rng)
            assert iou(a, b) == iou(b, a)

    def test_containment_ratio(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            outer = random_box(rng, max_side=80.0)
            dx = float(rng.uniform(0, outer.width / 4))
            dy = float(rng.uniform(0, outer.height / 4))
            inner = BBox(outer.x1 + dx, outer.y1 + dy, outer.x2 - dx, outer.y2 - dy)
            assert outer.contains(inner)
            assert iou(inner, outer) == pytest.approx(inner.area / outer.area, rel=1e-12)


class TestExpandShrink:
    def test_expand_zero(self):
        assert expand(BBox(10, 10, 20, 20), 0) == BBox(10, 10, 20, 20)

    def test_expand(self):
        assert expand(BBox(10, 10, 20, 20), 5) == BBox(5, 5, 25, 25)

    def test_shrink(self):
        assert shrink(BBox(10, 10, 20, 20), 2) == BBox(12, 12, 18, 18)

    def test_shrink_past_half_extent(self):
        with pytest.raises(ValueError):
            shrink(BBox(10, 10, 20, 20), 5)
        with pytest.raises(ValueError):
            shrink(BBox(0, 0, 10, 40), 6)

    def test_margin_asymmetry_favors_expansion(self):
        # a grown box always has higher IoU with the original than the
        # equally-shrunk one, for any margin below half the min extent
        rng = np.random.default_rng(9)
        for _ in range(500):
            g = random_box(rng, max_side=50.0)
            d = float(rng.uniform(0.01, min(g.width, g.height) / 2 * 0.99))
            assert iou(expand(g, d), g) > iou(shrink(g, d), g)


class TestClassLabel:
    def test_valid(self):
        assert ClassLabel(0, "chart").name == "chart"

    def test_invalid(self):
        with pytest.raises(ValueError):
            ClassLabel(-1, "x")
        with pytest.raises(ValueError):
            ClassLabel(0, "")


class TestRngHandle:
    def test_equal_seeds_equal_streams(self):
        a = RngHandle(1234).generator().uniform(size=32)
        b = RngHandle(1234).generator().uniform(size=32)
        assert np.array_equal(a, b)

    def test_different_seeds_differ(self):
        a = RngHandle(1).generator().uniform(size=16)
        b = RngHandle(2).generator().uniform(size=16)
        assert not np.array_equal(a, b)

    def test_substreams_are_independent_and_reproducible(self):
        root = RngHandle(77)
        s3 = root.substream(3).generator().uniform(size=16)
        s4 = root.substream(4).generator().uniform(size=16)
        assert not np.array_equal(s3, s4)
        assert np.array_equal(s3, RngHandle(77).substream(3).generator().uniform(size=16))
