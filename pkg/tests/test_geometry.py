import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planreg.geometry import (TWO_PI, Arc, Point2, Rect, Rotation, TransformBox, arc_rect_dist_max,
                              arc_rect_dist_min, box_center, box_diameter, split_box,
                              translation_rect, uncertainty_arc)


def box(zx0, zy0, zx1, zy1, t0, t1):
    return TransformBox(Point2(zx0, zy0), Point2(zx1, zy1), t0, t1)


def sample_arc(arc, k=100_000):
    phi = np.linspace(arc.theta_min, arc.theta_max, k)
    return arc.radius * np.stack([np.cos(phi), np.sin(phi)], axis=1)


def oracle_min(arc, rect, k=100_000):
    pts = sample_arc(arc, k)
    closest = np.clip(pts, rect.lo, rect.hi)
    return float(((pts - closest) ** 2).sum(axis=1).min())


def oracle_max(arc, rect, k=100_000):
    pts = sample_arc(arc, k)
    corners = np.array([[x, y] for x in (rect.lo[0], rect.hi[0]) for y in (rect.lo[1], rect.hi[1])])
    return float(((pts[:, None, :] - corners[None]) ** 2).sum(axis=2).max())


class TestTransformBox:
    def test_rejects_inverted(self):
        with pytest.raises(ValueError):
            box(1, 0, 0, 1, 0, 1)
        with pytest.raises(ValueError):
            box(0, 0, 1, 1, 1, 0)

    def test_rejects_wide_rotation(self):
        with pytest.raises(ValueError):
            box(0, 0, 1, 1, 0, 7)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            box(0, 0, float("nan"), 1, 0, 1)

    def test_contains(self):
        b = box(0, 0, 1, 1, 0, 1)
        assert b.contains(0.5, 1.0, 0.0)
        assert not b.contains(1.5, 0.5, 0.5)


class TestDiameter:
    def test_degenerate(self):
        assert box_diameter(box(1, 2, 1, 2, 0.3, 0.3)) == 0

    def test_345(self):
        assert box_diameter(box(0, 0, 3, 0, 0, 4)) == pytest.approx(5)

    def test_unit_cube(self):
        assert box_diameter(box(0, 0, 1, 1, 0, 1)) == pytest.approx(math.sqrt(3))


class TestCenter:
    def test_midpoint(self):
        z, t = box_center(box(0, 0, 2, 2, 0, math.pi))
        assert z == (1, 1) and t == pytest.approx(math.pi / 2)

    def test_degenerate(self):
        z, t = box_center(box(5, -1, 5, -1, 0.3, 0.3))
        assert z == (5, -1) and t == 0.3

    def test_symmetric(self):
        z, t = box_center(box(-1, -1, 1, 1, 0, TWO_PI))
        assert z == (0, 0) and t == pytest.approx(math.pi)


class TestSplit:
    def test_zx(self):
        a, b = split_box(box(0, 0, 4, 1, 0, 0.1))
        assert a.z_max.x == 2 and b.z_min.x == 2
        assert a.theta_max == b.theta_max == 0.1

    def test_theta(self):
        a, b = split_box(box(0, 0, 1, 1, 0, math.pi))
        assert a.theta_max == pytest.approx(math.pi / 2) == b.theta_min

    def test_scaled_theta(self):
        a, b = split_box(box(0, 0, 2, 1, 0, 1), angular_scale=4)
        assert a.theta_max == 0.5 and a.z_max.x == 2

    def test_unsplittable(self):
        with pytest.raises(ValueError):
            split_box(box(1, 1, 1, 1, 0, 0))

    @given(st.floats(-5, 5), st.floats(0.01, 5), st.floats(0, 6), st.floats(0.001, 0.28))
    def test_children_partition(self, lo, w, t0, tw):
        parent = box(lo, lo, lo + w, lo + 0.5 * w, t0, t0 + tw)
        a, b = split_box(parent, 3.0)
        assert a.volume() + b.volume() == pytest.approx(parent.volume())
        for child in (a, b):
            assert np.all(child.lo >= parent.lo) and np.all(child.hi <= parent.hi)


class TestRotation:
    def test_matrix(self):
        assert np.allclose(Rotation(math.pi / 2).matrix() @ [1, 0], [0, 1])

    def test_normalized(self):
        assert Rotation(-0.5).normalized().theta == pytest.approx(TWO_PI - 0.5)


class TestArcRectMin:
    def test_circle_to_center(self):
        assert arc_rect_dist_min(Arc(1, 0, TWO_PI), Rect(Point2(0, 0), Point2(0, 0))) == pytest.approx(1)

    def test_intersection(self):
        assert arc_rect_dist_min(Arc(1, 0, 0.1), Rect(Point2(0.9, -0.1), Point2(1.1, 0.1))) == 0

    def test_against_sampling(self):
        arc = Arc(2, math.pi / 2, math.pi)
        rect = Rect(Point2(-4, 1), Point2(-3, 2))
        got = arc_rect_dist_min(arc, rect)
        ref = oracle_min(arc, rect)
        assert got <= ref + 1e-12
        assert ref - got < 1e-4

    def test_rect_inside_circle(self):
        # every rectangle vertex inside the circle: nearest arc point is radial
        got = arc_rect_dist_min(Arc(3, 0, TWO_PI), Rect(Point2(-1, -1), Point2(1, 1)))
        assert got == pytest.approx((3 - math.sqrt(2)) ** 2)

    def test_zero_radius(self):
        assert arc_rect_dist_min(Arc(0, 0, 0), Rect(Point2(3, 4), Point2(5, 6))) == pytest.approx(25)

    def test_invalid_arc(self):
        with pytest.raises(ValueError):
            arc_rect_dist_min(Arc(-1, 0, 1), Rect(Point2(0, 0), Point2(1, 1)))
        with pytest.raises(ValueError):
            arc_rect_dist_min(Arc(1, 1, 0), Rect(Point2(0, 0), Point2(1, 1)))


class TestArcRectMax:
    def test_circle_to_point(self):
        assert arc_rect_dist_max(Arc(1, 0, TWO_PI), Rect(Point2(3, 0), Point2(3, 0))) == pytest.approx(16)

    def test_point_to_point(self):
        assert arc_rect_dist_max(Arc(0, 0, 0), Rect(Point2(1, 1), Point2(1, 1))) == pytest.approx(2)

    def test_against_sampling(self):
        arc = Arc(1, math.pi / 2, math.pi)
        rect = Rect(Point2(0, 0), Point2(1, 1))
        got = arc_rect_dist_max(arc, rect)
        ref = oracle_max(arc, rect)
        assert got >= ref - 1e-12
        assert got - ref < 1e-4


arcs = st.builds(lambda r, a, w: Arc(r, a, a + w),
                 st.floats(0, 5), st.floats(-7, 7), st.floats(0, TWO_PI))
rects = st.builds(lambda x, y, w, h: Rect(Point2(x, y), Point2(x + w, y + h)),
                  st.floats(-6, 6), st.floats(-6, 6), st.floats(0, 4), st.floats(0, 4))


@settings(max_examples=200, deadline=None)
@given(arcs, rects)
def test_min_max_bracket_samples(arc, rect):
    lo, hi = arc_rect_dist_min(arc, rect), arc_rect_dist_max(arc, rect)
    assert lo <= oracle_min(arc, rect, 2000) + 1e-9
    assert hi >= oracle_max(arc, rect, 2000) - 1e-9
    assert lo <= hi + 1e-12


def test_uncertainty_region_contains_images():
    rng = np.random.default_rng(0)
    b = box(-1, 0, 1, 2, 0.5, 1.5)
    p, q = np.array([1.0, 2.0]), np.array([0.3, -0.4])
    arc, rect = uncertainty_arc(p, b), translation_rect(q, b)
    lo, hi = arc_rect_dist_min(arc, rect), arc_rect_dist_max(arc, rect)
    for _ in range(500):
        z = rng.uniform(b.lo[:2], b.hi[:2])
        t = rng.uniform(b.theta_min, b.theta_max)
        img = Rotation(t).matrix() @ p + z
        d = float(((img - q) ** 2).sum())
        assert lo - 1e-12 <= d <= hi + 1e-12
