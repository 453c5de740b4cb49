import math

import numpy as np
import pytest

from planreg.geometry import Point2, TransformBox
from planreg.queue import cheap_bound, init_queues
from planreg.relaxation import (LinearizationPoint, build_trapezoid, linearized_dist,
                                linearized_gradient, relaxation_bound, squared_distance, vertex_set)


def box(zx0, zy0, zx1, zy1, t0, t1):
    return TransformBox(Point2(zx0, zy0), Point2(zx1, zy1), t0, t1)


def sampled_min(b, src, dest, p, rng, k=10_000):
    zs = rng.uniform(b.lo[:2], b.hi[:2], (k, 2))
    ts = rng.uniform(b.theta_min, b.theta_max, k)
    c, s = np.cos(ts)[:, None], np.sin(ts)[:, None]
    img = np.stack([c * src[:, 0] - s * src[:, 1] + zs[:, :1],
                    s * src[:, 0] + c * src[:, 1] + zs[:, 1:]], axis=-1)
    d = ((img[:, :, None, :] - dest[None, None]) ** 2).sum(-1).min(-1)
    return float(np.sort(d, axis=1)[:, :p].sum(axis=1).min())


class TestTrapezoid:
    def test_degenerate(self):
        v = build_trapezoid(0.4, 0.4).vertices
        assert np.allclose(v, [math.cos(0.4), math.sin(0.4)])

    def test_quarter(self):
        v = build_trapezoid(0, math.pi / 2).vertices
        assert np.allclose(v, [[1, 0], [0, 1], [0, math.sqrt(2)], [math.sqrt(2), 0]])
        chord_mid = 0.5 * (v[0] + v[1])
        arc_mid = np.array([math.cos(math.pi / 4), math.sin(math.pi / 4)])
        assert np.linalg.norm(arc_mid - chord_mid) == pytest.approx(1 - math.cos(math.pi / 4))

    def test_contains_arc(self):
        A, b = build_trapezoid(0.3, 0.7).halfplanes()
        phi = np.linspace(0.3, 0.7, 1000)
        pts = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        assert np.all(pts @ A.T <= b + 1e-12)
        # and a point just outside the arc's chord side is excluded
        mid = 0.5 * (pts[0] + pts[-1]) * 0.99
        assert np.any(A @ mid > b)

    def test_too_wide(self):
        with pytest.raises(ValueError):
            build_trapezoid(0, math.pi)

    def test_vertex_count(self):
        b = box(0, 0, 1, 2, 0.1, 0.5)
        verts = vertex_set(b, build_trapezoid(0.1, 0.5))
        assert verts.shape == (16, 4)
        assert len({tuple(v) for v in verts.round(12)}) == 16


class TestLinearization:
    def setup_method(self):
        self.rng = np.random.default_rng(0)

    def random_case(self):
        p, q = self.rng.uniform(-3, 3, 2), self.rng.uniform(-3, 3, 2)
        th = self.rng.uniform(0, 6)
        lin = LinearizationPoint(Point2(*self.rng.uniform(-1, 1, 2)), math.cos(th), math.sin(th))
        return p, q, lin

    def test_exact_at_expansion_point(self):
        for _ in range(20):
            p, q, lin = self.random_case()
            at = (lin.z0, lin.c0, lin.s0)
            assert linearized_dist(p, q, lin, at) == pytest.approx(squared_distance(p, q, at))

    def test_under_estimates(self):
        for _ in range(200):
            p, q, lin = self.random_case()
            at = (self.rng.uniform(-3, 3, 2), *self.rng.uniform(-2, 2, 2))
            assert linearized_dist(p, q, lin, at) <= squared_distance(p, q, at) + 1e-9

    def test_gradient_finite_differences(self):
        h = 1e-6
        for _ in range(20):
            p, q, lin = self.random_case()
            x0 = np.array([lin.z0[0], lin.z0[1], lin.c0, lin.s0])
            g = linearized_gradient(p, q, lin)
            fd = np.empty(4)
            for k in range(4):
                e = np.zeros(4)
                e[k] = h
                hi, lo = x0 + e, x0 - e
                fd[k] = (squared_distance(p, q, (hi[:2], hi[2], hi[3]))
                         - squared_distance(p, q, (lo[:2], lo[2], lo[3]))) / (2 * h)
            assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-8)


class TestRelaxationBound:
    def test_sound_on_small_box(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            src = rng.uniform(-3, 3, (10, 2))
            t = rng.uniform(0, 6)
            dest = src @ np.array([[math.cos(t), math.sin(t)], [-math.sin(t), math.cos(t)]]) + 0.5
            dest = dest + rng.normal(0, 0.1, dest.shape)
            b = box(0.4, 0.45, 0.6, 0.55, t - 0.05, t + 0.05)
            qs, _ = init_queues(b, src, dest)
            phi_r = relaxation_bound(b, qs, src, dest, 8)
            assert phi_r <= sampled_min(b, src, dest, 8, rng)

    def test_requires_narrow_angle(self):
        src = np.zeros((2, 2))
        b = box(0, 0, 1, 1, 0, 2)
        qs, _ = init_queues(b, src, src)
        with pytest.raises(ValueError):
            relaxation_bound(b, qs, src, src, 1)

    def test_beats_cheap_bound_on_tiny_box(self):
        rng = np.random.default_rng(2)
        src, dest = rng.uniform(-3, 3, (10, 2)), rng.uniform(-3, 3, (10, 2))
        b = box(0.3, -0.2, 0.3 + 1e-3, -0.2 + 1e-3, 1.0, 1.0 + 1e-4)
        qs, _ = init_queues(b, src, dest)
        assert relaxation_bound(b, qs, src, dest, 8) > cheap_bound(qs, 8)

    def test_accepts_queue_list(self):
        rng = np.random.default_rng(3)
        src, dest = rng.uniform(-3, 3, (5, 2)), rng.uniform(-3, 3, (5, 2))
        b = box(0, 0, 0.1, 0.1, 0.2, 0.3)
        qs, _ = init_queues(b, src, dest)
        assert relaxation_bound(b, list(qs), src, dest, 4) == relaxation_bound(b, qs, src, dest, 4)

    def test_matches_scalar_definition(self):
        rng = np.random.default_rng(4)
        src, dest = rng.uniform(-3, 3, (6, 2)), rng.uniform(-3, 3, (7, 2))
        b = box(0, 0, 0.2, 0.1, 0.2, 0.4)
        qs, _ = init_queues(b, src, dest)
        lin = LinearizationPoint.at_center(b)
        best = math.inf
        for v in vertex_set(b, build_trapezoid(b.theta_min, b.theta_max)):
            at = (v[:2], v[2], v[3])
            per_point = [min(linearized_dist(src[i], dest[j], lin, at) for j in qs[i].idx)
                         for i in range(len(src))]
            best = min(best, sum(sorted(per_point)[:5]))
        assert relaxation_bound(b, qs, src, dest, 5) == pytest.approx(best, rel=1e-10, abs=1e-10)
