"""Planar primitives: parameter boxes, rotations and arc/rectangle distances.

All distances returned by this module are *squared* Euclidean distances so
they can be compared directly with the registration objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Rotation:
    theta: float

    def normalized(self) -> "Rotation":
        return Rotation(self.theta % TWO_PI)

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class TransformBox:
    """Axis-aligned box of translations ``z`` and angles ``theta``."""

    z_min: Point2
    z_max: Point2
    theta_min: float
    theta_max: float

    def __post_init__(self):
        object.__setattr__(self, "z_min", Point2(float(self.z_min[0]), float(self.z_min[1])))
        object.__setattr__(self, "z_max", Point2(float(self.z_max[0]), float(self.z_max[1])))
        object.__setattr__(self, "theta_min", float(self.theta_min))
        object.__setattr__(self, "theta_max", float(self.theta_max))
        vals = (*self.z_min, *self.z_max, self.theta_min, self.theta_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("box bounds must be finite")
        if self.z_min.x > self.z_max.x or self.z_min.y > self.z_max.y:
            raise ValueError(f"z_min {self.z_min} exceeds z_max {self.z_max}")
        if self.theta_min > self.theta_max:
            raise ValueError("theta_min exceeds theta_max")
        if self.theta_max - self.theta_min > TWO_PI:
            raise ValueError("angular extent exceeds 2*pi")

    @classmethod
    def from_bounds(cls, lo, hi) -> "TransformBox":
        """Build from two 3-vectors ``(zx, zy, theta)``."""
        return cls(Point2(lo[0], lo[1]), Point2(hi[0], hi[1]), lo[2], hi[2])

    @property
    def lo(self) -> np.ndarray:
        return np.array([self.z_min.x, self.z_min.y, self.theta_min])

    @property
    def hi(self) -> np.ndarray:
        return np.array([self.z_max.x, self.z_max.y, self.theta_max])

    @property
    def extents(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def theta_width(self) -> float:
        return self.theta_max - self.theta_min

    def volume(self) -> float:
        return float(np.prod(self.extents))

    def contains(self, zx: float, zy: float, theta: float) -> bool:
        return (self.z_min.x <= zx <= self.z_max.x and self.z_min.y <= zy <= self.z_max.y
                and self.theta_min <= theta <= self.theta_max)

    def scaled_extents(self, angular_scale: float) -> np.ndarray:
        ext = self.extents
        ext[2] *= angular_scale
        return ext

    def largest_dimension(self, angular_scale: float) -> float:
        return float(self.scaled_extents(angular_scale).max())


@dataclass(frozen=True)
class Arc:
    """Circular arc centered at the origin, counter-clockwise from theta_min."""

    radius: float
    theta_min: float
    theta_max: float


@dataclass(frozen=True)
class Rect:
    lo: Point2
    hi: Point2


def box_diameter(b: TransformBox) -> float:
    return float(np.linalg.norm(b.extents))


def box_center(b: TransformBox) -> tuple[Point2, float]:
    return (Point2(0.5 * (b.z_min.x + b.z_max.x), 0.5 * (b.z_min.y + b.z_max.y)),
            0.5 * (b.theta_min + b.theta_max))


def split_box(b: TransformBox, angular_scale: float = 1.0) -> tuple[TransformBox, TransformBox]:
    """Bisect ``b`` along its longest edge.

    The angular extent is multiplied by ``angular_scale`` before the
    comparison so that it is measured as an arc length. Ties go to the first
    dimension in (zx, zy, theta) order.
    """
    if angular_scale <= 0:
        raise ValueError("angular_scale must be positive")
    ext = b.scaled_extents(angular_scale)
    dim = int(np.argmax(ext))
    lo, hi = b.lo, b.hi
    mid = 0.5 * (lo[dim] + hi[dim])
    if ext[dim] <= 0 or not lo[dim] < mid < hi[dim]:
        raise ValueError("box is too small to split")
    hi1 = hi.copy()
    hi1[dim] = mid
    lo2 = lo.copy()
    lo2[dim] = mid
    return TransformBox.from_bounds(lo, hi1), TransformBox.from_bounds(lo2, hi)


# -- arc / rectangle distances -------------------------------------------------
#
# Kernels take an arc as (radius, a, b) with b - a in [0, 2*pi] and a
# rectangle as (lox, loy, hix, hiy). They are compiled so the candidate queue
# can call them in tight loops.


@njit(cache=True)
def _on_arc(phi, a, span):
    if span >= TWO_PI:
        return True
    t = phi - a
    t -= TWO_PI * math.floor(t / TWO_PI)
    return t <= span


@njit(cache=True)
def _point_rect_dist(x, y, lox, loy, hix, hiy):
    dx = max(lox - x, 0.0, x - hix)
    dy = max(loy - y, 0.0, y - hiy)
    return math.hypot(dx, dy)


@njit(cache=True)
def _edge_hits_arc(c, lo, hi, r, a, span, vertical):
    # circle crossing of the line {coord == c} restricted to [lo, hi]
    if c * c > r * r:
        return False
    h = math.sqrt(r * r - c * c)
    for t in (h, -h):
        if lo <= t <= hi:
            phi = math.atan2(t, c) if vertical else math.atan2(c, t)
            if _on_arc(phi, a, span):
                return True
    return False


@njit(cache=True)
def arc_rect_min(r, a, b, lox, loy, hix, hiy):
    """Euclidean minimum distance between an arc and a rectangle."""
    span = b - a
    ax, ay = r * math.cos(a), r * math.sin(a)
    bx, by = r * math.cos(b), r * math.sin(b)
    if lox <= ax <= hix and loy <= ay <= hiy:
        return 0.0
    if lox <= bx <= hix and loy <= by <= hiy:
        return 0.0
    if (_edge_hits_arc(lox, loy, hiy, r, a, span, True)
            or _edge_hits_arc(hix, loy, hiy, r, a, span, True)
            or _edge_hits_arc(loy, lox, hix, r, a, span, False)
            or _edge_hits_arc(hiy, lox, hix, r, a, span, False)):
        return 0.0

    best = min(_point_rect_dist(ax, ay, lox, loy, hix, hiy),
               _point_rect_dist(bx, by, lox, loy, hix, hiy))
    # rectangle vertex against arc interior
    for vx in (lox, hix):
        for vy in (loy, hiy):
            nv = math.hypot(vx, vy)
            if nv == 0.0:
                best = min(best, r)
            elif _on_arc(math.atan2(vy, vx), a, span):
                best = min(best, abs(nv - r))
    # edge interior against arc interior: only the foot of the perpendicular
    # from the center can be a local minimum, and only outside the circle
    if loy <= 0.0 <= hiy:
        for vx in (lox, hix):
            if abs(vx) > r and _on_arc(math.atan2(0.0, vx), a, span):
                best = min(best, abs(vx) - r)
    if lox <= 0.0 <= hix:
        for vy in (loy, hiy):
            if abs(vy) > r and _on_arc(math.atan2(vy, 0.0), a, span):
                best = min(best, abs(vy) - r)
    return best


@njit(cache=True)
def arc_rect_max(r, a, b, lox, loy, hix, hiy):
    """Euclidean maximum distance between an arc and a rectangle."""
    span = b - a
    ax, ay = r * math.cos(a), r * math.sin(a)
    bx, by = r * math.cos(b), r * math.sin(b)
    best = 0.0
    for vx in (lox, hix):
        for vy in (loy, hiy):
            nv = math.hypot(vx, vy)
            if nv == 0.0 or _on_arc(math.atan2(-vy, -vx), a, span):
                d = nv + r
            else:
                d = max(math.hypot(vx - ax, vy - ay), math.hypot(vx - bx, vy - by))
            best = max(best, d)
    return best


@njit(cache=True)
def arc_rect_min_sq(r, a, b, lox, loy, hix, hiy):
    d = arc_rect_min(r, a, b, lox, loy, hix, hiy)
    return d * d


@njit(cache=True)
def arc_rect_max_sq(r, a, b, lox, loy, hix, hiy):
    d = arc_rect_max(r, a, b, lox, loy, hix, hiy)
    return d * d


def _check_arc(arc: Arc):
    if not (math.isfinite(arc.radius) and arc.radius >= 0):
        raise ValueError("arc radius must be finite and non-negative")
    span = arc.theta_max - arc.theta_min
    if not 0 <= span <= TWO_PI:
        raise ValueError("arc angular span must lie in [0, 2*pi]")


def arc_rect_dist_min(arc: Arc, rect: Rect) -> float:
    """Squared minimum distance between ``arc`` and ``rect``."""
    _check_arc(arc)
    return arc_rect_min_sq(float(arc.radius), float(arc.theta_min), float(arc.theta_max),
                           float(rect.lo[0]), float(rect.lo[1]), float(rect.hi[0]), float(rect.hi[1]))


def arc_rect_dist_max(arc: Arc, rect: Rect) -> float:
    """Squared maximum distance between ``arc`` and ``rect``."""
    _check_arc(arc)
    return arc_rect_max_sq(float(arc.radius), float(arc.theta_min), float(arc.theta_max),
                           float(rect.lo[0]), float(rect.lo[1]), float(rect.hi[0]), float(rect.hi[1]))


def uncertainty_arc(p, box: TransformBox) -> Arc:
    """Arc swept by ``R(theta) p`` for theta in the box."""
    phi = math.atan2(p[1], p[0])
    return Arc(math.hypot(p[0], p[1]), box.theta_min + phi, box.theta_max + phi)


def translation_rect(q, box: TransformBox) -> Rect:
    """Rectangle ``{x : q - z_max <= x <= q - z_min}``."""
    return Rect(Point2(q[0] - box.z_max.x, q[1] - box.z_max.y),
                Point2(q[0] - box.z_min.x, q[1] - box.z_min.y))
