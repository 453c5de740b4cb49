"""Relaxation lower bound.

Each squared distance ``f(z, c, s) = |[c -s; s c] P + z - Q|^2`` is convex in
``(z, c, s)``, so its tangent plane at the box center under-estimates it
everywhere. Replacing the unit-circle constraint on ``(c, s)`` by a trapezoid
that encloses the rotation arc turns the trimmed problem into the minimum of
a concave function over a polytope, which is attained at one of its 16
vertices (4 translation corners x 4 trapezoid corners).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from planreg.geometry import Point2, TransformBox, box_center
from planreg.queue import CandidateQueue, QueueSet


@dataclass(frozen=True)
class LinearizationPoint:
    z0: Point2
    c0: float
    s0: float

    @classmethod
    def at_center(cls, box: TransformBox) -> "LinearizationPoint":
        z, theta = box_center(box)
        return cls(z, math.cos(theta), math.sin(theta))


@dataclass(frozen=True)
class Trapezoid:
    """Vertices in order: inner chord (lo, hi), then outer side (hi, lo)."""

    vertices: np.ndarray  # (4, 2) in (c, s) coordinates

    def halfplanes(self) -> tuple[np.ndarray, np.ndarray]:
        """``(A, b)`` with the trapezoid equal to ``{x : A x <= b}``.

        Only meaningful for a non-degenerate trapezoid.
        """
        v = self.vertices
        # counter-clockwise orientation: chord lo->hi runs clockwise around the
        # origin as seen from outside, so walk the reverse order
        ring = v[::-1]
        normals, offsets = [], []
        for k in range(4):
            a, b = ring[k], ring[(k + 1) % 4]
            e = b - a
            nrm = np.array([e[1], -e[0]])
            normals.append(nrm)
            offsets.append(nrm @ a)
        return np.array(normals), np.array(offsets)


def build_trapezoid(theta_min: float, theta_max: float) -> Trapezoid:
    """Isosceles trapezoid enclosing the unit arc ``[theta_min, theta_max]``.

    The inner side is the chord between the arc endpoints; the outer side lies
    on the tangent at the mid angle, with its corners on the endpoint rays.
    """
    width = theta_max - theta_min
    if not 0 <= width < math.pi:
        raise ValueError("trapezoid needs an angular width in [0, pi)")
    stretch = 1.0 / math.cos(0.5 * width)
    lo = np.array([math.cos(theta_min), math.sin(theta_min)])
    hi = np.array([math.cos(theta_max), math.sin(theta_max)])
    return Trapezoid(np.array([lo, hi, stretch * hi, stretch * lo]))


def vertex_set(box: TransformBox, trap: Trapezoid) -> np.ndarray:
    """``(16, 4)`` array of ``(zx, zy, c, s)`` vertices of the relaxed domain."""
    corners = np.array([[x, y] for x in (box.z_min.x, box.z_max.x)
                        for y in (box.z_min.y, box.z_max.y)])
    return np.array([[*z, *cs] for z in corners for cs in trap.vertices])


def squared_distance(p, q, at) -> float:
    """``f_{P,Q}(z, c, s)`` with ``at = (z, c, s)``."""
    z, c, s = at
    rx = c * p[0] - s * p[1] + z[0] - q[0]
    ry = s * p[0] + c * p[1] + z[1] - q[1]
    return rx * rx + ry * ry


def linearized_dist(p, q, lin: LinearizationPoint, at) -> float:
    """First-order expansion of ``f_{P,Q}`` around ``lin`` evaluated at ``at``.

    With residual ``r(z, c, s) = c P + s P_perp + z - Q`` the gradient is
    ``2 r0 . dr`` so the tangent plane reduces to ``2 r0 . r(at) - |r0|^2``.
    """
    z, c, s = at
    px, py = p
    r0x = lin.c0 * px - lin.s0 * py + lin.z0[0] - q[0]
    r0y = lin.s0 * px + lin.c0 * py + lin.z0[1] - q[1]
    rx = c * px - s * py + z[0] - q[0]
    ry = s * px + c * py + z[1] - q[1]
    return 2.0 * (r0x * rx + r0y * ry) - (r0x * r0x + r0y * r0y)


def linearized_gradient(p, q, lin: LinearizationPoint) -> np.ndarray:
    """Gradient of ``f_{P,Q}`` at ``lin`` in ``(zx, zy, c, s)`` order."""
    px, py = p
    r0x = lin.c0 * px - lin.s0 * py + lin.z0[0] - q[0]
    r0y = lin.s0 * px + lin.c0 * py + lin.z0[1] - q[1]
    return 2.0 * np.array([r0x, r0y, r0x * px + r0y * py, -r0x * py + r0y * px])


def relaxation_bound(box: TransformBox, queues: Union[QueueSet, Sequence[CandidateQueue]],
                     src, dest, p: int) -> float:
    """Minimum over the 16 polytope vertices of the trimmed sum of linearized
    nearest distances, restricted to the candidates still in each queue."""
    if not box.theta_width < 0.5 * math.pi:
        raise ValueError("relaxation bound requires an angular width below pi/2")
    if not isinstance(queues, QueueSet):
        queues = QueueSet.from_queues(queues)
    src = np.asarray(src, dtype=float)
    dest = np.asarray(dest, dtype=float)
    n = len(src)
    if not 1 <= p <= n:
        raise ValueError(f"trim count p={p} outside [1, {n}]")

    lin = LinearizationPoint.at_center(box)
    owner = np.repeat(np.arange(n), queues.sizes())
    P = src[owner]
    Q = dest[queues.idx]
    perp = np.stack([-P[:, 1], P[:, 0]], axis=1)
    r0 = lin.c0 * P + lin.s0 * perp + np.asarray(lin.z0) - Q
    r0_sq = (r0 ** 2).sum(axis=1)
    # r(v) = c P + s P_perp + z - Q; tangent plane = 2 r0 . r(v) - |r0|^2
    r0_P = (r0 * P).sum(axis=1)
    r0_perp = (r0 * perp).sum(axis=1)
    r0_Q = (r0 * Q).sum(axis=1)

    verts = vertex_set(box, build_trapezoid(box.theta_min, box.theta_max))
    vals = 2.0 * (verts[:, 2:3] * r0_P + verts[:, 3:4] * r0_perp
                  + verts[:, 0:1] * r0[:, 0] + verts[:, 1:2] * r0[:, 1] - r0_Q) - r0_sq
    per_point = np.minimum.reduceat(vals, queues.offsets[:-1], axis=1)
    per_point.sort(axis=1)
    return float(per_point[:, :p].sum(axis=1).min())
