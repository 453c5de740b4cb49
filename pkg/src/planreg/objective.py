"""Rigid transforms and the trimmed nearest-neighbour objective."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from planreg.geometry import Point2


@dataclass(frozen=True)
class RigidTransform2:
    """``x -> R(theta) x + z``."""

    z: Point2 = Point2(0.0, 0.0)
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "z", Point2(float(self.z[0]), float(self.z[1])))
        object.__setattr__(self, "theta", float(self.theta))
        if not all(math.isfinite(v) for v in (*self.z, self.theta)):
            raise ValueError("transform components must be finite")

    @classmethod
    def identity(cls) -> "RigidTransform2":
        return cls()

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])

    def apply(self, points) -> np.ndarray:
        """Transform a single point ``(2,)`` or an array of points ``(k, 2)``."""
        pts = np.asarray(points, dtype=float)
        c, s = math.cos(self.theta), math.sin(self.theta)
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([c * x - s * y + self.z.x, s * x + c * y + self.z.y], axis=-1)

    def compose(self, other: "RigidTransform2") -> "RigidTransform2":
        """``self o other``: apply ``other`` first."""
        z = self.apply(np.array(other.z))
        return RigidTransform2(Point2(z[0], z[1]), self.theta + other.theta)

    def inverse(self) -> "RigidTransform2":
        c, s = math.cos(self.theta), math.sin(self.theta)
        zx, zy = self.z
        return RigidTransform2(Point2(-(c * zx + s * zy), -(-s * zx + c * zy)), -self.theta)

    def canonical(self) -> "RigidTransform2":
        return RigidTransform2(self.z, self.theta % (2 * math.pi))

    def to_dict(self) -> dict:
        return {"zx": self.z.x, "zy": self.z.y, "theta": self.theta}

    @classmethod
    def from_dict(cls, d: dict) -> "RigidTransform2":
        return cls(Point2(d["zx"], d["zy"]), d["theta"])


def as_point_set(points) -> np.ndarray:
    """Validate and return an ``(n, 2)`` float array."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"point set must have shape (n, 2), got {arr.shape}")
    if len(arr) == 0:
        raise ValueError("point set is empty")
    if not np.isfinite(arr).all():
        raise ValueError("point set contains non-finite coordinates")
    return arr


def trim_count(fraction: float, n: int) -> int:
    """``ceil(fraction * n)`` clipped to ``[1, n]``, robust to float noise."""
    if not 0 < fraction <= 1:
        raise ValueError("trim fraction must lie in (0, 1]")
    return min(n, max(1, math.ceil(round(fraction * n, 9))))


def apply_transform(t: RigidTransform2, x) -> np.ndarray:
    return t.apply(x)


def point_to_set_sq(t: RigidTransform2, x, dest) -> tuple[float, int]:
    """Squared distance from ``t(x)`` to its nearest point of ``dest`` and its index."""
    y = t.apply(x)
    d = ((np.asarray(dest, dtype=float) - y) ** 2).sum(axis=1)
    j = int(np.argmin(d))  # first minimiser on ties
    return float(d[j]), j


def residuals(t: RigidTransform2, src, dest) -> np.ndarray:
    """Per-source-point squared nearest-neighbour distance (brute force)."""
    y = t.apply(src)
    diff = y[:, None, :] - np.asarray(dest, dtype=float)[None, :, :]
    return (diff ** 2).sum(axis=2).min(axis=1)


def _check_p(p: int, n: int):
    if not 1 <= p <= n:
        raise ValueError(f"trim count p={p} outside [1, {n}]")


def trimmed_objective(t: RigidTransform2, src, dest, p: int) -> float:
    """Sum of the ``p`` smallest per-point residuals."""
    return sum_smallest(residuals(t, src, dest), p)


def inlier_indices(t: RigidTransform2, src, dest, p: int) -> np.ndarray:
    """Indices of the ``p`` source points kept by the trimmed objective.

    Ties at the trim boundary favour smaller source indices.
    """
    res = residuals(t, src, dest)
    _check_p(p, len(res))
    return np.sort(np.argsort(res, kind="stable")[:p])


def sum_smallest(values, p: int) -> float:
    """Sum of the ``p`` smallest entries of ``values``."""
    vals = np.asarray(values, dtype=float)
    _check_p(p, len(vals))
    return float(np.sort(vals)[:p].sum())
