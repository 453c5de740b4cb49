"""Random benchmark instances, point-set files and pose-graph map composition."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import networkx as nx
import numpy as np

from planreg.geometry import Point2
from planreg.objective import RigidTransform2, as_point_set


@dataclass(frozen=True)
class InstanceSpec:
    n: int
    sigma: float = 0.0
    outlier_fraction: float = 0.1
    coord_range: tuple[float, float] = (-10.0, 10.0)
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not 0 <= self.outlier_fraction <= 1:
            raise ValueError("outlier_fraction must lie in [0, 1]")
        lo, hi = self.coord_range
        if not lo < hi:
            raise ValueError("coord_range must be an increasing interval")

    @property
    def n_outliers(self) -> int:
        return math.ceil(round(self.outlier_fraction * self.n, 9))


@dataclass
class Instance:
    src: np.ndarray
    dest: np.ndarray
    true_transform: RigidTransform2
    outlier_mask: np.ndarray
    spec: Optional[InstanceSpec] = None

    def to_dict(self) -> dict:
        return {
            "src": self.src.tolist(),
            "dest": self.dest.tolist(),
            "true_transform": self.true_transform.to_dict(),
            "outlier_mask": [bool(o) for o in self.outlier_mask],
            "spec": asdict(self.spec) if self.spec else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        spec = d.get("spec")
        if spec is not None:
            spec = InstanceSpec(**{**spec, "coord_range": tuple(spec["coord_range"])})
        return cls(as_point_set(d["src"]), as_point_set(d["dest"]),
                   RigidTransform2.from_dict(d["true_transform"]),
                   np.asarray(d["outlier_mask"], dtype=bool), spec)


def generate_instance(spec: InstanceSpec) -> Instance:
    """Source points uniform in the coordinate range; destination is the
    transformed source plus per-axis gaussian noise for inliers and per-axis
    uniform noise over the coordinate range for the chosen outliers."""
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.coord_range
    n = spec.n
    src = rng.uniform(lo, hi, size=(n, 2))
    z = rng.uniform(lo, hi, size=2)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    outliers = np.zeros(n, dtype=bool)
    outliers[rng.choice(n, size=spec.n_outliers, replace=False)] = True
    eta = rng.normal(0.0, spec.sigma, size=(n, 2))
    gamma = rng.uniform(lo, hi, size=(n, 2))
    t = RigidTransform2(Point2(z[0], z[1]), theta)
    dest = t.apply(src) + np.where(outliers[:, None], gamma, eta)
    return Instance(src, dest, t, outliers, spec)


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(inst.to_dict(), indent=1) + "\n")


def load_instance(path) -> Instance:
    return Instance.from_dict(json.loads(Path(path).read_text()))


# -- point-set text files --------------------------------------------------


def write_point_set(points, path) -> None:
    pts = as_point_set(points)
    lines = [f"{x!r} {y!r}" for x, y in pts.tolist()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_point_set(path) -> np.ndarray:
    """Read whitespace separated ``x y`` lines; ``#`` lines and blanks are skipped."""
    pts = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two numbers, got {s!r}")
            try:
                x, y = float(parts[0]), float(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed number in {s!r}") from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError(f"{path}:{lineno}: non-finite coordinate")
            pts.append((x, y))
    if not pts:
        raise ValueError(f"{path}: no points")
    return np.array(pts)


# -- pose graphs -------------------------------------------------------------


@dataclass
class PoseGraph:
    """Undirected graph over scans.

    ``edges[(i, j)]`` with ``i < j`` holds ``(weight, t)`` where ``t`` maps
    frame-``i`` coordinates into frame ``j``.
    """

    size: int
    edges: dict = field(default_factory=dict)
    names: list = field(default_factory=list)
    scans: list = field(default_factory=list)
    trim_fraction: float = 0.8

    def add_edge(self, i: int, j: int, weight: float, t: RigidTransform2):
        if weight < 0:
            raise ValueError("edge weight must be non-negative")
        if i == j:
            raise ValueError("self loops are not allowed")
        if i > j:
            i, j, t = j, i, t.inverse()
        self.edges[(i, j)] = (float(weight), t)

    def transform(self, i: int, j: int) -> RigidTransform2:
        """Edge transform from frame ``i`` to frame ``j``."""
        if i < j:
            return self.edges[(i, j)][1]
        return self.edges[(j, i)][1].inverse()

    def to_dict(self) -> dict:
        return {
            "S": self.size,
            "names": list(self.names),
            "scans": [str(s) for s in self.scans],
            "trim_fraction": self.trim_fraction,
            "edges": [{"i": i, "j": j, "weight": w, "transform": t.to_dict()}
                      for (i, j), (w, t) in sorted(self.edges.items())],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PoseGraph":
        g = cls(int(d["S"]), names=list(d.get("names", [])), scans=list(d.get("scans", [])),
                trim_fraction=float(d.get("trim_fraction", 0.8)))
        for e in d["edges"]:
            g.add_edge(int(e["i"]), int(e["j"]), float(e["weight"]),
                       RigidTransform2.from_dict(e["transform"]))
        return g


def save_pose_graph(g: PoseGraph, path) -> None:
    Path(path).write_text(json.dumps(g.to_dict(), indent=1) + "\n")


def load_pose_graph(path) -> PoseGraph:
    return PoseGraph.from_dict(json.loads(Path(path).read_text()))


def shortest_paths(graph: PoseGraph, reference: int = 0) -> dict[int, list[int]]:
    """Minimum-weight path from every node to ``reference`` (node first)."""
    if not 0 <= reference < graph.size:
        raise ValueError("reference node out of range")
    g = nx.Graph()
    g.add_nodes_from(range(graph.size))
    for (i, j), (w, _) in graph.edges.items():
        g.add_edge(i, j, weight=w)
    paths = nx.single_source_dijkstra_path(g, reference, weight="weight")
    if len(paths) != graph.size:
        missing = sorted(set(range(graph.size)) - set(paths))
        raise ValueError(f"pose graph is disconnected; unreachable nodes {missing}")
    return {i: list(reversed(path)) for i, path in paths.items()}


def compose_map(graph: PoseGraph, reference: int = 0) -> list[RigidTransform2]:
    """Pose of every scan in the reference frame.

    The pose of node ``i`` maps frame-``i`` coordinates into the reference
    frame and is the composition of the edge transforms along the
    minimum-weight path from ``i`` to the reference.
    """
    poses = []
    for i, path in sorted(shortest_paths(graph, reference).items()):
        pose = RigidTransform2.identity()
        for a, b in zip(path, path[1:]):
            pose = graph.transform(a, b).compose(pose)
        poses.append(pose.canonical())
    return poses


def synthetic_scans(n_points: int, poses: Sequence[RigidTransform2], sigma: float = 0.0,
                    seed: int = 0, coord_range=(-10.0, 10.0)) -> list[np.ndarray]:
    """Scans of one master point set seen from each pose.

    Scan ``k`` holds the master points expressed in frame ``k``, i.e. mapped
    by the inverse of ``poses[k]``, plus per-axis gaussian noise.
    """
    rng = np.random.default_rng(seed)
    master = rng.uniform(*coord_range, size=(n_points, 2))
    return [pose.inverse().apply(master) + rng.normal(0.0, sigma, size=master.shape)
            for pose in poses]
