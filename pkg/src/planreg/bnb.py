"""Best-first branch and bound over boxes of planar rigid transforms."""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from planreg.geometry import TWO_PI, Point2, TransformBox, box_center, split_box
from planreg.objective import (RigidTransform2, as_point_set, inlier_indices, residuals,
                               sum_smallest, trim_count)
from planreg.queue import QueueSet, cheap_bound, init_queues, update_queues
from planreg.relaxation import relaxation_bound

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    """Solver parameters.

    ``delta`` gates the relaxation bound: it is computed only for boxes whose
    largest edge (angle scaled by ``angular_scale``) is below ``delta``.
    A node is pruned once ``UB - lower <= epsilon * max(lower, abs_tol / epsilon)``,
    i.e. the relative test ``lower * (1 + epsilon) >= UB`` with an absolute
    floor of ``abs_tol`` for optima at zero.
    """

    epsilon: float = 1e-4
    delta: float = 0.1
    p: Optional[int] = None
    trim_fraction: float = 0.8
    root_box: Optional[TransformBox] = None
    max_iterations: int = 10_000_000
    angular_scale_override: Optional[float] = None
    abs_tol: float = 1e-10
    use_queue: bool = True
    trace: bool = False

    def validate(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.delta >= 0:
            raise ValueError("delta must be non-negative")
        if not self.abs_tol >= 0:
            raise ValueError("abs_tol must be non-negative")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.angular_scale_override is not None and not self.angular_scale_override > 0:
            raise ValueError("angular scale must be positive")

    def trim_p(self, n: int) -> int:
        if self.p is not None:
            if not 1 <= self.p <= n:
                raise ValueError(f"p={self.p} outside [1, {n}]")
            return int(self.p)
        return trim_count(self.trim_fraction, n)


@dataclass
class SolverStats:
    iterations: int = 0
    nodes_created: int = 0
    nodes_pruned: int = 0
    dmin_evaluations: int = 0
    phiR_evaluations: int = 0
    pruned_volume: float = 0.0
    unsplittable: int = 0


@dataclass
class BoxNode:
    box: TransformBox
    lower: float
    queues: QueueSet
    phi_c: float = 0.0
    phi_r: float = math.inf


@dataclass
class SolveResult:
    transform: RigidTransform2
    objective: float
    lower_bound_at_exit: float
    relative_gap: float
    inlier_indices: np.ndarray
    stats: SolverStats
    certified: bool
    p: int
    root_box: TransformBox
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        rb = self.root_box
        return {
            "transform": self.transform.to_dict(),
            "objective": self.objective,
            "lower_bound_at_exit": self.lower_bound_at_exit,
            "relative_gap": self.relative_gap,
            "certified": self.certified,
            "p": self.p,
            "inlier_indices": [int(i) for i in self.inlier_indices],
            "root_box": [rb.z_min.x, rb.z_max.x, rb.z_min.y, rb.z_max.y,
                         rb.theta_min, rb.theta_max],
            "stats": asdict(self.stats),
        }


def default_root_box(src, dest) -> TransformBox:
    """Destination bounding box inflated by the source radius, full rotation.

    Every transform mapping some source point onto some destination point has
    its translation in this box.
    """
    src, dest = as_point_set(src), as_point_set(dest)
    rho = float(np.hypot(src[:, 0], src[:, 1]).max())
    lo, hi = dest.min(axis=0) - rho, dest.max(axis=0) + rho
    return TransformBox(Point2(*lo), Point2(*hi), 0.0, TWO_PI)


def default_angular_scale(src) -> float:
    rho = float(np.hypot(src[:, 0], src[:, 1]).max())
    return rho if rho > 0 else 1.0


def _transform_at(box: TransformBox) -> RigidTransform2:
    z, theta = box_center(box)
    return RigidTransform2(z, theta)


def _prunable(lower: float, ub: float, cfg: SolverConfig) -> bool:
    return ub - lower <= cfg.epsilon * max(lower, cfg.abs_tol / cfg.epsilon)


def relaxation_gated(box: TransformBox, cfg: SolverConfig, angular_scale: float) -> bool:
    return (box.largest_dimension(angular_scale) < cfg.delta
            and box.theta_width < 0.5 * math.pi)


def evaluate_node(box: TransformBox, parent_queues: Optional[QueueSet], src, dest, p: int,
                  cfg: SolverConfig, angular_scale: float,
                  stats: Optional[SolverStats] = None) -> BoxNode:
    """Queues and lower bound for ``box``.

    The cheap bound is always computed; the relaxation bound only when the
    box passes the size gate. The node's lower bound is the larger of the two.
    Without ``parent_queues`` (or with ``use_queue`` off) queues are built
    from scratch.
    """
    if parent_queues is None or not cfg.use_queue:
        queues, evals = init_queues(box, src, dest)
    else:
        queues, evals = update_queues(box, parent_queues, src, dest)
    phi_c = cheap_bound(queues, p)
    phi_r = -math.inf
    if relaxation_gated(box, cfg, angular_scale):
        phi_r = relaxation_bound(box, queues, src, dest, p)
        if stats is not None:
            stats.phiR_evaluations += 1
    if stats is not None:
        stats.dmin_evaluations += evals
    return BoxNode(box, max(phi_c, phi_r), queues, phi_c, phi_r)


def _relative_gap(ub: float, lb: float, cfg: SolverConfig) -> float:
    return (ub - lb) / max(lb, cfg.abs_tol / cfg.epsilon)


def solve(src, dest, cfg: Optional[SolverConfig] = None,
          on_iteration: Optional[Callable[[dict], None]] = None) -> SolveResult:
    """Globally minimise the trimmed registration objective over the root box.

    Returns a transform whose objective is within a factor ``1 + epsilon`` of
    the minimum (or within ``abs_tol`` of it when the minimum is ~0), unless
    ``max_iterations`` is reached first, in which case ``certified`` is False
    and ``relative_gap`` reports what was achieved.
    """
    cfg = cfg or SolverConfig()
    cfg.validate()
    src, dest = as_point_set(src), as_point_set(dest)
    p = cfg.trim_p(len(src))
    root = cfg.root_box or default_root_box(src, dest)
    scale = cfg.angular_scale_override or default_angular_scale(src)
    stats = SolverStats()
    trace: list[dict] = []

    def objective(t: RigidTransform2) -> float:
        return sum_smallest(residuals(t, src, dest), p)

    best = _transform_at(root)
    ub = objective(best)
    root_node = evaluate_node(root, None, src, dest, p, cfg, scale, stats)
    stats.nodes_created = 1

    heap: list = []
    counter = itertools.count()
    pruned_min_lower = math.inf

    def prune(node: BoxNode):
        nonlocal pruned_min_lower
        stats.nodes_pruned += 1
        stats.pruned_volume += node.box.volume()
        pruned_min_lower = min(pruned_min_lower, node.lower)

    def push(node: BoxNode):
        if _prunable(node.lower, ub, cfg):
            prune(node)
        else:
            heapq.heappush(heap, (node.lower, next(counter), node))

    push(root_node)
    while heap:
        lower, _, node = heap[0]
        if _prunable(lower, ub, cfg):
            # everything left is at least as large: prune the whole frontier
            for _, _, rest in heap:
                prune(rest)
            heap.clear()
            break
        if stats.iterations >= cfg.max_iterations:
            break
        heapq.heappop(heap)
        stats.iterations += 1
        try:
            children = split_box(node.box, scale)
        except ValueError:
            # box collapsed to floating-point resolution: its center is exact
            stats.unsplittable += 1
            t = _transform_at(node.box)
            val = objective(t)
            if val < ub:
                ub, best = val, t
            prune(BoxNode(node.box, min(node.lower, val), node.queues))
            continue
        for child in children:
            t = _transform_at(child)
            val = objective(t)
            if val < ub:
                ub, best = val, t
        for child in children:
            stats.nodes_created += 1
            push(evaluate_node(child, node.queues, src, dest, p, cfg, scale, stats))
        if cfg.trace or on_iteration is not None:
            lb = min(ub, pruned_min_lower, heap[0][0] if heap else math.inf)
            rec = {"iter": stats.iterations, "ub": ub, "lb": lb, "active_nodes": len(heap)}
            if cfg.trace:
                trace.append(rec)
            if on_iteration is not None:
                on_iteration(rec)

    active_min = min((entry[0] for entry in heap), default=math.inf)
    lb = min(ub, pruned_min_lower, active_min)
    gap = _relative_gap(ub, lb, cfg)
    certified = not heap and _prunable(lb, ub, cfg)
    if heap:
        log.warning("iteration cap %d reached; relative gap %.3g", cfg.max_iterations, gap)
    return SolveResult(
        transform=best.canonical(),
        objective=ub,
        lower_bound_at_exit=lb,
        relative_gap=gap,
        inlier_indices=inlier_indices(best, src, dest, p),
        stats=stats,
        certified=certified,
        p=p,
        root_box=root,
        trace=trace,
    )
