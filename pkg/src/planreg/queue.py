"""Candidate queues: per source point, destination indices that may still be
nearest for some transform in the current box, keyed by a distance lower bound.

A queue for box ``B`` and source point ``P`` holds pairs ``(d, j)`` sorted by
``d`` where ``d <= d_min(B, P, Q_j)``, plus an upper bound ``U`` on
``min_j d_max(B, P, Q_j)``. When a box is split the child queue is rebuilt
from the parent's by recomputing only the prefix whose stale bound could
still be the minimum, and candidates whose bound reaches ``U`` are dropped.

Queues for all source points of a box are kept in one flat :class:`QueueSet`
so the compiled kernels can process a whole box per call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np
from numba import njit

from planreg.geometry import TransformBox, arc_rect_max_sq, arc_rect_min_sq
from planreg.objective import sum_smallest


@njit(cache=True)
def _dmin(r, phase, box, qx, qy):
    return arc_rect_min_sq(r, box[4] + phase, box[5] + phase,
                           qx - box[2], qy - box[3], qx - box[0], qy - box[1])


@njit(cache=True)
def _dmax(r, phase, box, qx, qy):
    return arc_rect_max_sq(r, box[4] + phase, box[5] + phase,
                           qx - box[2], qy - box[3], qx - box[0], qy - box[1])


@njit(cache=True)
def _bound_matrices(box, radius, phase, dest):
    n, m = len(radius), len(dest)
    dmin = np.empty((n, m))
    dmax = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            dmin[i, j] = _dmin(radius[i], phase[i], box, dest[j, 0], dest[j, 1])
            dmax[i, j] = _dmax(radius[i], phase[i], box, dest[j, 0], dest[j, 1])
    return dmin, dmax


@njit(cache=True)
def _init_queues(box, radius, phase, dest):
    n, m = len(radius), len(dest)
    d = np.empty(n * m)
    idx = np.empty(n * m, np.int64)
    offsets = np.arange(0, n * m + 1, m)
    upper = np.empty(n)
    row = np.empty(m)
    for i in range(n):
        u = np.inf
        for j in range(m):
            row[j] = _dmin(radius[i], phase[i], box, dest[j, 0], dest[j, 1])
            u = min(u, _dmax(radius[i], phase[i], box, dest[j, 0], dest[j, 1]))
        order = np.argsort(row, kind="mergesort")
        for k in range(m):
            d[i * m + k] = row[order[k]]
            idx[i * m + k] = order[k]
        upper[i] = u
    return d, idx, offsets, upper


@njit(cache=True)
def _update_queues(box, radius, phase, dest, pd, pidx, poff):
    n = len(radius)
    out_d = np.empty(len(pd))
    out_idx = np.empty(len(pd), np.int64)
    out_off = np.zeros(n + 1, np.int64)
    upper = np.empty(n)
    n_evals = 0
    pos = 0
    for i in range(n):
        r, ph = radius[i], phase[i]
        k, end = poff[i], poff[i + 1]
        seg = pos
        # the head is always refreshed
        j = pidx[k]
        k += 1
        m = _dmin(r, ph, box, dest[j, 0], dest[j, 1])
        u = _dmax(r, ph, box, dest[j, 0], dest[j, 1])
        n_evals += 1
        out_d[pos] = m
        out_idx[pos] = j
        pos += 1
        # refresh every candidate whose stale bound does not exceed the running minimum
        while k < end and pd[k] <= m:
            j = pidx[k]
            k += 1
            d = _dmin(r, ph, box, dest[j, 0], dest[j, 1])
            n_evals += 1
            m = min(m, d)
            u = min(u, _dmax(r, ph, box, dest[j, 0], dest[j, 1]))
            out_d[pos] = d
            out_idx[pos] = j
            pos += 1
        # carry the rest over unchanged until the bound reaches U; drop the tail
        while k < end and u > pd[k]:
            out_d[pos] = pd[k]
            out_idx[pos] = pidx[k]
            pos += 1
            k += 1
        order = np.argsort(out_d[seg:pos], kind="mergesort")
        sd = out_d[seg:pos][order]
        si = out_idx[seg:pos][order]
        out_d[seg:pos] = sd
        out_idx[seg:pos] = si
        out_off[i + 1] = pos
        upper[i] = u
    return out_d[:pos].copy(), out_idx[:pos].copy(), out_off, upper, n_evals


def _box_vector(b: TransformBox) -> np.ndarray:
    return np.array([b.z_min.x, b.z_min.y, b.z_max.x, b.z_max.y, b.theta_min, b.theta_max])


def polar(points) -> tuple[np.ndarray, np.ndarray]:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.hypot(pts[:, 0], pts[:, 1]), np.arctan2(pts[:, 1], pts[:, 0])


@dataclass(frozen=True)
class Candidate:
    d: float
    idx: int


@dataclass
class CandidateQueue:
    """Ascending ``(d, idx)`` candidates for one source point, with upper bound."""

    d: np.ndarray
    idx: np.ndarray
    upper: float

    def __len__(self) -> int:
        return len(self.d)

    @property
    def head(self) -> Candidate:
        return Candidate(float(self.d[0]), int(self.idx[0]))

    def entries(self) -> list[Candidate]:
        return [Candidate(float(d), int(i)) for d, i in zip(self.d, self.idx)]


@dataclass
class QueueSet:
    """Queues for every source point of one box, stored back to back."""

    d: np.ndarray
    idx: np.ndarray
    offsets: np.ndarray
    upper: np.ndarray

    def __len__(self) -> int:
        return len(self.upper)

    def __getitem__(self, i: int) -> CandidateQueue:
        a, b = self.offsets[i], self.offsets[i + 1]
        return CandidateQueue(self.d[a:b], self.idx[a:b], float(self.upper[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def heads(self) -> np.ndarray:
        return self.d[self.offsets[:-1]]

    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    @classmethod
    def from_queues(cls, queues: Iterable[CandidateQueue]) -> "QueueSet":
        qs = list(queues)
        sizes = [len(q) for q in qs]
        return cls(np.concatenate([q.d for q in qs]),
                   np.concatenate([q.idx for q in qs]).astype(np.int64),
                   np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64),
                   np.array([q.upper for q in qs], dtype=float))


def init_queues(root: TransformBox, src, dest) -> tuple[QueueSet, int]:
    """Fresh queues for every source point; returns the set and the d_min count."""
    radius, phase = polar(src)
    dest = np.ascontiguousarray(dest, dtype=float)
    d, idx, off, upper = _init_queues(_box_vector(root), radius, phase, dest)
    return QueueSet(d, idx, off, upper), len(radius) * len(dest)


def update_queues(child: TransformBox, parent: QueueSet, src, dest) -> tuple[QueueSet, int]:
    """Child queues derived from the parent's; returns the set and the d_min count."""
    radius, phase = polar(src)
    dest = np.ascontiguousarray(dest, dtype=float)
    d, idx, off, upper, n_evals = _update_queues(_box_vector(child), radius, phase, dest,
                                                 parent.d, parent.idx, parent.offsets)
    return QueueSet(d, idx, off, upper), int(n_evals)


def init_queue(root: TransformBox, p, dest) -> CandidateQueue:
    qs, _ = init_queues(root, np.reshape(p, (1, 2)), dest)
    return qs[0]


def update_queue(child: TransformBox, parent_q: CandidateQueue, p, dest) -> CandidateQueue:
    """Queue for ``child`` built from the parent box's queue (read, not consumed)."""
    if len(parent_q) == 0:
        raise ValueError("parent queue is empty")
    qs, _ = update_queues(child, QueueSet.from_queues([parent_q]), np.reshape(p, (1, 2)), dest)
    return qs[0]


def bound_matrices(b: TransformBox, src, dest) -> tuple[np.ndarray, np.ndarray]:
    """Full ``(n, m)`` matrices of squared d_min and d_max over box ``b``."""
    radius, phase = polar(src)
    return _bound_matrices(_box_vector(b), radius, phase, np.ascontiguousarray(dest, dtype=float))


@dataclass(frozen=True)
class ConsistencyReport:
    cond1: bool  # stored bounds under-estimate d_min
    cond2: bool  # upper over-estimates min d_max
    cond3: bool  # absent candidates are no closer than the head
    cond4: bool  # head is the exact minimum d_min

    @property
    def ok(self) -> bool:
        return self.cond1 and self.cond2 and self.cond3 and self.cond4


def check_consistency(q: CandidateQueue, b: TransformBox, p, dest) -> ConsistencyReport:
    """Check a queue against direct recomputation over all of ``dest``."""
    dmin, dmax = bound_matrices(b, np.reshape(p, (1, 2)), dest)
    dmin, dmax = dmin[0], dmax[0]
    if len(q) == 0:
        return ConsistencyReport(True, bool(q.upper >= dmax.min()), False, False)
    head = q.d[0]
    absent = np.ones(len(dmin), dtype=bool)
    absent[q.idx] = False
    return ConsistencyReport(
        cond1=bool(np.all(q.d <= dmin[q.idx])),
        cond2=bool(q.upper >= dmax.min()),
        cond3=bool(np.all(dmin[absent] >= head)),
        cond4=bool(head == dmin.min()),
    )


def cheap_bound(queues: Union[QueueSet, Sequence[CandidateQueue]], p: int) -> float:
    """Sum of the ``p`` smallest queue heads."""
    if isinstance(queues, QueueSet):
        heads = queues.heads()
    else:
        heads = np.array([q.d[0] for q in queues])
    return sum_smallest(heads, p)
