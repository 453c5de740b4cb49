"""Minimal SVG output: point-set overlays, reconstructed maps, convergence plots."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from typing import Sequence

import numpy as np

SRC_COLOR = "red"
DEST_COLOR = "green"
MOVED_COLOR = "blue"


class _Frame:
    """Maps data coordinates into a pixel viewport with y pointing up."""

    def __init__(self, points: np.ndarray, width: float, height: float, margin: float = 20.0):
        lo, hi = points.min(axis=0), points.max(axis=0)
        span = np.maximum(hi - lo, 1e-9)
        self.scale = min((width - 2 * margin) / span[0], (height - 2 * margin) / span[1])
        self.lo, self.margin, self.height = lo, margin, height

    def __call__(self, x: float, y: float) -> tuple[float, float]:
        px = self.margin + (x - self.lo[0]) * self.scale
        py = self.height - self.margin - (y - self.lo[1]) * self.scale
        return round(px, 3), round(py, 3)


def _root(width: float, height: float) -> ET.Element:
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(width),
                     height=str(height), viewBox=f"0 0 {width} {height}")
    ET.SubElement(svg, "rect", width="100%", height="100%", fill="white")
    return svg


def _dots(parent, frame, pts, color, cls, r=2.5):
    g = ET.SubElement(parent, "g", {"class": cls, "fill": color})
    for x, y in pts:
        cx, cy = frame(x, y)
        ET.SubElement(g, "circle", cx=str(cx), cy=str(cy), r=str(r))


def _crosses(parent, frame, pts, color, cls, size=3.0):
    g = ET.SubElement(parent, "g", {"class": cls, "stroke": color, "stroke-width": "1"})
    for x, y in pts:
        cx, cy = frame(x, y)
        d = (f"M{cx - size},{cy - size}L{cx + size},{cy + size}"
             f"M{cx - size},{cy + size}L{cx + size},{cy - size}")
        ET.SubElement(g, "path", d=d)


def _serialize(svg: ET.Element) -> str:
    ET.indent(svg)
    return ET.tostring(svg, encoding="unicode") + "\n"


def alignment_svg(src, dest, moved, width: int = 800, height: int = 800) -> str:
    """Source in red, destination in green, transformed source in blue."""
    src, dest, moved = (np.asarray(a, dtype=float) for a in (src, dest, moved))
    frame = _Frame(np.vstack([src, dest, moved]), width, height)
    svg = _root(width, height)
    _dots(svg, frame, src, SRC_COLOR, "source")
    _dots(svg, frame, dest, DEST_COLOR, "destination")
    _dots(svg, frame, moved, MOVED_COLOR, "transformed")
    return _serialize(svg)


def map_svg(scans: Sequence[np.ndarray], inlier_masks: Sequence[np.ndarray], positions,
            width: int = 800, height: int = 800) -> str:
    """Scans already in the reference frame: inliers as green crosses,
    outliers as red crosses, scanner positions as circles."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    frame = _Frame(np.vstack([*scans, positions]), width, height)
    svg = _root(width, height)
    for k, (pts, mask) in enumerate(zip(scans, inlier_masks)):
        mask = np.asarray(mask, dtype=bool)
        g = ET.SubElement(svg, "g", {"class": f"scan-{k}"})
        _crosses(g, frame, pts[mask], DEST_COLOR, "inliers")
        _crosses(g, frame, pts[~mask], SRC_COLOR, "outliers")
    g = ET.SubElement(svg, "g", {"class": "poses", "fill": "none", "stroke": "black"})
    for x, y in positions:
        cx, cy = frame(x, y)
        ET.SubElement(g, "circle", cx=str(cx), cy=str(cy), r="6")
    return _serialize(svg)


def convergence_svg(traces: dict[str, list[dict]], width: int = 800, height: int = 600) -> str:
    """Upper/lower bounds (log scale) and active box count against iteration.

    ``traces`` maps a label to its per-iteration records.
    """
    colors = ["red", "green", "blue", "orange", "purple"]
    svg = _root(width, height)
    panel_h = (height - 60) / 2
    records = [r for recs in traces.values() for r in recs]
    if not records:
        return _serialize(svg)
    max_iter = max(r["iter"] for r in records) or 1
    pos = [v for r in records for v in (r["ub"], r["lb"]) if v > 0 and math.isfinite(v)]
    lo_log = math.log10(min(pos)) if pos else 0.0
    hi_log = math.log10(max(pos)) if pos else 1.0
    hi_log = max(hi_log, lo_log + 1e-9)
    max_active = max(r["active_nodes"] for r in records) or 1
    left, right = 60.0, width - 20.0

    def px(it):
        return left + (right - left) * it / max_iter

    def py_bound(v, top=20.0):
        v = max(v, 10 ** lo_log)
        return top + panel_h * (1 - (math.log10(v) - lo_log) / (hi_log - lo_log))

    def py_active(a, top=40.0 + panel_h):
        return top + panel_h * (1 - a / max_active)

    for k, (label, recs) in enumerate(traces.items()):
        color = colors[k % len(colors)]
        g = ET.SubElement(svg, "g", {"class": f"trace-{label}", "fill": "none", "stroke": color})
        for key, dash in (("ub", None), ("lb", "4 2")):
            pts = " ".join(f"{px(r['iter']):.2f},{py_bound(r[key]):.2f}" for r in recs)
            attrs = {"points": pts}
            if dash:
                attrs["stroke-dasharray"] = dash
            ET.SubElement(g, "polyline", attrs)
        pts = " ".join(f"{px(r['iter']):.2f},{py_active(r['active_nodes']):.2f}" for r in recs)
        ET.SubElement(g, "polyline", points=pts)
        text = ET.SubElement(svg, "text", x=str(left + 10), y=str(35 + 15 * k), fill=color)
        text.text = label
    return _serialize(svg)
