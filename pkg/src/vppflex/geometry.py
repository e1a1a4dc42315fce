"""Planar convex hulls over PQ point clouds."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

REL_EPS = 1e-12
CONTAIN_REL_TOL = 1e-9


@dataclass(frozen=True)
class Hull:
    """Convex polygon, vertices counter-clockwise without collinear runs."""

    vertices: tuple[tuple[float, float], ...]
    area_kw_kvar: float

    @property
    def is_degenerate(self) -> bool:
        return len(self.vertices) < 3

    @property
    def diameter(self) -> float:
        v = np.asarray(self.vertices, dtype=float)
        if len(v) < 2:
            return 0.0
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    @property
    def centroid(self) -> tuple[float, float]:
        v = np.asarray(self.vertices, dtype=float)
        if len(v) < 3 or self.area_kw_kvar == 0.0:
            c = v.mean(axis=0)
            return float(c[0]), float(c[1])
        x, y = v[:, 0], v[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        a = cross.sum() / 2.0
        return float(((x + xn) * cross).sum() / (6 * a)), float(((y + yn) * cross).sum() / (6 * a))

    def to_json(self, **extra) -> str:
        doc = {
            "vertices": [[p, q] for p, q in self.vertices],
            "area_kw_kvar": self.area_kw_kvar,
            "orientation": "counter-clockwise",
        }
        doc.update(extra)
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Hull":
        doc = json.loads(text)
        return cls(tuple((float(p), float(q)) for p, q in doc["vertices"]), float(doc["area_kw_kvar"]))


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def shoelace_area(vertices: Sequence[tuple[float, float]]) -> float:
    if len(vertices) < 3:
        return 0.0
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return float(abs(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)) / 2.0)


def convex_hull(points: Iterable[Sequence[float]]) -> Hull:
    """Andrew's monotone chain; collinear points are dropped from the boundary."""
    pts = sorted({(float(p[0]), float(p[1])) for p in points})
    if not pts:
        raise ValueError("convex hull of an empty point set")
    if len(pts) == 1:
        return Hull((pts[0],), 0.0)
    mag = max(max(abs(x), abs(y)) for x, y in pts)
    eps = REL_EPS * mag * mag

    def chain(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= eps:
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(reversed(pts))
    verts = lower[:-1] + upper[:-1]
    if len(verts) < 3:
        # collinear input: keep the two extremes
        verts = [pts[0], pts[-1]]
        return Hull(tuple(verts), 0.0)
    return Hull(tuple(verts), shoelace_area(verts))


def hull_area(hull: Hull) -> float:
    return shoelace_area(hull.vertices)


def hull_contains(hull: Hull, point: Sequence[float]) -> bool:
    """Inside-or-on-boundary test, tolerant to 1e-9 of the hull diameter."""
    px, py = float(point[0]), float(point[1])
    v = hull.vertices
    tol = CONTAIN_REL_TOL * hull.diameter
    if len(v) == 1:
        return math.hypot(px - v[0][0], py - v[0][1]) <= tol
    if len(v) == 2:
        (ax, ay), (bx, by) = v
        dx, dy = bx - ax, by - ay
        t = ((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy)
        t = min(1.0, max(0.0, t))
        return math.hypot(px - (ax + t * dx), py - (ay + t * dy)) <= tol
    n = len(v)
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        edge = math.hypot(b[0] - a[0], b[1] - a[1])
        # signed distance to the left of edge a->b
        if _cross(a, b, (px, py)) < -tol * edge:
            return False
    return True


def hull_contains_many(hull: Hull, points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    return np.array([hull_contains(hull, p) for p in points], dtype=bool)
