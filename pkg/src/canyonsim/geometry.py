"""Planar geometry helpers: polylines, projections, bearings.

All coordinates are local tangent-plane meters. Angles are degrees measured
counter-clockwise from the +x axis unless stated otherwise. "Left"/"right"
are relative to the direction of travel along a polyline.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .errors import ConfigError

SPEED_OF_LIGHT = 299_792_458.0


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"

    @classmethod
    def parse(cls, value: "Side | str") -> "Side":
        if isinstance(value, Side):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ConfigError(f"side must be 'left' or 'right', got {value!r}") from None


def wrap180(angle_deg: float) -> float:
    """Wrap an angle into [-180, 180)."""
    return (angle_deg + 180.0) % 360.0 - 180.0


def wrap360(angle_deg: float) -> float:
    """Wrap an angle into [0, 360)."""
    return angle_deg % 360.0


def bearing_deg(src, dst) -> float:
    """Bearing of the direction from src to dst, degrees in [0, 360)."""
    d = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
    return wrap360(math.degrees(math.atan2(d[1], d[0])))


def distance(a, b) -> float:
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    return float(np.hypot(d[0], d[1]))


class Polyline:
    """Piecewise-linear curve with arclength parametrization."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            raise ConfigError("polyline needs at least two 2D points")
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= 0.0):
            raise ConfigError("polyline has zero-length segments")
        self.points = pts
        self._seg = seg
        self._seg_len = seg_len
        self._cum = np.concatenate([[0.0], np.cumsum(seg_len)])

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    def vertex_arclength(self, i: int) -> float:
        return float(self._cum[i])

    def _locate(self, s: float) -> tuple[int, float]:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self._cum, s, side="right") - 1)
        i = min(i, len(self._seg_len) - 1)
        return i, (s - self._cum[i]) / self._seg_len[i]

    def point_at(self, s: float) -> np.ndarray:
        i, frac = self._locate(s)
        return self.points[i] + frac * self._seg[i]

    def heading_at(self, s: float) -> float:
        """Tangent heading at arclength s; on a vertex, the outgoing segment."""
        i, frac = self._locate(s)
        if frac >= 1.0 and i + 1 < len(self._seg):
            i += 1
        v = self._seg[i]
        return wrap360(math.degrees(math.atan2(v[1], v[0])))

    def segment_heading(self, i: int) -> float:
        v = self._seg[i]
        return wrap360(math.degrees(math.atan2(v[1], v[0])))

    def project(self, point) -> tuple[float, float]:
        """Project a point onto the polyline.

        Returns (arclength of the closest point, signed lateral offset).
        Lateral is positive on the left of the travel direction.
        """
        p = np.asarray(point, dtype=float)
        best = (math.inf, 0.0, 0.0)
        for i in range(len(self._seg)):
            a, v, ln = self.points[i], self._seg[i], self._seg_len[i]
            t = float(np.dot(p - a, v)) / (ln * ln)
            t = min(max(t, 0.0), 1.0)
            cp = a + t * v
            w = p - cp
            d = float(np.hypot(w[0], w[1]))
            if d < best[0]:
                u = v / ln
                cross = float(u[0] * w[1] - u[1] * w[0])
                lateral = math.copysign(d, cross) if cross != 0.0 else 0.0
                best = (d, self._cum[i] + t * ln, lateral)
        return best[1], best[2]

    def distance_to(self, point) -> float:
        s, _ = self.project(point)
        return distance(self.point_at(s), point)


def segment_intersection(p1, p2, q1, q2, eps: float = 1e-9):
    """Intersection point of segments p1-p2 and q1-q2, or None."""
    p1 = np.asarray(p1, float)
    p2 = np.asarray(p2, float)
    q1 = np.asarray(q1, float)
    q2 = np.asarray(q2, float)
    r, s = p2 - p1, q2 - q1
    denom = r[0] * s[1] - r[1] * s[0]
    if abs(denom) < eps:
        return None
    qp = q1 - p1
    t = (qp[0] * s[1] - qp[1] * s[0]) / denom
    u = (qp[0] * r[1] - qp[1] * r[0]) / denom
    if -eps <= t <= 1 + eps and -eps <= u <= 1 + eps:
        return p1 + t * r
    return None


def polyline_intersection(a: Polyline, b: Polyline):
    """First intersection point of two polylines, or None."""
    for i in range(len(a.points) - 1):
        for j in range(len(b.points) - 1):
            pt = segment_intersection(a.points[i], a.points[i + 1], b.points[j], b.points[j + 1])
            if pt is not None:
                return pt
    return None
