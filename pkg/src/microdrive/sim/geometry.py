"""2D geometry helpers shared by the simulator, renderer and map builder."""

from __future__ import annotations

import math

import numpy as np


def unit(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)])


def right_of(theta: float) -> np.ndarray:
    """Right-hand normal of a heading (the side traffic keeps to)."""
    return np.array([math.sin(theta), -math.cos(theta)])


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    return math.pi - (math.pi - a) % (2.0 * math.pi)


def polyline_lengths(pts: np.ndarray) -> np.ndarray:
    """Cumulative arc length at each vertex, starting at 0."""
    d = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(d)])


def resample_polyline(pts: np.ndarray, spacing: float) -> np.ndarray:
    """Resample at fixed spacing; endpoints preserved."""
    pts = np.asarray(pts, dtype=np.float64)
    cum = polyline_lengths(pts)
    total = cum[-1]
    if total <= spacing:
        return np.vstack([pts[0], pts[-1]])
    n = int(math.floor(total / spacing))
    targets = np.arange(n + 1) * spacing
    if total - targets[-1] > 1e-9:
        targets = np.concatenate([targets, [total]])
    xs = np.interp(targets, cum, pts[:, 0])
    ys = np.interp(targets, cum, pts[:, 1])
    return np.stack([xs, ys], axis=1)


def point_at_arclength(pts: np.ndarray, s: float) -> tuple[np.ndarray, float]:
    """Point and tangent heading at arc length s (clamped to the polyline)."""
    cum = polyline_lengths(pts)
    s = min(max(s, 0.0), cum[-1])
    i = int(np.searchsorted(cum, s, side="right") - 1)
    i = min(i, len(pts) - 2)
    seg = pts[i + 1] - pts[i]
    seg_len = np.linalg.norm(seg)
    t = 0.0 if seg_len < 1e-12 else (s - cum[i]) / seg_len
    p = pts[i] + t * seg
    heading = math.atan2(seg[1], seg[0])
    return p, heading


def project_to_polyline(p, pts: np.ndarray, lengths: np.ndarray | None = None):
    """Closest point on a polyline.

    Returns (arc length, signed lateral offset, tangent heading).  Lateral
    offset is positive to the LEFT of travel direction.
    """
    p = np.asarray(p, dtype=np.float64)
    if lengths is None:
        lengths = polyline_lengths(pts)
    a = pts[:-1]
    b = pts[1:]
    ab = b - a
    ab_len2 = np.einsum("ij,ij->i", ab, ab)
    ab_len2 = np.maximum(ab_len2, 1e-18)
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / ab_len2, 0.0, 1.0)
    proj = a + t[:, None] * ab
    d2 = np.einsum("ij,ij->i", p - proj, p - proj)
    i = int(np.argmin(d2))
    seg = ab[i]
    seg_len = math.sqrt(ab_len2[i])
    heading = math.atan2(seg[1], seg[0])
    s = lengths[i] + t[i] * seg_len
    # Left = counterclockwise normal.
    cross = seg[0] * (p[1] - proj[i][1]) - seg[1] * (p[0] - proj[i][0])
    lat = math.copysign(math.sqrt(d2[i]), cross) / max(seg_len, 1e-12) * seg_len
    return s, lat, heading


def offset_polyline(pts: np.ndarray, offset: float) -> np.ndarray:
    """Shift a polyline laterally; positive offset is to the RIGHT of travel.

    Uses averaged segment normals at interior vertices (miter joints),
    adequate for the gentle curvatures of the built-in maps.
    """
    pts = np.asarray(pts, dtype=np.float64)
    seg = np.diff(pts, axis=0)
    seg = seg / np.maximum(np.linalg.norm(seg, axis=1, keepdims=True), 1e-12)
    normals = np.stack([seg[:, 1], -seg[:, 0]], axis=1)  # right of travel
    vert_n = np.empty_like(pts)
    vert_n[0] = normals[0]
    vert_n[-1] = normals[-1]
    if len(pts) > 2:
        avg = normals[:-1] + normals[1:]
        norm = np.maximum(np.linalg.norm(avg, axis=1, keepdims=True), 1e-12)
        avg = avg / norm
        # Miter scaling keeps the offset distance constant through corners.
        scale = 1.0 / np.maximum(np.einsum("ij,ij->i", avg, normals[:-1]), 0.2)
        vert_n[1:-1] = avg * scale[:, None]
    return pts + offset * vert_n


def arc_points(center, radius: float, a0: float, a1: float, spacing: float = 1.0) -> np.ndarray:
    """Sampled circular arc from angle a0 to a1 (radians, signed sweep)."""
    sweep = a1 - a0
    n = max(2, int(math.ceil(abs(sweep) * radius / spacing)) + 1)
    angles = np.linspace(a0, a1, n)
    cx, cy = center
    return np.stack([cx + radius * np.cos(angles), cy + radius * np.sin(angles)], axis=1)


def bezier_connector(p0, h0: float, p1, h1: float, spacing: float = 1.0) -> np.ndarray:
    """Cubic Bezier joining two posed endpoints, sampled to ~spacing."""
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    d = np.linalg.norm(p1 - p0)
    pull = max(d / 2.5, 1.0)
    c0 = p0 + pull * unit(h0)
    c1 = p1 - pull * unit(h1)
    n = max(8, int(math.ceil(1.5 * d / spacing)))
    t = np.linspace(0.0, 1.0, n)[:, None]
    pts = ((1 - t) ** 3) * p0 + 3 * ((1 - t) ** 2) * t * c0 + 3 * (1 - t) * t ** 2 * c1 + t ** 3 * p1
    return pts


def rect_corners(center, heading: float, length: float, width: float) -> np.ndarray:
    """Corners of an oriented box, counterclockwise."""
    f = unit(heading) * (length / 2.0)
    r = right_of(heading) * (width / 2.0)
    c = np.asarray(center, dtype=np.float64)
    return np.array([c + f + r, c + f - r, c - f - r, c - f + r])


def convex_overlap(quad_a: np.ndarray, quad_b: np.ndarray) -> bool:
    """Separating-axis test for two convex polygons."""
    for quad in (quad_a, quad_b):
        n = len(quad)
        for i in range(n):
            edge = quad[(i + 1) % n] - quad[i]
            axis = np.array([-edge[1], edge[0]])
            pa = quad_a @ axis
            pb = quad_b @ axis
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True


def point_in_polygon(p, poly: np.ndarray) -> bool:
    """Even-odd rule; works for any simple polygon."""
    x, y = float(p[0]), float(p[1])
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xin = x1 + (y - y1) / (y2 - y1) * (x2 - x1)
            if x < xin:
                inside = not inside
    return inside


def segments_intersect(p1, p2, q1, q2) -> bool:
    """Proper or touching intersection of segments p1p2 and q1q2."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(v) < 1e-12:
            return 0
        return 1 if v > 0 else -1

    def on_seg(a, b, c):
        return (min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
                and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12)

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p1, p2, q1):
        return True
    if o2 == 0 and on_seg(p1, p2, q2):
        return True
    if o3 == 0 and on_seg(q1, q2, p1):
        return True
    if o4 == 0 and on_seg(q1, q2, p2):
        return True
    return False


def world_to_frame(points, origin, heading: float) -> np.ndarray:
    """Express world points in a pose-local frame (x forward, y left)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64)) - np.asarray(origin)
    c, s = math.cos(heading), math.sin(heading)
    fwd = pts[:, 0] * c + pts[:, 1] * s
    left = -pts[:, 0] * s + pts[:, 1] * c
    return np.stack([fwd, left], axis=1)
