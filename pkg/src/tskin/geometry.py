"""Convex hulls and convex point-in-polygon tests for the color-plane partitions."""

from __future__ import annotations

import numpy as np

# Points lying exactly on an edge must count as inside; the vertices are
# half-integer at worst so this slack is orders below the grid pitch.
EDGE_EPS = 1e-9


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Convex hull of 2-D points via Andrew's monotone chain.

    Returns the hull vertices counter-clockwise with collinear boundary
    points dropped. Degenerate inputs (all collinear) return fewer than
    3 vertices.
    """
    pts = np.unique(np.asarray(points, dtype=np.float64).reshape(-1, 2), axis=0)
    if len(pts) <= 2:
        return pts
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        return np.asarray(hull[:1] if not hull else hull)
    return np.asarray(hull)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def polygon_area(poly: np.ndarray) -> float:
    """Signed shoelace area (positive for counter-clockwise vertices)."""
    p = np.asarray(poly, dtype=np.float64)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def point_in_convex(poly: np.ndarray, x: float, y: float) -> bool:
    """Inclusive membership test against a counter-clockwise convex polygon."""
    p = np.asarray(poly, dtype=np.float64)
    n = len(p)
    for i in range(n):
        ax, ay = p[i]
        bx, by = p[(i + 1) % n]
        if (bx - ax) * (y - ay) - (by - ay) * (x - ax) < -EDGE_EPS:
            return False
    return True


def convex_mask_grid(poly: np.ndarray, size: int = 256) -> np.ndarray:
    """Inclusive membership of every integer grid point (a, b) in [0, size)^2.

    Result is indexed ``mask[a, b]`` matching the heat-map plane convention
    (first coordinate = first channel of the plane).
    """
    p = np.asarray(poly, dtype=np.float64)
    a = np.arange(size, dtype=np.float64)[:, None]
    b = np.arange(size, dtype=np.float64)[None, :]
    mask = np.ones((size, size), dtype=bool)
    n = len(p)
    for i in range(n):
        ax, ay = p[i]
        bx, by = p[(i + 1) % n]
        mask &= (bx - ax) * (b - ay) - (by - ay) * (a - ax) >= -EDGE_EPS
    return mask
