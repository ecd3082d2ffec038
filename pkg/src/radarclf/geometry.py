"""Planar geometry kernels for cluster shape description.

All functions accept an (n, 2) array-like of points. Degenerate inputs
(single point, collinear sets) return zero-extent shapes rather than failing,
because single-reflection clusters are common and must still produce a
feature vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: 95 percent quantile of the chi-square distribution with 2 degrees of
#: freedom, pinned to the precision used throughout the feature definitions.
CHI2_95_2DOF = 5.991464547


@dataclass(frozen=True)
class ConvexHull:
    """Counterclockwise hull vertices with cached area and perimeter.

    For collinear input the hull collapses to a segment (two vertices); its
    perimeter counts both traversal directions of the closed cycle, hence
    twice the segment length.
    """

    vertices: np.ndarray
    area: float
    perimeter: float


@dataclass(frozen=True)
class BoundingRect:
    """Minimum-area rectangle; half_extents[0] lies along ``rotation_rad``."""

    center: tuple[float, float]
    half_extents: tuple[float, float]
    rotation_rad: float
    area: float
    perimeter: float


@dataclass(frozen=True)
class ConfidenceEllipse:
    """95 percent covariance error ellipse (full axis lengths, not semi)."""

    center: tuple[float, float]
    major_axis_len: float
    minor_axis_len: float
    orientation_rad: float


@dataclass(frozen=True)
class CboDescriptor:
    """Occupied-sector counts of three annular bins around a center point."""

    inner: int
    middle: int
    outer: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.inner, self.middle, self.outer)


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must have shape (n, 2)")
    if pts.shape[0] < 1:
        raise ValueError("need at least one point")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    return pts


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> ConvexHull:
    """Monotone-chain convex hull with strictly convex vertex sequence."""
    pts = _as_points(points)
    uniq = np.unique(pts, axis=0)  # lexicographic sort, duplicates removed
    if uniq.shape[0] == 1:
        return ConvexHull(vertices=uniq.copy(), area=0.0, perimeter=0.0)
    if uniq.shape[0] == 2:
        seg = float(np.hypot(*(uniq[1] - uniq[0])))
        return ConvexHull(vertices=uniq.copy(), area=0.0, perimeter=2.0 * seg)

    rows = [tuple(p) for p in uniq]
    lower: list[tuple[float, float]] = []
    for p in rows:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(rows):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    verts = np.array(lower[:-1] + upper[:-1], dtype=np.float64)
    if verts.shape[0] == 2:
        seg = float(np.hypot(*(verts[1] - verts[0])))
        return ConvexHull(vertices=verts, area=0.0, perimeter=2.0 * seg)

    nxt = np.roll(verts, -1, axis=0)
    area = 0.5 * float(np.sum(verts[:, 0] * nxt[:, 1] - nxt[:, 0] * verts[:, 1]))
    perimeter = float(np.sum(np.hypot(nxt[:, 0] - verts[:, 0],
                                      nxt[:, 1] - verts[:, 1])))
    return ConvexHull(vertices=verts, area=area, perimeter=perimeter)


def min_bounding_rect(hull: ConvexHull) -> BoundingRect:
    """Minimum-area enclosing rectangle via edge-aligned calipers.

    One side of the optimum is parallel to some hull edge, so trying every
    edge direction is exhaustive. Ties keep the first edge in vertex order.
    """
    verts = hull.vertices
    if verts.shape[0] == 1:
        cx, cy = float(verts[0, 0]), float(verts[0, 1])
        return BoundingRect(center=(cx, cy), half_extents=(0.0, 0.0),
                            rotation_rad=0.0, area=0.0, perimeter=0.0)

    best = None
    m = verts.shape[0]
    for k in range(m):
        a = verts[k]
        b = verts[(k + 1) % m]
        edge = b - a
        norm = math.hypot(edge[0], edge[1])
        if norm == 0.0:
            continue
        u = edge / norm
        v = np.array([-u[1], u[0]])
        pu = verts @ u
        pv = verts @ v
        lo_u, hi_u = float(pu.min()), float(pu.max())
        lo_v, hi_v = float(pv.min()), float(pv.max())
        area = (hi_u - lo_u) * (hi_v - lo_v)
        if best is None or area < best[0]:
            best = (area, u, v, lo_u, hi_u, lo_v, hi_v)

    area, u, v, lo_u, hi_u, lo_v, hi_v = best
    cu = 0.5 * (lo_u + hi_u)
    cv = 0.5 * (lo_v + hi_v)
    center = (float(cu * u[0] + cv * v[0]), float(cu * u[1] + cv * v[1]))
    he = (0.5 * (hi_u - lo_u), 0.5 * (hi_v - lo_v))
    return BoundingRect(
        center=center,
        half_extents=(float(he[0]), float(he[1])),
        rotation_rad=float(math.atan2(u[1], u[0])),
        area=float(area),
        perimeter=float(4.0 * (he[0] + he[1])),
    )


def confidence_ellipse_95(points) -> ConfidenceEllipse:
    """95 percent error ellipse of the sample covariance (1/(n-1) scaling).

    Full axis length is 2 * sqrt(q * eigenvalue) with q the chi-square
    quantile. One point, or all points identical, gives a zero-axis ellipse.
    """
    pts = _as_points(points)
    cx, cy = (float(v) for v in pts.mean(axis=0))
    if pts.shape[0] < 2:
        return ConfidenceEllipse(center=(cx, cy), major_axis_len=0.0,
                                 minor_axis_len=0.0, orientation_rad=0.0)
    cov = np.cov(pts[:, 0], pts[:, 1], ddof=1)
    evals, evecs = np.linalg.eigh(cov)
    evals = np.maximum(evals, 0.0)  # clamp numerical noise
    major = 2.0 * math.sqrt(CHI2_95_2DOF * float(evals[1]))
    minor = 2.0 * math.sqrt(CHI2_95_2DOF * float(evals[0]))
    orient = float(math.atan2(evecs[1, 1], evecs[0, 1]))
    return ConfidenceEllipse(center=(cx, cy), major_axis_len=major,
                             minor_axis_len=minor, orientation_rad=orient)


def covariance_eigen(points) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending, clamped at 0) and matching unit eigenvectors
    of the sample position covariance. Fewer than two points give zeros and
    the coordinate axes."""
    pts = _as_points(points)
    if pts.shape[0] < 2:
        return np.zeros(2), np.eye(2)
    cov = np.cov(pts[:, 0], pts[:, 1], ddof=1)
    evals, evecs = np.linalg.eigh(cov)
    evals = np.maximum(evals, 0.0)
    order = [1, 0]  # eigh sorts ascending
    return evals[order], evecs[:, order]


# -- minimum enclosing circle ------------------------------------------------

_MEC_EPS = 1e-14


def _in_circle(c, p) -> bool:
    return math.hypot(p[0] - c[0][0], p[1] - c[0][1]) <= c[1] * (1 + _MEC_EPS) + _MEC_EPS


def _circle_diameter(a, b):
    cx = 0.5 * (a[0] + b[0])
    cy = 0.5 * (a[1] + b[1])
    r = max(math.hypot(a[0] - cx, a[1] - cy), math.hypot(b[0] - cx, b[1] - cy))
    return ((cx, cy), r)


def _circumcircle(a, b, c):
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        return None
    x = ox + ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
              + (cx * cx + cy * cy) * (ay - by)) / d
    y = oy + ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
              + (cx * cx + cy * cy) * (bx - ax)) / d
    r = max(math.hypot(a[0] - x, a[1] - y), math.hypot(b[0] - x, b[1] - y),
            math.hypot(c[0] - x, c[1] - y))
    return ((x, y), r)


def _mec_two_fixed(pts, p, q):
    circ = _circle_diameter(p, q)
    left = None
    right = None
    px, py = p
    qx, qy = q
    for r in pts:
        if _in_circle(circ, r):
            continue
        cross = (qx - px) * (r[1] - py) - (qy - py) * (r[0] - px)
        c = _circumcircle(p, q, r)
        if c is None:
            continue
        ccross = (qx - px) * (c[0][1] - py) - (qy - py) * (c[0][0] - px)
        if cross > 0.0 and (left is None or ccross > (qx - px) * (left[0][1] - py)
                            - (qy - py) * (left[0][0] - px)):
            left = c
        elif cross < 0.0 and (right is None or ccross < (qx - px) * (right[0][1] - py)
                              - (qy - py) * (right[0][0] - px)):
            right = c
    if left is None and right is None:
        return circ
    if left is None:
        return right
    if right is None:
        return left
    return left if left[1] <= right[1] else right


def _mec_one_fixed(pts, p):
    c = (tuple(p), 0.0)
    for j, q in enumerate(pts):
        if not _in_circle(c, q):
            if c[1] == 0.0:
                c = _circle_diameter(p, q)
            else:
                c = _mec_two_fixed(pts[: j + 1], p, q)
    return c


def min_enclosing_circle_center(points) -> tuple[tuple[float, float], float]:
    """Smallest circle containing all points; returns (center, radius).

    Incremental algorithm processing points in input order with no
    randomization, so the (unique) exact answer is reached deterministically.
    """
    pts = [tuple(p) for p in _as_points(points)]
    c = None
    for i, p in enumerate(pts):
        if c is None or not _in_circle(c, p):
            c = _mec_one_fixed(pts[:i], p)
    return c


def min_enclosing_circle(points) -> float:
    """Radius of the smallest enclosing circle."""
    return float(min_enclosing_circle_center(points)[1])


# -- circular bin occupancy ---------------------------------------------------

def cbo(points, center) -> CboDescriptor:
    """Count occupied 45 degree sectors inside three equal-width annuli.

    The annuli span [0, R_max] where R_max is the largest distance from the
    supplied center; sectors start at angle zero. A point exactly on a radial
    or angular boundary belongs to the lower-index bin or sector. If all
    points coincide with the center the descriptor is (1, 0, 0).
    """
    pts = _as_points(points)
    cx, cy = float(center[0]), float(center[1])
    dx = pts[:, 0] - cx
    dy = pts[:, 1] - cy
    d = np.hypot(dx, dy)
    rmax = float(d.max())
    if rmax == 0.0:
        return CboDescriptor(1, 0, 0)
    w = rmax / 3.0
    ring = np.where(d > 2.0 * w, 2, np.where(d > w, 1, 0))
    ang = np.mod(np.arctan2(dy, dx), 2.0 * math.pi)
    sector_width = math.pi / 4.0
    sector = np.ceil(ang / sector_width).astype(np.int64) - 1
    sector[ang == 0.0] = 0
    sector = np.clip(sector, 0, 7)
    occupied = set(zip(ring.tolist(), sector.tolist()))
    counts = [0, 0, 0]
    for b, _s in occupied:
        counts[b] += 1
    return CboDescriptor(*counts)


def max_dist_line_deviation(points) -> float:
    """Mean perpendicular distance to the line through the two most distant
    points. Ties for the diameter pair resolve to the first pair in row-major
    index order; degenerate inputs (one point, all identical) return 0."""
    pts = _as_points(points)
    n = pts.shape[0]
    if n < 2:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    i, j = np.unravel_index(int(np.argmax(d2)), d2.shape)
    if d2[i, j] == 0.0:
        return 0.0
    a = pts[i]
    b = pts[j]
    l = math.sqrt(float(d2[i, j]))
    cross = np.abs((b[0] - a[0]) * (pts[:, 1] - a[1])
                   - (b[1] - a[1]) * (pts[:, 0] - a[0]))
    return float(np.mean(cross / l))
