"""Independent reference implementations used as test oracles.

Everything in here is written from the operation definitions alone, in the
most literal way available (scalar loops, exhaustive candidate enumeration),
so agreement with the library is evidence and not tautology. Keep these slow
and obvious; never import them into the package.
"""

from __future__ import annotations

import math

import numpy as np


# -- coupling ------------------------------------------------------------------

def step_ref(v: float) -> float:
    return 1.0 if v >= 0.0 else 0.0


def delta_ref(p: float, variant: str) -> float:
    if variant == "pwc1":
        return step_ref(p - 0.5)
    if variant == "pwc2":
        return p
    if variant == "pwc3":
        return 1.0 / (1.0 + math.exp(-12.0 * (p - 0.5)))
    if variant == "pwc4":
        return p * step_ref(0.5 - p) + step_ref(p - 0.5)
    if variant == "pwc5":
        return p * step_ref(p - 0.5)
    raise ValueError(variant)


def pwc_scores_ref(P, variant: str) -> list[float]:
    """score_i = sum over j != i of delta(p_ij), summed in ascending j.

    The j == i term is included as an explicit 0.0 so the float addition
    order matches a full-row sum with a zeroed diagonal.
    """
    k = len(P)
    out = []
    for i in range(k):
        s = 0.0
        for j in range(k):
            s += 0.0 if j == i else delta_ref(P[i][j], variant)
        out.append(s)
    return out


def pwc_decide_ref(P, variant: str) -> int:
    scores = pwc_scores_ref(P, variant)
    top = max(scores)
    tied = [i for i, s in enumerate(scores) if s == top]
    if variant == "pwc1" and len(tied) > 1:
        s2 = pwc_scores_ref(P, "pwc2")
        best = max(s2[i] for i in tied)
        return min(i for i in tied if s2[i] == best)
    return tied[0]


def pwc_ova_scores_ref(P, ova) -> list[float]:
    k = len(P)
    out = []
    for i in range(k):
        s = 0.0
        for j in range(k):
            s += 0.0 if j == i else P[i][j] * (ova[i] + ova[j])
        out.append(s)
    return out


def pwc_ova2_scores_ref(P, ova) -> list[float]:
    k = len(P)
    out = []
    for i in range(k):
        s = 0.0
        for j in range(k):
            s += 0.0 if j == i else P[i][j]
        out.append(ova[i] * s)
    return out


def couple_decide_ref(P, ova, method: str) -> int:
    if method == "ova":
        scores = list(ova)
    elif method == "pwc-ova":
        scores = pwc_ova_scores_ref(P, ova)
    elif method == "pwc-ova2":
        scores = pwc_ova2_scores_ref(P, ova)
    else:
        return pwc_decide_ref(P, method)
    top = max(scores)
    return min(i for i, s in enumerate(scores) if s == top)


# -- dbscan ----------------------------------------------------------------------

def brute_dbscan(targets, eps_xy, eps_t, eps_vr, min_pts) -> list[int]:
    """Textbook quadratic DBSCAN over the max-normalized box predicate.

    Scan order, seed expansion order, and border absorption follow the
    same discipline as the library (ascending index breadth-first), so the
    labelings should coincide outright, not merely up to permutation.
    """
    n = len(targets)
    xs = [t.x_m for t in targets]
    ys = [t.y_m for t in targets]
    ts = [t.time_s for t in targets]
    vs = [t.vr_comp_mps for t in targets]

    def neighbors(i):
        out = []
        for j in range(n):
            if (math.hypot(xs[j] - xs[i], ys[j] - ys[i]) <= eps_xy
                    and abs(ts[j] - ts[i]) <= eps_t
                    and abs(vs[j] - vs[i]) <= eps_vr):
                out.append(j)
        return out

    UNSEEN, NOISE = -2, -1
    labels = [UNSEEN] * n
    cid = 0
    for i in range(n):
        if labels[i] != UNSEEN:
            continue
        nbrs = neighbors(i)
        if len(nbrs) < min_pts:
            labels[i] = NOISE
            continue
        labels[i] = cid
        queue = [j for j in nbrs if j != i]
        for j in queue:
            if labels[j] in (UNSEEN, NOISE):
                labels[j] = cid
        k = 0
        while k < len(queue):
            q = queue[k]
            k += 1
            if labels[q] != cid:
                continue
            q_nbrs = neighbors(q)
            if len(q_nbrs) < min_pts:
                continue
            for r in q_nbrs:
                if labels[r] == UNSEEN:
                    labels[r] = cid
                    queue.append(r)
                elif labels[r] == NOISE:
                    labels[r] = cid
        cid += 1
    return labels


def density_reachable_sets(targets, eps_xy, eps_t, eps_vr, min_pts):
    """Connected components of core points plus their reachable borders.

    Returns (core flags, list of frozensets). Unlike a full DBSCAN this has
    no assignment ambiguity: a border point in reach of two components is
    reported in both, which is exactly what the containment check needs.
    """
    n = len(targets)
    xs = [t.x_m for t in targets]
    ys = [t.y_m for t in targets]
    ts = [t.time_s for t in targets]
    vs = [t.vr_comp_mps for t in targets]

    def close(i, j):
        return (math.hypot(xs[j] - xs[i], ys[j] - ys[i]) <= eps_xy
                and abs(ts[j] - ts[i]) <= eps_t
                and abs(vs[j] - vs[i]) <= eps_vr)

    nbrs = [[j for j in range(n) if close(i, j)] for i in range(n)]
    core = [len(nbrs[i]) >= min_pts for i in range(n)]

    seen = [False] * n
    comps = []
    for i in range(n):
        if not core[i] or seen[i]:
            continue
        comp = set()
        stack = [i]
        seen[i] = True
        while stack:
            q = stack.pop()
            comp.add(q)
            for r in nbrs[q]:
                comp.add(r)  # border points ride along
                if core[r] and not seen[r]:
                    seen[r] = True
                    stack.append(r)
        comps.append(frozenset(comp))
    return core, comps


# -- geometry --------------------------------------------------------------------

def brute_hull_metrics(points) -> tuple[float, float]:
    """(area, perimeter) of the convex hull by supporting-edge enumeration.

    A directed pair (i, j) lies on the boundary iff no point is strictly to
    its right; boundary points are then angle-ordered around their centroid
    and measured with the shoelace formula.
    """
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    n = pts.shape[0]
    if n == 1:
        return 0.0, 0.0
    if n == 2:
        return 0.0, 2.0 * float(np.hypot(*(pts[1] - pts[0])))
    on_hull = set()
    for i in range(n):
        d = pts - pts[i]
        for j in range(n):
            if j == i:
                continue
            cross = d[j, 0] * d[:, 1] - d[j, 1] * d[:, 0]
            if np.all(cross >= -1e-12):
                on_hull.add(i)
                on_hull.add(j)
    verts = pts[sorted(on_hull)]
    if verts.shape[0] == 2:
        return 0.0, 2.0 * float(np.hypot(*(verts[1] - verts[0])))
    c = verts.mean(axis=0)
    ang = np.arctan2(verts[:, 1] - c[1], verts[:, 0] - c[0])
    verts = verts[np.argsort(ang, kind="stable")]
    nxt = np.roll(verts, -1, axis=0)
    area = 0.5 * float(np.sum(verts[:, 0] * nxt[:, 1]
                              - nxt[:, 0] * verts[:, 1]))
    per = float(np.sum(np.hypot(nxt[:, 0] - verts[:, 0],
                                nxt[:, 1] - verts[:, 1])))
    return abs(area), per


def grid_rect_min_area(points, n_angles: int = 3600) -> float:
    """Smallest axis-aligned bounding-box area over a fixed orientation grid."""
    pts = np.asarray(points, dtype=np.float64)
    theta = np.linspace(0.0, math.pi / 2.0, n_angles, endpoint=False)
    c, s = np.cos(theta), np.sin(theta)
    u = pts[:, 0][None, :] * c[:, None] + pts[:, 1][None, :] * s[:, None]
    v = -pts[:, 0][None, :] * s[:, None] + pts[:, 1][None, :] * c[:, None]
    w = u.max(axis=1) - u.min(axis=1)
    h = v.max(axis=1) - v.min(axis=1)
    return float(np.min(w * h))


def mec_cubic(points) -> float:
    """Minimum enclosing circle radius by exhaustive support enumeration.

    The optimum is determined by two or three points on its boundary, so
    every pair diameter and every triple circumcircle is a candidate; the
    smallest candidate containing all points wins.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n == 1:
        return 0.0
    tol = 1e-9

    centers = []
    radii = []
    for i in range(n):
        for j in range(i + 1, n):
            c = 0.5 * (pts[i] + pts[j])
            centers.append(c)
            radii.append(max(np.hypot(*(pts[i] - c)),
                             np.hypot(*(pts[j] - c))))
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                a, b, c3 = pts[i], pts[j], pts[k]
                d = 2.0 * (a[0] * (b[1] - c3[1]) + b[0] * (c3[1] - a[1])
                           + c3[0] * (a[1] - b[1]))
                if d == 0.0:
                    continue
                ux = ((a @ a) * (b[1] - c3[1]) + (b @ b) * (c3[1] - a[1])
                      + (c3 @ c3) * (a[1] - b[1])) / d
                uy = ((a @ a) * (c3[0] - b[0]) + (b @ b) * (a[0] - c3[0])
                      + (c3 @ c3) * (b[0] - a[0])) / d
                ctr = np.array([ux, uy])
                centers.append(ctr)
                radii.append(max(np.hypot(*(a - ctr)), np.hypot(*(b - ctr)),
                                 np.hypot(*(c3 - ctr))))

    centers = np.asarray(centers)
    radii = np.asarray(radii)
    finite = np.isfinite(radii) & np.all(np.isfinite(centers), axis=1)
    centers, radii = centers[finite], radii[finite]
    d2 = ((pts[None, :, 0] - centers[:, 0, None]) ** 2
          + (pts[None, :, 1] - centers[:, 1, None]) ** 2)
    covers = np.sqrt(d2.max(axis=1)) <= radii + tol
    return float(radii[covers].min())


def cbo_tally(points, center) -> tuple[int, int, int]:
    """Occupied-sector counts by a literal per-point loop."""
    pts = np.asarray(points, dtype=np.float64)
    cx, cy = float(center[0]), float(center[1])
    dists = [math.hypot(x - cx, y - cy) for x, y in pts]
    rmax = max(dists)
    if rmax == 0.0:
        return (1, 0, 0)
    w = rmax / 3.0
    occupied = set()
    for (x, y), d in zip(pts, dists):
        if d <= w:
            ring = 0
        elif d <= 2.0 * w:
            ring = 1
        else:
            ring = 2
        ang = math.atan2(y - cy, x - cx) % (2.0 * math.pi)
        if ang == 0.0:
            sector = 0
        else:
            sector = min(7, math.ceil(ang / (math.pi / 4.0)) - 1)
        occupied.add((ring, sector))
    counts = [0, 0, 0]
    for ring, _ in occupied:
        counts[ring] += 1
    return tuple(counts)


# -- plain statistics (feature oracle) ---------------------------------------------

def sample_std(values) -> float:
    v = list(values)
    if len(v) < 2:
        return 0.0
    m = sum(v) / len(v)
    return math.sqrt(sum((x - m) ** 2 for x in v) / (len(v) - 1))


def pearson(a, b) -> float:
    a, b = list(a), list(b)
    if len(a) < 2:
        return 0.0
    ma = sum(a) / len(a)
    mb = sum(b) / len(b)
    da = [x - ma for x in a]
    db = [x - mb for x in b]
    na = math.sqrt(sum(x * x for x in da))
    nb = math.sqrt(sum(x * x for x in db))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return max(-1.0, min(1.0, sum(x * y for x, y in zip(da, db)) / (na * nb)))


def covariance_eigenvalues(xy) -> tuple[float, float]:
    """Eigenvalues of the 2x2 sample covariance, closed form, largest first."""
    xy = np.asarray(xy, dtype=np.float64)
    if xy.shape[0] < 2:
        return 0.0, 0.0
    x = xy[:, 0] - xy[:, 0].mean()
    y = xy[:, 1] - xy[:, 1].mean()
    n1 = xy.shape[0] - 1
    sxx = float(x @ x) / n1
    syy = float(y @ y) / n1
    sxy = float(x @ y) / n1
    tr = sxx + syy
    disc = math.sqrt(max(0.0, (sxx - syy) ** 2 + 4.0 * sxy * sxy))
    return max(0.0, (tr + disc) / 2.0), max(0.0, (tr - disc) / 2.0)
