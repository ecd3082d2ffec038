"""Density clustering of radar targets in space, time, and radial velocity.

The neighborhood predicate normalizes each component by its own radius and
takes the worst one:

    d(a, b) = max(|dxy| / eps_xy, |dt| / eps_t, |dvr| / eps_vr) <= 1

so a pair is connected only when it is close in every dimension at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data_model import Target

#: Label for targets that belong to no cluster.
NOISE = -1


@dataclass(frozen=True, slots=True)
class DbscanParams:
    eps_xy_m: float = 1.5
    eps_t_s: float = 0.16
    eps_vr_mps: float = 1.0
    min_pts: int = 2

    def __post_init__(self):
        if min(self.eps_xy_m, self.eps_t_s, self.eps_vr_mps) <= 0:
            raise ValueError("all neighborhood radii must be positive")
        if self.min_pts < 1:
            raise ValueError("min_pts must be at least 1")


def dbscan(targets: Sequence[Target], params: DbscanParams = DbscanParams(),
           ) -> np.ndarray:
    """Cluster targets; returns one integer label per input target.

    Cluster ids are dense non-negative integers in order of discovery; noise
    gets :data:`NOISE`. Core points have at least ``min_pts`` neighbors,
    themselves included. Border points join the first core cluster that
    reaches them in scan order, so the result is deterministic for a given
    input order.
    """
    n = len(targets)
    labels = np.full(n, -2, dtype=np.int64)  # -2 = not yet visited
    if n == 0:
        return labels
    t = np.array([p.time_s for p in targets])
    x = np.array([p.x_m for p in targets])
    y = np.array([p.y_m for p in targets])
    vr = np.array([p.vr_comp_mps for p in targets])

    # Candidate pruning on the time axis keeps each region query near-linear;
    # the exact predicate is still evaluated on every candidate.
    time_order = np.argsort(t, kind="stable")
    t_sorted = t[time_order]
    pad = params.eps_t_s * 1e-9 + 1e-12
    eps_xy2 = params.eps_xy_m * params.eps_xy_m

    def region(i: int) -> np.ndarray:
        lo = np.searchsorted(t_sorted, t[i] - params.eps_t_s - pad, side="left")
        hi = np.searchsorted(t_sorted, t[i] + params.eps_t_s + pad, side="right")
        cand = time_order[lo:hi]
        dt = np.abs(t[cand] - t[i])
        dvr = np.abs(vr[cand] - vr[i])
        dxy2 = (x[cand] - x[i]) ** 2 + (y[cand] - y[i]) ** 2
        ok = (dt <= params.eps_t_s) & (dvr <= params.eps_vr_mps) & (dxy2 <= eps_xy2)
        return np.sort(cand[ok])

    cluster_id = 0
    for i in range(n):
        if labels[i] != -2:
            continue
        nbrs = region(i)
        if nbrs.size < params.min_pts:
            labels[i] = NOISE
            continue
        labels[i] = cluster_id
        queue = [int(j) for j in nbrs if j != i]
        for j in queue:
            if labels[j] == NOISE:
                labels[j] = cluster_id  # border point, absorbed but not expanded
        queue = [j for j in queue if labels[j] == -2 or labels[j] == cluster_id]
        # Assign first, then expand breadth-first in ascending-index order.
        for j in queue:
            if labels[j] == -2:
                labels[j] = cluster_id
        k = 0
        while k < len(queue):
            q = queue[k]
            k += 1
            q_nbrs = region(q)
            if q_nbrs.size < params.min_pts:
                continue
            for r in q_nbrs:
                r = int(r)
                if labels[r] == -2:
                    labels[r] = cluster_id
                    queue.append(r)
                elif labels[r] == NOISE:
                    labels[r] = cluster_id
        cluster_id += 1
    return labels
