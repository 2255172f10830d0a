"""Department clustering over Dynamic Time Warping distances.

Departments with similar daily fire-count patterns are grouped by
k-medoids (PAM) on pairwise DTW distances. Series are z-normalized first
so clusters reflect pattern shape rather than raw magnitude, and medoids
keep every distance exact (no DTW barycenter needed).
"""

from dataclasses import dataclass

import numpy as np


class ClusteringError(ValueError):
    pass


def dtw_distance(a, b, window=None):
    """DTW distance with squared local cost and a Sakoe-Chiba band.

    Classic recurrence over match/insert/delete steps. window limits
    |i - j|; None means unconstrained. The band must be at least the
    length difference of the two series.
    """
    x = np.asarray(a, float)
    y = np.asarray(b, float)
    n, m = len(x), len(y)
    if n == 0 or m == 0:
        raise ClusteringError("DTW requires non-empty series")
    if window is None:
        window = max(n, m)
    window = max(int(window), abs(n - m))
    prev = np.full(m + 1, np.inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        cur = np.full(m + 1, np.inf)
        lo = max(1, i - window)
        hi = min(m, i + window)
        costs = (x[i - 1] - y[lo - 1 : hi]) ** 2
        for j in range(lo, hi + 1):
            cur[j] = costs[j - lo] + min(prev[j - 1], prev[j], cur[j - 1])
        prev = cur
    return float(prev[m])


def znorm(series):
    """Z-normalize one series; constant series map to all zeros."""
    x = np.asarray(series, float)
    sd = x.std()
    return (x - x.mean()) / sd if sd > 0 else np.zeros_like(x)


@dataclass(frozen=True)
class ClusterAssignment:
    labels: dict  # department_id -> cluster index
    medoids: tuple  # department_id per cluster
    cost: float


def pairwise_dtw(series_by_dept, window=None, normalize=True):
    """Symmetric DTW distance matrix; returns (department order, matrix)."""
    depts = sorted(series_by_dept)
    mats = [znorm(series_by_dept[d]) if normalize else np.asarray(series_by_dept[d], float)
            for d in depts]
    n = len(depts)
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dist[i, j] = dist[j, i] = dtw_distance(mats[i], mats[j], window)
    return depts, dist


def cluster_departments(series_by_dept, k, seed=0, max_iter=100, window=None,
                        normalize=True):
    """K-medoids (PAM swap) over DTW distances, deterministic given seed."""
    depts, dist = pairwise_dtw(series_by_dept, window, normalize)
    n = len(depts)
    if k > n:
        raise ClusteringError(f"k={k} exceeds {n} departments")
    rng = np.random.default_rng(seed)
    medoids = list(rng.choice(n, size=k, replace=False))

    def total_cost(meds):
        return float(dist[:, meds].min(axis=1).sum())

    cost = total_cost(medoids)
    for _ in range(max_iter):
        best = (cost, None)
        for mi, m in enumerate(medoids):
            for cand in range(n):
                if cand in medoids:
                    continue
                trial = medoids.copy()
                trial[mi] = cand
                c = total_cost(trial)
                if c < best[0] - 1e-12:
                    best = (c, trial)
        if best[1] is None:
            break
        cost, medoids = best
    assign = dist[:, medoids].argmin(axis=1)
    # stable cluster ids: order clusters by medoid department id
    order = np.argsort([depts[m] for m in medoids])
    remap = {int(old): new for new, old in enumerate(order)}
    labels = {depts[i]: remap[int(assign[i])] for i in range(n)}
    medoid_ids = tuple(depts[medoids[int(old)]] for old in order)
    return ClusterAssignment(labels, medoid_ids, cost)
