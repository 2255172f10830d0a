"""Ordinal five-class daily targets per department.

Class 0 is the absence of fire; positive daily values (fire counts or
burned area) are grouped into up to four levels by 1-D k-means. The 1-D
problem is solved exactly by dynamic programming over sorted distinct
values, so the fit is deterministic and seed-independent.
"""

import datetime as dt
from dataclasses import dataclass

import numpy as np

N_POSITIVE_CLASSES = 4
SEQUENCE_GAP_DAYS = 3


class LabelingError(ValueError):
    pass


@dataclass(frozen=True)
class OrdinalModel:
    """Fitted per-department class centroids for one target (FO or BA)."""

    department_id: str
    target: str  # "fo" | "ba"
    centroids: tuple  # strictly increasing, length k_effective

    @property
    def k_effective(self):
        return len(self.centroids)


@dataclass(frozen=True)
class FireSequence:
    department_id: str
    start_date: dt.date
    end_date: dt.date

    @property
    def length_days(self):
        return (self.end_date - self.start_date).days + 1


def _kmeans_1d_dp(values, counts, k):
    """Exact weighted 1-D k-means on sorted distinct values.

    Returns the list of cluster means minimizing within-cluster SSE, found
    by DP over contiguous partitions (optimal clusters are contiguous in
    sorted order). O(k n^2) with prefix sums.
    """
    n = len(values)
    v = np.asarray(values, float)
    w = np.asarray(counts, float)
    cw = np.concatenate([[0.0], np.cumsum(w)])
    cwv = np.concatenate([[0.0], np.cumsum(w * v)])
    cwv2 = np.concatenate([[0.0], np.cumsum(w * v * v)])

    def seg_cost(i, j):  # cost of cluster on values[i:j]
        ww = cw[j] - cw[i]
        s = cwv[j] - cwv[i]
        return (cwv2[j] - cwv2[i]) - s * s / ww

    cost = np.full((k + 1, n + 1), np.inf)
    split = np.zeros((k + 1, n + 1), int)
    cost[0, 0] = 0.0
    for c in range(1, k + 1):
        for j in range(c, n + 1):
            best, arg = np.inf, c - 1
            for i in range(c - 1, j):
                cand = cost[c - 1, i] + seg_cost(i, j)
                if cand < best:
                    best, arg = cand, i
            cost[c, j] = best
            split[c, j] = arg
    bounds = [n]
    j = n
    for c in range(k, 0, -1):
        j = split[c, j]
        bounds.append(j)
    bounds.reverse()
    means = []
    for a, b in zip(bounds, bounds[1:]):
        means.append((cwv[b] - cwv[a]) / (cw[b] - cw[a]))
    return means


def fit_ordinal_model(positive_values, department_id="", target="fo",
                      k=N_POSITIVE_CLASSES):
    """Fit class centroids on training-period positive daily values.

    With fewer than k distinct values, k_effective shrinks to the number of
    distinct values; empty input yields k_effective = 0 (all labels 0).
    """
    vals = np.asarray(list(positive_values), float)
    if vals.size and (vals <= 0).any():
        raise LabelingError("ordinal model must be fitted on positive values only")
    if vals.size == 0:
        return OrdinalModel(department_id, target, ())
    distinct, counts = np.unique(vals, return_counts=True)
    k_eff = min(k, len(distinct))
    centroids = _kmeans_1d_dp(distinct, counts, k_eff)
    return OrdinalModel(department_id, target, tuple(centroids))


def assign_label(value, model):
    """Map a daily value to class 0-4: 0 iff zero, else nearest centroid.

    Midpoint ties go to the lower class, which keeps the mapping monotone.
    """
    v = np.asarray(value, float)
    if (v < 0).any():
        raise LabelingError("negative target value")
    if model.k_effective == 0:
        return np.zeros_like(v, dtype=int) if v.ndim else 0
    c = np.asarray(model.centroids)
    dist = np.abs(v[..., None] - c)
    label = np.where(v > 0, np.argmin(dist, axis=-1) + 1, 0)
    return label if v.ndim else int(label)


def segment_sequences(dates, fire_flags, department_id=""):
    """Group fire days into sequences, merging gaps of up to 3 inactive days.

    Returns (sequences, mean_length). Sequence length counts calendar days
    from first to last fire day inclusive. No fires -> ([], nan).
    """
    fire_days = [d for d, f in zip(dates, fire_flags) if f]
    if not fire_days:
        return [], float("nan")
    seqs = []
    start = prev = fire_days[0]
    for d in fire_days[1:]:
        inactive = (d - prev).days - 1
        if inactive > SEQUENCE_GAP_DAYS:
            seqs.append(FireSequence(department_id, start, prev))
            start = d
        prev = d
    seqs.append(FireSequence(department_id, start, prev))
    mean_len = float(np.mean([s.length_days for s in seqs]))
    return seqs, mean_len


def kernel_half_width(mean_sequence_length):
    """Round-half-up of the mean training sequence length, minimum 1."""
    if not np.isfinite(mean_sequence_length):
        return 1
    return max(1, int(np.floor(mean_sequence_length + 0.5)))


def past_risk_feature(labels, h):
    """Causal cubic-kernel convolution of the ordinal label series.

    feature(t) = sum over d=1..h of w(d) * label(t-d) with weights
    w(d) proportional to 1 - (d-1)^3 / h^3, normalized to sum 1 over the
    lags actually available (partial windows near the start renormalize;
    t=0 has no past and stays 0). Never reads label(t) or later.
    """
    if h < 1:
        raise LabelingError("kernel half-width must be >= 1")
    y = np.asarray(labels, float)
    nt = len(y)
    raw = np.array([1.0 - (d - 1) ** 3 / h**3 for d in range(1, h + 1)])
    out = np.zeros(nt)
    for t in range(1, nt):
        m = min(h, t)
        w = raw[:m] / raw[:m].sum()
        out[t] = float(np.dot(w, y[t - 1 :: -1][:m]))
    return out
