"""Feature encoding, spatial aggregation, standardization, and selection.

Calendar and categorical columns are target-encoded with ordered (prefix)
statistics so no row ever sees its own or any later target value; the fit
runs over training rows in timestamp order and validation/test rows reuse
the final training statistics. Aggregation collapses rasters to one row
per (department, date); selection drops zero-variance columns and prunes
highly correlated pairs keeping the higher-variance member.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

SMOOTHING_A = 1.0
CORRELATION_THRESHOLD = 0.95

# columns exempt from standardization, by prefix
PASSTHROUGH_PREFIXES = ("past_risk", "past_ba")

# fixed-date French public holidays (month, day)
HOLIDAYS = {(1, 1), (5, 1), (5, 8), (7, 14), (8, 15), (11, 1), (11, 11), (12, 25)}


@dataclass
class EncoderModel:
    """Running per-category target statistics for one categorical feature."""

    feature: str
    a: float
    prior: float
    sums: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)

    def encode_value(self, cat):
        s = self.sums.get(cat, 0.0)
        n = self.counts.get(cat, 0)
        return (s + self.a * self.prior) / (n + self.a)


def ordered_target_encode(categories, targets, a=SMOOTHING_A, prior=None,
                          feature=""):
    """Leakage-free ordered target encoding over rows already in time order.

    enc(i) = (sum of prior same-category targets + a * P) / (count + a).
    Returns (encoded array, fitted EncoderModel holding the final training
    statistics for use at inference time).
    """
    cats = list(categories)
    y = np.asarray(targets, float)
    if prior is None:
        prior = float(y.mean()) if len(y) else 0.0
    model = EncoderModel(feature, float(a), float(prior))
    out = np.empty(len(cats))
    for i, cat in enumerate(cats):
        out[i] = model.encode_value(cat)
        model.sums[cat] = model.sums.get(cat, 0.0) + y[i]
        model.counts[cat] = model.counts.get(cat, 0) + 1
    return out, model


def apply_encoder(categories, model):
    """Encode with frozen statistics; unseen categories fall back to the prior."""
    return np.array([model.encode_value(c) for c in categories])


def calendar_categories(dates):
    """Raw calendar categories for the five calendar encoders."""
    idx = pd.DatetimeIndex(pd.to_datetime(list(dates)))
    return {
        "dow": idx.dayofweek.astype(str),
        "month": idx.month.astype(str),
        "doy_bucket": (idx.dayofyear // 10).astype(str),
        "holiday": np.array(
            [str(int((m, d) in HOLIDAYS)) for m, d in zip(idx.month, idx.day)]
        ),
        "weekend": (idx.dayofweek >= 5).astype(int).astype(str),
    }


def calendar_features(dates, targets, train_mask, a=SMOOTHING_A):
    """Ordered-encoded calendar block plus cross-encoder aggregates.

    Training rows get prefix encodings; others get the frozen statistics.
    Returns (DataFrame of cal_* columns, dict of fitted encoders). The
    aggregate columns are mean/sum/min/max across the five encoders.
    """
    cats = calendar_categories(dates)
    train_mask = np.asarray(train_mask, bool)
    y = np.asarray(targets, float)
    prior = float(y[train_mask].mean()) if train_mask.any() else 0.0
    cols, encoders = {}, {}
    for name, values in cats.items():
        enc = np.empty(len(y))
        enc_train, model = ordered_target_encode(
            np.asarray(values)[train_mask], y[train_mask], a, prior, feature=name
        )
        enc[train_mask] = enc_train
        enc[~train_mask] = apply_encoder(np.asarray(values)[~train_mask], model)
        cols[f"cal_{name}"] = enc
        encoders[name] = model
    block = pd.DataFrame(cols)
    stack = block.to_numpy()
    block["cal_mean"] = stack.mean(axis=1)
    block["cal_sum"] = stack.sum(axis=1)
    block["cal_min"] = stack.min(axis=1)
    block["cal_max"] = stack.max(axis=1)
    return block, encoders


def encode_categorical_raster(raster, fire_counts, train_steps):
    """Target-encode a static categorical raster by training fire counts.

    Each category's encoding is the smoothed mean of per-day fire counts
    summed over the training period at cells carrying that category.
    Returns a numeric raster of the same shape.
    """
    cat = np.asarray(raster)
    counts = np.asarray(fire_counts)[:train_steps].sum(axis=0)
    total = counts.sum()
    n_cells = cat.size
    prior = total / n_cells
    out = np.empty(cat.shape, float)
    for value in np.unique(cat):
        mask = cat == value
        out[mask] = (counts[mask].sum() + SMOOTHING_A * prior) / (
            mask.sum() + SMOOTHING_A
        )
    return out


def aggregate_spatial(cube, masks=None):
    """Collapse a cube to per-(department, date) min/max/mean per feature.

    masks maps zone name -> boolean [y][x] array; default is one zone
    covering the whole department. Returns a DataFrame indexed by date with
    columns <feature>_<zone>_{min,max,mean} (zone omitted for the default).
    """
    if masks is None:
        masks = {"": np.ones((cube.grid.n_y, cube.grid.n_x), bool)}
    cols = {}
    for zone, mask in masks.items():
        mask = np.asarray(mask, bool)
        if not mask.any():
            raise ValueError(f"empty mask for zone '{zone}'")
        sub = cube.values[:, mask, :]  # [time][cells][feature]
        tag = f"_{zone}" if zone else ""
        for fi, name in enumerate(cube.feature_names):
            v = sub[:, :, fi]
            cols[f"{name}{tag}_min"] = v.min(axis=1)
            cols[f"{name}{tag}_max"] = v.max(axis=1)
            cols[f"{name}{tag}_mean"] = v.mean(axis=1)
    return pd.DataFrame(cols, index=pd.Index(cube.dates, name="date"))


@dataclass
class Scaler:
    mean: pd.Series
    std: pd.Series
    passthrough: list


def standardize(table, train_mask, passthrough_prefixes=PASSTHROUGH_PREFIXES):
    """Z-score numeric columns with training statistics.

    past_risk*/past_ba* columns pass through untouched; zero-variance
    columns pass through with a warning. Returns (table, Scaler).
    """
    train_mask = np.asarray(train_mask, bool)
    out = table.copy()
    passthrough = [
        c for c in table.columns if c.startswith(tuple(passthrough_prefixes))
    ]
    scaled_cols = [c for c in table.columns if c not in passthrough]
    mu = table.loc[train_mask, scaled_cols].mean()
    sigma = table.loc[train_mask, scaled_cols].std(ddof=0)
    constant = sigma[sigma == 0].index.tolist()
    if constant:
        warnings.warn(f"constant columns left unscaled: {constant}", stacklevel=2)
        passthrough.extend(constant)
        scaled_cols = [c for c in scaled_cols if c not in constant]
    out[scaled_cols] = (table[scaled_cols] - mu[scaled_cols]) / sigma[scaled_cols]
    return out, Scaler(mu[scaled_cols], sigma[scaled_cols], passthrough)


def select_features(table, threshold=CORRELATION_THRESHOLD):
    """Prune zero-variance and highly correlated columns on training rows.

    Phase 1 drops constant columns. Phase 2 walks candidate pairs in
    descending max(|Pearson|, |Spearman|, |Kendall tau-b|) order (column
    names break ties) and, when any of the three reaches the threshold,
    drops the lower-variance member unless one side is already gone.
    Returns (retained column list, report dict of dropped -> reason).
    """
    dropped = {}
    var = table.var(ddof=0)
    keep = []
    for c in table.columns:
        if var[c] == 0 or not np.isfinite(var[c]):
            dropped[c] = "zero variance"
        else:
            keep.append(c)
    data = table[keep]
    n = len(keep)
    if n > 1 and len(data) > 1:
        x = data.to_numpy(float)
        pearson = np.corrcoef(x, rowvar=False)
        spearman = stats.spearmanr(x).statistic
        if n == 2:
            spearman = np.array([[1.0, float(spearman)], [float(spearman), 1.0]])
        pairs = []
        for i in range(n):
            for j in range(i + 1, n):
                tau = stats.kendalltau(x[:, i], x[:, j]).statistic
                strength = max(abs(pearson[i, j]), abs(spearman[i, j]), abs(tau))
                if strength >= threshold:
                    pairs.append((strength, keep[i], keep[j]))
        pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
        alive = set(keep)
        for _, a, b in pairs:
            if a not in alive or b not in alive:
                continue
            if (var[a], a) < (var[b], b):
                loser, winner = a, b
            else:
                loser, winner = b, a
            alive.discard(loser)
            dropped[loser] = f"correlated >= {threshold} with {winner}"
        keep = [c for c in keep if c in alive]
    return keep, dropped
