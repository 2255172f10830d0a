"""Reference predictors and the external-model benchmark interface.

Class imbalance is handled by undersampling class-0 rows on a 5% grid and
picking the proportion that maximizes validation IoU. The internal
baselines are a multinomial logistic regression trained by full-batch
gradient descent on cross-entropy + L2, and a threshold classifier over
the FWI value. External models enter through predictions.csv.
"""

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .evaluation import N_CLASSES, ordinal_iou

UNDERSAMPLE_GRID = tuple(round(0.05 * i, 2) for i in range(1, 21))

# placeholder FWI class boundaries, not calibrated against any published
# danger scale; override via configuration
DEFAULT_FWI_THRESHOLDS = (5.0, 10.0, 20.0, 30.0)

WINDOW_LENGTH = 10


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class UndersamplePolicy:
    proportion: float
    seed: int

    def __post_init__(self):
        if not any(math.isclose(self.proportion, g) for g in UNDERSAMPLE_GRID):
            raise ModelError(
                f"undersample proportion {self.proportion} not on the 5% grid"
            )


def undersample(labels, policy):
    """Indices of retained training rows: all positives, ceil(p*n0) zeros."""
    y = np.asarray(labels, int)
    zeros = np.flatnonzero(y == 0)
    positives = np.flatnonzero(y > 0)
    n_keep = math.ceil(policy.proportion * len(zeros))
    rng = np.random.default_rng(policy.seed)
    kept_zeros = rng.choice(zeros, size=n_keep, replace=False) if len(zeros) else zeros
    return np.sort(np.concatenate([positives, kept_zeros]))


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class MultinomialLogistic:
    """Softmax regression over ordinal classes 0..k-1."""

    weights: np.ndarray  # [features + 1, k], last row is the bias
    classes: int = N_CLASSES

    def predict_scores(self, x):
        x = np.asarray(x, float)
        z = x @ self.weights[:-1] + self.weights[-1]
        return softmax(z)

    def predict(self, x):
        return self.predict_scores(x).argmax(axis=1)


def ce_loss_and_grad(weights, x, y_onehot, l2):
    """Cross-entropy + L2 loss and its gradient w.r.t. the weight matrix."""
    n = x.shape[0]
    z = x @ weights[:-1] + weights[-1]
    p = softmax(z)
    eps = 1e-12
    loss = -np.log(p[np.arange(n), y_onehot.argmax(axis=1)] + eps).mean()
    loss += 0.5 * l2 * float((weights[:-1] ** 2).sum())
    delta = (p - y_onehot) / n
    grad = np.vstack([x.T @ delta + l2 * weights[:-1], delta.sum(axis=0)])
    return loss, grad


def fit_multinomial_logistic(x, y, l2=1e-4, lr=5e-5, epochs=500, seed=0,
                             classes=N_CLASSES):
    """Full-batch gradient descent on multinomial cross-entropy.

    Aborts with diagnostics if the loss goes non-finite. Returns the
    fitted model; scores always sum to 1 by construction.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, int)
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 1e-3, size=(x.shape[1] + 1, classes))
    onehot = np.eye(classes)[y]
    for epoch in range(epochs):
        loss, grad = ce_loss_and_grad(w, x, onehot, l2)
        if not np.isfinite(loss):
            raise ModelError(
                f"non-finite loss at epoch {epoch}: lr={lr}, |w|max={np.abs(w).max():.3g}"
            )
        w -= lr * grad
    return MultinomialLogistic(w, classes)


@dataclass(frozen=True)
class FwiThresholds:
    cuts: tuple = DEFAULT_FWI_THRESHOLDS

    def __post_init__(self):
        if list(self.cuts) != sorted(set(self.cuts)) or len(self.cuts) != 4:
            raise ModelError("FWI thresholds must be 4 strictly increasing values")


def fwi_classifier(fwi_value, thresholds=FwiThresholds()):
    """Class 0-4 = number of thresholds strictly below the FWI value."""
    v = np.asarray(fwi_value, float)
    cuts = np.asarray(thresholds.cuts)
    cls = (v[..., None] > cuts).sum(axis=-1)
    return cls if v.ndim else int(cls)


def sweep_undersample(train_x, train_y, val_x, val_y, learner, seed=0,
                      grid=UNDERSAMPLE_GRID):
    """Select the class-0 proportion maximizing validation IoU.

    learner(x, y, seed) -> fitted model with .predict. Each grid point
    trains on its own derived seed; ties pick the smaller proportion.
    Returns (proportion, model, iou_by_proportion).
    """
    results = {}
    best = None
    for i, p in enumerate(grid):
        policy = UndersamplePolicy(p, seed + 1000 + i)
        keep = undersample(train_y, policy)
        model = learner(train_x[keep], np.asarray(train_y)[keep], seed)
        iou = ordinal_iou(val_y, model.predict(val_x))
        results[p] = iou
        if best is None or iou > best[0] + 1e-15:
            best = (iou, p, model)
    return best[1], best[2], results


PREDICTION_COLUMNS = ["model", "target", "department", "date", "s0", "s1", "s2", "s3", "s4"]
BINARY_COLUMNS = ["model", "target", "department", "date", "p"]


def ingest_predictions(path, truth_frame=None, tol=1e-6):
    """Read and validate predictions.csv against the wire schema.

    Multi-class rows carry s0..s4 summing to 1 within tolerance; binary
    rows carry a single probability p. When truth_frame is given, coverage
    and department membership are checked against it. Returns a DataFrame
    with an added 'pred' argmax column (ties to the lower class).
    """
    df = pd.read_csv(path, dtype={"department": str})
    if set(PREDICTION_COLUMNS) <= set(df.columns):
        score_cols = ["s0", "s1", "s2", "s3", "s4"]
        sums = df[score_cols].sum(axis=1)
        bad = df.index[(sums - 1.0).abs() > tol]
        if len(bad):
            raise ModelError(
                f"score rows not summing to 1 (lines {[int(i) + 2 for i in bad[:5]]})"
            )
        if (df[score_cols] < 0).any().any():
            raise ModelError("negative class scores")
        scores = df[score_cols].to_numpy()
        df["pred"] = scores.argmax(axis=1)
    elif set(BINARY_COLUMNS) <= set(df.columns):
        if not df["p"].between(0, 1).all():
            raise ModelError("binary probabilities outside [0,1]")
        df["pred"] = (df["p"] >= 0.5).astype(int)
    else:
        raise ModelError(
            f"predictions file must carry columns {PREDICTION_COLUMNS} or {BINARY_COLUMNS}"
        )
    if df.duplicated(["department", "date"]).any():
        raise ModelError("duplicate (department, date) rows in predictions")
    if truth_frame is not None:
        truth_depts = set(truth_frame["department"].astype(str))
        extra = sorted(set(df["department"]) - truth_depts)
        if extra:
            raise ModelError(f"unknown departments in predictions: {extra}")
        have = set(zip(df["department"], df["date"]))
        missing = [
            pair for pair in zip(truth_frame["department"].astype(str), truth_frame["date"])
            if pair not in have
        ]
        if missing:
            raise ModelError(
                f"predictions miss {len(missing)} (department, date) pairs, e.g. {missing[:5]}"
            )
    return df


def export_windows(features, labels, departments, dates, path,
                   feature_names=None, window=WINDOW_LENGTH):
    """Emit trailing fixed-length feature windows for sequence models.

    For each (department, date) with at least `window` days of history
    (inclusive of the date itself), writes the [window][feature] block plus
    the label. File layout: one JSON header line (shape, feature names,
    row index), then little-endian float32 payload [window][time][feature].
    Rows with insufficient history are skipped; their count is returned.
    """
    x = np.asarray(features, float)
    y = np.asarray(labels, int)
    departments = np.asarray(departments)
    blocks, index = [], []
    skipped = 0
    for dept in pd.unique(departments):
        ix = np.flatnonzero(departments == dept)
        for pos in range(len(ix)):
            if pos + 1 < window:
                skipped += 1
                continue
            rows = ix[pos - window + 1 : pos + 1]
            blocks.append(x[rows])
            index.append(
                {"department": str(dept), "date": str(dates[ix[pos]]), "label": int(y[ix[pos]])}
            )
    payload = (
        np.stack(blocks).astype("<f4")
        if blocks
        else np.zeros((0, window, x.shape[1]), "<f4")
    )
    header = {
        "shape": list(payload.shape),
        "feature_names": list(feature_names) if feature_names else None,
        "window": window,
        "rows": index,
        "skipped": skipped,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(payload.tobytes())
    return len(blocks), skipped


def read_windows(path):
    """Inverse of export_windows; returns (header, array [n][window][feature])."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        payload = np.frombuffer(fh.read(), dtype="<f4").reshape(header["shape"])
    return header, payload


def uniform_random_predictor(n, seed, classes=N_CLASSES):
    """Seeded uniform class choice; the floor any baseline must beat."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, classes, size=n)
