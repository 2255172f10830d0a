"""Ordinal evaluation suite: binary F1, ordinal IoU, AUOC, area scores.

All metrics are pure functions of (truth, prediction). The ordinal error
measure is a normalized penalty proportional to the distance from the
confusion-matrix diagonal: 0 for a perfect model, 1 when every sample sits
at maximal class distance. The area score integrates the per-department
score curve (trapezoid rule over departments ordered by id) and normalizes
by the best-possible constant score of 1.
"""

import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

N_CLASSES = 5


class EvaluationError(ValueError):
    pass


def confusion_matrix(truth, pred, k=N_CLASSES):
    """K x K count matrix, rows = truth class, columns = predicted class."""
    t = np.asarray(truth, int)
    p = np.asarray(pred, int)
    if t.shape != p.shape:
        raise EvaluationError("truth and prediction length mismatch")
    cm = np.zeros((k, k), int)
    np.add.at(cm, (t, p), 1)
    return cm


def binary_prf(truth, pred):
    """Precision/recall/F1 for 'at least one fire' (class >= 1).

    Degenerate cases: no predicted positives -> precision 0; no true
    positives -> recall 0; F1 is 0 whenever precision + recall is 0.
    """
    t = np.asarray(truth, int) >= 1
    p = np.asarray(pred, int) >= 1
    tp = int(np.sum(t & p))
    fp = int(np.sum(~t & p))
    fn = int(np.sum(t & ~p))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def ordinal_iou(truth, pred):
    """Micro IoU over class values: sum(min) / sum(max); 1.0 when both all-zero."""
    t = np.asarray(truth, float)
    p = np.asarray(pred, float)
    denom = np.maximum(t, p).sum()
    if denom == 0:
        return 1.0
    return float(np.minimum(t, p).sum() / denom)


def auoc(cm):
    """Normalized ordinal penalty of a confusion matrix.

    sum of C[i,j] * |i - j| over all cells, divided by N * (K - 1).
    0 iff all mass is on the diagonal; 1 iff all mass is at maximal
    distance from it.
    """
    cm = np.asarray(cm)
    n = cm.sum()
    if n == 0:
        raise EvaluationError("empty confusion matrix")
    k = cm.shape[0]
    if k < 2:
        raise EvaluationError("confusion matrix needs K >= 2")
    i, j = np.indices(cm.shape)
    return float((cm * np.abs(i - j)).sum() / (n * (k - 1)))


def area_score(scores_by_dept):
    """Area-normalized score over fire departments, ordered by id.

    Trapezoid integral of the score sequence at unit spacing divided by the
    integral of the constant maximum score 1. A single department returns
    its own score; constant scores return that constant exactly.
    """
    if not scores_by_dept:
        raise EvaluationError("area score needs at least one department")
    ordered = [scores_by_dept[d] for d in sorted(scores_by_dept)]
    s = np.asarray(ordered, float)
    if len(s) == 1:
        return float(s[0])
    return float(np.trapezoid(s) / (len(s) - 1))


def scores_to_classes(score_rows):
    """Argmax of class-score vectors; exact ties go to the lower class."""
    s = np.asarray(score_rows, float)
    return s.argmax(axis=1)


@dataclass
class MetricReport:
    model: str
    target: str
    global_metrics: dict
    per_department: dict
    area: dict
    confusion: list

    def to_dict(self):
        return {
            "model": self.model,
            "target": self.target,
            "global": self.global_metrics,
            "per_department": self.per_department,
            "area": self.area,
            "confusion": self.confusion,
        }


def _metric_block(truth, pred):
    precision, recall, f1 = binary_prf(truth, pred)
    cm = confusion_matrix(truth, pred)
    return {
        "f1": f1,
        "precision": precision,
        "recall": recall,
        "iou": ordinal_iou(truth, pred),
        "auoc": auoc(cm),
    }, cm


def evaluate(pred_frame, truth_frame, model="", target=""):
    """Score a prediction set against truth labels.

    Both frames carry columns (department, date) plus 'label' on the truth
    side and 'pred' (already argmaxed class) on the prediction side. Every
    truth row must be covered exactly once. Area scores are computed over
    departments with at least one positive truth day, and exclude auoc.
    """
    merged = truth_frame.merge(
        pred_frame, on=["department", "date"], how="left", validate="one_to_one"
    )
    gaps = merged[merged["pred"].isna()]
    if len(gaps):
        sample = gaps[["department", "date"]].head(5).to_records(index=False)
        raise EvaluationError(
            f"predictions miss {len(gaps)} (department, date) pairs, e.g. {list(sample)}"
        )
    truth = merged["label"].to_numpy(int)
    pred = merged["pred"].to_numpy(int)
    global_metrics, cm = _metric_block(truth, pred)

    per_department = {}
    fire_depts = []
    for dept, grp in merged.groupby("department", sort=True):
        block, _ = _metric_block(grp["label"].to_numpy(int), grp["pred"].to_numpy(int))
        per_department[str(dept)] = block
        if (grp["label"] > 0).any():
            fire_depts.append(str(dept))
    if fire_depts:
        area = {
            m: area_score({d: per_department[d][m] for d in fire_depts})
            for m in ("f1", "precision", "recall", "iou")
        }
    else:
        area = {}
    return MetricReport(model, target, global_metrics, per_department, area,
                        cm.tolist())


def write_report(reports, json_path=None, csv_path=None):
    """Serialize reports deterministically to report.json / report.csv."""
    payload = [r.to_dict() for r in reports]
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
    if csv_path is not None:
        rows = []
        for r in reports:
            row = {"model": r.model, "target": r.target}
            row.update({k: r.global_metrics[k] for k in sorted(r.global_metrics)})
            row.update({f"area_{k}": r.area[k] for k in sorted(r.area)})
            rows.append(row)
        pd.DataFrame(rows).to_csv(csv_path, index=False)
    return payload
