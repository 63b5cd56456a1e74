"""Prediction-quality metrics for regression and classification.

AUROC is the rank-based Mann-Whitney statistic with midranks for ties, so a
tied positive/negative pair counts one half.  The calibration curve uses ten
equal-width bins on [0, 1] with empty bins omitted.
"""

from __future__ import annotations

import numpy as np

from ..errors import DataError

__all__ = [
    "rmse",
    "mae",
    "r_squared",
    "brier",
    "auroc",
    "calibration_curve",
    "eval_metrics",
    "pearson",
    "kendall_tau",
]


def _check(pred, truth):
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError("predictions and truths must be 1-D of equal length")
    if pred.size == 0:
        raise DataError("empty prediction vector")
    return pred, truth


def rmse(pred, truth) -> float:
    pred, truth = _check(pred, truth)
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def mae(pred, truth) -> float:
    pred, truth = _check(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


def r_squared(pred, truth) -> float:
    pred, truth = _check(pred, truth)
    ss_res = float(np.sum((truth - pred) ** 2))
    ss_tot = float(np.sum((truth - truth.mean()) ** 2))
    if ss_tot == 0.0:
        return float("nan")
    return 1.0 - ss_res / ss_tot


def brier(pred, truth) -> float:
    pred, truth = _check(pred, truth)
    return float(np.mean((pred - truth) ** 2))


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=float)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auroc(scores, labels) -> float | None:
    """Mann-Whitney AUROC with tie correction; None when one class is absent."""
    scores, labels = _check(scores, labels)
    if not np.all(np.isin(labels, (0.0, 1.0))):
        raise DataError("labels must be 0/1")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _midranks(scores)
    rank_sum = float(ranks[labels == 1.0].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def calibration_curve(pred, truth, bins: int = 10) -> list[dict]:
    """Equal-width reliability bins over [0, 1]; empty bins are omitted."""
    pred, truth = _check(pred, truth)
    idx = np.minimum((pred * bins).astype(int), bins - 1)
    out = []
    for b in range(bins):
        mask = idx == b
        count = int(mask.sum())
        if count == 0:
            continue
        out.append(
            {
                "bin_low": b / bins,
                "bin_high": (b + 1) / bins,
                "mean_predicted": float(pred[mask].mean()),
                "fraction_positive": float(truth[mask].mean()),
                "count": count,
            }
        )
    return out


def _classification_counts(scores, labels, threshold=0.5):
    pred = scores >= threshold
    pos = labels == 1.0
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    fn = int(np.sum(~pred & pos))
    tn = int(np.sum(~pred & ~pos))
    return tp, fp, fn, tn


def eval_metrics(predictions, truths, task: str) -> dict:
    """Metric set for one prediction vector.

    task="regression": rmse, mae, r2.  task="classification": brier, auroc
    (None if one class), accuracy/precision/recall/f1 at threshold 0.5, and
    the ten-bin calibration curve.  Undefined ratios (no predicted positives,
    no true positives) report 0.0.
    """
    if task == "regression":
        return {
            "rmse": rmse(predictions, truths),
            "mae": mae(predictions, truths),
            "r2": r_squared(predictions, truths),
        }
    if task != "classification":
        raise ValueError(f"unknown task {task!r}")
    pred, truth = _check(predictions, truths)
    if not np.all(np.isin(truth, (0.0, 1.0))):
        raise DataError("classification truths must be 0/1")
    tp, fp, fn, tn = _classification_counts(pred, truth)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "brier": brier(pred, truth),
        "auroc": auroc(pred, truth),
        "accuracy": (tp + tn) / truth.size,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "calibration_curve": calibration_curve(pred, truth),
    }


def pearson(a, b) -> float:
    a, b = _check(a, b)
    sa = float(np.std(a))
    sb = float(np.std(b))
    if sa == 0.0 or sb == 0.0:
        return float("nan")
    return float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))


def kendall_tau(a, b) -> float:
    """Kendall tau-b (tie-corrected), brute force over pairs."""
    a, b = _check(a, b)
    n = a.size
    if n < 2:
        return float("nan")
    da = np.sign(a[:, None] - a[None, :])
    db = np.sign(b[:, None] - b[None, :])
    iu = np.triu_indices(n, k=1)
    prod = da[iu] * db[iu]
    concordant_minus_discordant = float(prod.sum())
    ties_a = int(np.sum(da[iu] == 0))
    ties_b = int(np.sum(db[iu] == 0))
    n0 = n * (n - 1) // 2
    denom = np.sqrt(float(n0 - ties_a) * float(n0 - ties_b))
    if denom == 0.0:
        return float("nan")
    return concordant_minus_discordant / denom
