"""Evaluation of inferred graphs against ground truth.

All graph metrics look only at off-diagonal cells: self-causal links are ignored.
Matrices are indexed ``[source, target]`` throughout.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy.stats import rankdata

from gvar.errors import DimensionError, UndefinedMetricError


class Confusion(NamedTuple):
    tp: int
    fp: int
    tn: int
    fn: int


def off_diagonal(matrix):
    """Off-diagonal entries of a square matrix, row-major."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {matrix.shape}")
    return matrix[~np.eye(matrix.shape[0], dtype=bool)]


def _check_pair(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def confusion_from_labels(pred, truth):
    pred = np.asarray(pred).astype(bool).ravel()
    truth = np.asarray(truth).astype(bool).ravel()
    tp = int(np.sum(pred & truth))
    fp = int(np.sum(pred & ~truth))
    tn = int(np.sum(~pred & ~truth))
    fn = int(np.sum(~pred & truth))
    return Confusion(tp, fp, tn, fn)


def confusion(predicted, truth):
    """TP/FP/TN/FN over the off-diagonal cells of two binary ``p x p`` matrices."""
    predicted, truth = _check_pair(predicted, truth)
    return confusion_from_labels(off_diagonal(predicted), off_diagonal(truth))


def balanced_accuracy(c):
    """Mean of sensitivity and specificity.

    If the truth has no positives (or no negatives) the undefined half is dropped
    and the defined half is returned; with neither, the score is undefined.
    """
    tp, fp, tn, fn = c
    halves = []
    if tp + fn > 0:
        halves.append(tp / (tp + fn))
    if tn + fp > 0:
        halves.append(tn / (tn + fp))
    if not halves:
        raise UndefinedMetricError("balanced accuracy needs at least one truth cell")
    return float(np.mean(halves))


def accuracy(c):
    tp, fp, tn, fn = c
    total = tp + fp + tn + fn
    if total == 0:
        raise UndefinedMetricError("accuracy of an empty set")
    return (tp + tn) / total


def _scores_and_labels(scores, truth):
    scores, truth = _check_pair(scores, truth)
    s = off_diagonal(scores).astype(float)
    y = off_diagonal(truth).astype(bool)
    if not np.all(np.isfinite(s)):
        raise UndefinedMetricError("scores must be finite")
    if y.all() or not y.any():
        raise UndefinedMetricError("truth has a single class off the diagonal")
    return s, y


def auroc_labels(s, y):
    """Mann-Whitney AUROC; tied positive/negative pairs earn half credit."""
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs both classes")
    ranks = rankdata(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auprc_labels(s, y):
    """Non-interpolated average precision: sum over thresholds of dRecall * precision."""
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=bool)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        raise UndefinedMetricError("AUPRC needs both classes")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    tp = np.cumsum(y)
    fp = np.cumsum(~y)
    # last index of each block of tied scores
    ends = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tp, fp = tp[ends], fp[ends]
    precision = tp / (tp + fp)
    recall = tp / n_pos
    d_recall = np.diff(np.r_[0.0, recall])
    return float(np.sum(d_recall * precision))


def auroc(scores, truth):
    return auroc_labels(*_scores_and_labels(scores, truth))


def auprc(scores, truth):
    return auprc_labels(*_scores_and_labels(scores, truth))


def sign_balanced_accuracies(pred_sign, truth_sign):
    """One-vs-rest BA for ``+1`` cells and for ``-1`` cells, off-diagonal.

    Returns ``(ba_pos, ba_neg)``; a score is ``None`` when the truth has no
    cells of that sign.
    """
    pred_sign, truth_sign = _check_pair(pred_sign, truth_sign)
    ps, ts = off_diagonal(pred_sign), off_diagonal(truth_sign)
    out = []
    for target in (1, -1):
        truth_bin = ts == target
        if not truth_bin.any():
            out.append(None)
            continue
        out.append(balanced_accuracy(confusion_from_labels(ps == target, truth_bin)))
    return tuple(out)


def rmse(forecasts, actuals):
    """Per-variable root-mean-square error averaged over variables."""
    forecasts, actuals = _check_pair(np.asarray(forecasts, float), np.asarray(actuals, float))
    if forecasts.ndim != 2:
        raise DimensionError("rmse expects T x p arrays")
    return float(np.mean(np.sqrt(np.mean((forecasts - actuals) ** 2, axis=0))))


@dataclass
class EvalReport:
    acc: float | None = None
    ba: float | None = None
    auroc: float | None = None
    auprc: float | None = None
    ba_pos: float | None = None
    ba_neg: float | None = None
    rmse: float | None = None

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def evaluate(truth, adjacency=None, scores=None, sign=None, forecasts=None, actuals=None):
    """Every metric the inputs permit; undefined ones are left as ``None``."""
    report = EvalReport()
    if adjacency is not None:
        c = confusion(adjacency, truth.adjacency)
        report.acc = accuracy(c)
        try:
            report.ba = balanced_accuracy(c)
        except UndefinedMetricError:
            pass
    if scores is not None:
        try:
            report.auroc = auroc(scores, truth.adjacency)
            report.auprc = auprc(scores, truth.adjacency)
        except UndefinedMetricError:
            pass
    if sign is not None:
        report.ba_pos, report.ba_neg = sign_balanced_accuracies(sign, truth.sign)
    if forecasts is not None and actuals is not None:
        report.rmse = rmse(forecasts, actuals)
    return report
