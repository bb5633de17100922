"""Classification and ranking metrics: ROC-AUC, precision-recall, recall at fixed precision."""

from __future__ import annotations

import csv
from typing import NamedTuple

import numpy as np
from scipy.stats import rankdata

# slack when comparing a curve precision against a target computed elsewhere
PRECISION_SLACK = 1e-12


class PRCurve(NamedTuple):
    recall: np.ndarray
    precision: np.ndarray
    thresholds: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["threshold", "precision", "recall"])
            for t, p, r in zip(self.thresholds, self.precision, self.recall):
                w.writerow([repr(float(t)), repr(float(p)), repr(float(r))])


def _as_arrays(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-D arrays of equal length")
    return scores, labels


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC from average ranks, so tied pairs get half credit."""
    scores, labels = _as_arrays(scores, labels)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC-AUC needs at least one positive and one negative")
    ranks = rankdata(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def pr_curve(scores, labels) -> PRCurve:
    """One (recall, precision) point per distinct score, highest score first."""
    scores, labels = _as_arrays(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("precision-recall needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    s, l = scores[order], labels[order]
    # last index of every tie group
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(l)[ends]
    n_sel = ends + 1
    return PRCurve(tp / n_pos, tp / n_sel, s[ends])


def pr_auc(scores, labels) -> float:
    """Average precision: sum of recall increments times precision."""
    curve = pr_curve(scores, labels)
    d_recall = np.diff(np.r_[0.0, curve.recall])
    return float(np.sum(d_recall * curve.precision))


def recall_at_precision(scores, labels, target_precision: float) -> float:
    curve = pr_curve(scores, labels)
    ok = curve.precision >= target_precision - PRECISION_SLACK
    return float(curve.recall[ok].max()) if ok.any() else 0.0


def set_precision_recall(selected, relevant, universe_size: int) -> tuple[float, float]:
    selected, relevant = set(int(i) for i in selected), set(int(i) for i in relevant)
    if not relevant:
        raise ValueError("relevant set is empty")
    if any(i < 0 or i >= universe_size for i in selected):
        raise ValueError("selected index outside the feature universe")
    hits = len(selected & relevant)
    precision = hits / len(selected) if selected else 0.0
    return precision, hits / len(relevant)
