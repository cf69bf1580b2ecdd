"""Ranking metrics: average precision, AUROC, and their aggregates.

AP is the step-wise (non-interpolated) sum AP = sum_k (R_k - R_{k-1}) P_k
over ranks sorted by descending score, ties kept in stable input order.
AUROC uses the Mann-Whitney statistic with average ranks for ties, which
equals the trapezoidal ROC area.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.stats import rankdata


def _check_scored(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1D arrays")
    if scores.size == 0:
        raise ValueError("empty scored set")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be binary 0/1")
    return scores, labels.astype(np.int64)


def average_precision(scores, labels) -> float:
    """Area under the stepwise precision-recall curve.

    AP is sensitive to the ordering of tied scores; a warning is emitted
    when ties are present (the stable input order is used).
    """
    scores, labels = _check_scored(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("average precision needs at least one positive")
    if np.unique(scores).size < scores.size:
        warnings.warn("tied scores: AP depends on input order", stacklevel=2)
    order = np.argsort(-scores, kind="stable")
    y = labels[order]
    tp = np.cumsum(y)
    precision = tp / np.arange(1, len(y) + 1)
    return float(precision[y == 1].sum() / n_pos)


def auroc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative."""
    scores, labels = _check_scored(scores, labels)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs at least one positive and one negative")
    ranks = rankdata(scores, method="average")
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def mean_ap(values) -> float:
    """Unweighted arithmetic mean of per-dataset AP values."""
    values = list(values)
    if not values:
        raise ValueError("mean over empty list")
    return float(np.mean(values))


def eval_rows(scored_sets) -> list[dict]:
    """Per-dataset metric rows plus an aggregate row.

    ``scored_sets`` is an iterable of (name, scores, labels). The
    aggregate row carries the unweighted mAP and mean AUROC.
    """
    rows = []
    for name, scores, labels in scored_sets:
        _, lab = _check_scored(scores, labels)
        rows.append(
            {
                "dataset": name,
                "ap": average_precision(scores, labels),
                "auroc": auroc(scores, labels),
                "n_pos": int(lab.sum()),
                "n_neg": int(len(lab) - lab.sum()),
            }
        )
    if not rows:
        raise ValueError("no scored sets")
    rows.append(
        {
            "dataset": "mean",
            "ap": mean_ap([r["ap"] for r in rows]),
            "auroc": mean_ap([r["auroc"] for r in rows]),
            "n_pos": sum(r["n_pos"] for r in rows),
            "n_neg": sum(r["n_neg"] for r in rows),
        }
    )
    return rows


def format_eval_report(rows, header_lines=()) -> str:
    """Tab-separated report text: one row per dataset plus the aggregate."""
    out = [f"# {line}" for line in header_lines]
    out.append("dataset\tap\tauroc\tn_pos\tn_neg")
    for r in rows:
        out.append(f"{r['dataset']}\t{r['ap']:.6f}\t{r['auroc']:.6f}\t{r['n_pos']}\t{r['n_neg']}")
    return "\n".join(out) + "\n"
