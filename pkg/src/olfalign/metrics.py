"""Evaluation metrics: micro-averaged ROC-AUC, ROC curves, NRMSE, Pearson
correlation with a t-distribution p-value, and per-subject noise ceilings.

AUC uses the average-rank (Mann-Whitney) tie convention, which equals the
trapezoid over unique thresholds and the half-credit pair-concordance count.
Pearson r uses the exact-rational core so r(x, x) == 1.0 and |r| <= 1 hold
exactly. The p-value is the two-sided t tail evaluated through the
regularized incomplete beta function: with q = r^2 and df = n - 2,
p = I_{1-q}(df/2, 1/2).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from ._exact import exact_corr_sq
from .errors import UndefinedMetricError
from .core_data import PerSubjectRatings

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray  # decreasing
    fpr: np.ndarray         # nondecreasing, starts 0 ends 1
    tpr: np.ndarray
    auc: float


@dataclass(frozen=True)
class NoiseCeiling:
    descriptors: tuple[str, ...]
    per_descriptor: dict[str, float]          # descriptor -> mean r_j (NaN if undefined)
    per_subject: np.ndarray                   # s x d matrix of r_j (NaN where excluded)
    overall: tuple[float, float]              # mean, std across defined descriptors
    n_excluded: int                           # constant-rating (subject, descriptor) cells


def _tied_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the group average rank."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(values.shape[0], dtype=np.float64)
    i = 0
    while i < sorted_vals.shape[0]:
        j = i
        while j + 1 < sorted_vals.shape[0] and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc_micro(scores: np.ndarray, labels: np.ndarray) -> float:
    """AUC over the pooled (score, label) cells of a multi-label problem."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if scores.shape != labels.shape:
        raise UndefinedMetricError("scores and labels must have identical shapes")
    if not np.all((labels == 0.0) | (labels == 1.0)):
        raise UndefinedMetricError("labels must be 0/1")
    n_pos = int(labels.sum())
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC undefined: pool needs both classes")
    ranks = _tied_ranks(scores)
    pos_rank_sum = float(ranks[labels == 1.0].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_curve(scores: np.ndarray, labels: np.ndarray) -> RocCurve:
    """ROC points at every unique threshold, plus the (0,0) anchor."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    auc = roc_auc_micro(scores, labels)  # validates the pool
    order = np.argsort(-scores, kind="mergesort")
    s_sorted = scores[order]
    y_sorted = labels[order]
    # indices where the threshold changes (last occurrence of each unique score)
    distinct = np.flatnonzero(np.diff(s_sorted)) if s_sorted.size > 1 else np.array([], dtype=int)
    cut = np.concatenate([distinct, [s_sorted.size - 1]])
    tp = np.cumsum(y_sorted)[cut]
    fp = np.cumsum(1.0 - y_sorted)[cut]
    n_pos, n_neg = tp[-1], fp[-1]
    fpr = np.concatenate([[0.0], fp / n_neg])
    tpr = np.concatenate([[0.0], tp / n_pos])
    thresholds = np.concatenate([[np.inf], s_sorted[cut]])
    return RocCurve(thresholds=thresholds, fpr=fpr, tpr=tpr, auc=auc)


def nrmse(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Root mean squared error divided by the range of y_true."""
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    if y_true.shape != y_pred.shape:
        raise UndefinedMetricError("nrmse needs equal-length vectors")
    rng = float(y_true.max() - y_true.min()) if y_true.size else 0.0
    if rng <= 0.0:
        raise UndefinedMetricError("nrmse undefined: y_true has zero range")
    rmse = float(np.sqrt(np.mean((y_true - y_pred) ** 2)))
    return rmse / rng


def pearson(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Pearson correlation and its two-sided p-value (t with n-2 dof)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise UndefinedMetricError("pearson needs equal-length vectors")
    n = x.shape[0]
    if n < 3:
        raise UndefinedMetricError("pearson needs at least 3 samples")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise UndefinedMetricError("pearson undefined for non-finite input")
    try:
        r, r_sq = exact_corr_sq(x, y)
    except ValueError as e:
        raise UndefinedMetricError("pearson undefined for constant input") from e
    df = n - 2
    # 1 - r_sq is exact (Sterbenz) once r_sq is rounded; I_x(df/2, 1/2) is the
    # two-sided tail of the t distribution
    p = float(betainc(df / 2.0, 0.5, max(0.0, 1.0 - r_sq)))
    return r, p


def noise_ceiling(data: PerSubjectRatings, leave_one_out: bool = False) -> NoiseCeiling:
    """Per-descriptor mean correlation between each subject and the
    across-subject mean response.

    The mean response includes the subject's own ratings unless
    leave_one_out is set. A subject is excluded (and counted) for a
    descriptor when fewer than 3 co-rated odorants remain or either vector
    is constant; a descriptor with fewer than 2 surviving subjects is
    marked undefined (NaN).
    """
    s, n, d = data.ratings.shape
    if s < 2:
        raise UndefinedMetricError("noise ceiling needs at least 2 subjects")
    per_subject = np.full((s, d), np.nan)
    per_descriptor: dict[str, float] = {}
    n_excluded = 0
    for j_desc in range(d):
        col = data.ratings[:, :, j_desc]  # s x n
        rated = ~np.isnan(col)
        rated_counts = rated.sum(axis=0)
        any_rated = rated_counts > 0
        # mean relative to the first rated value per odorant, so identical
        # raters yield that value exactly (bitwise) for any subject count
        first_idx = np.argmax(rated, axis=0)
        base = col[first_idx, np.arange(col.shape[1])]
        with np.errstate(invalid="ignore"):
            delta_sum = np.nansum(col - base[None, :], axis=0)
        mean_all = np.where(any_rated,
                            base + delta_sum / np.maximum(rated_counts, 1), np.nan)
        for j_subj in range(s):
            mine = col[j_subj]
            ok = ~np.isnan(mine) & ~np.isnan(mean_all)
            if leave_one_out:
                others = rated_counts - ~np.isnan(mine)
                ok &= others > 0
                with np.errstate(invalid="ignore", divide="ignore"):
                    nan_to_zero = np.where(np.isnan(mine), 0.0, mine)
                    ref = (np.nansum(col, axis=0) - nan_to_zero) / np.where(others > 0, others, 1)
            else:
                ref = mean_all
            if int(ok.sum()) < 3:
                n_excluded += 1
                continue
            try:
                r, _ = pearson(mine[ok], ref[ok])
            except UndefinedMetricError:
                n_excluded += 1
                continue
            per_subject[j_subj, j_desc] = r
        valid = per_subject[:, j_desc]
        valid = valid[~np.isnan(valid)]
        name = data.descriptors[j_desc]
        if valid.shape[0] < 2:
            per_descriptor[name] = float("nan")
            log.warning("noise_ceiling: descriptor %r undefined (<2 valid subjects)", name)
        else:
            per_descriptor[name] = float(valid.mean())
    defined = np.array([v for v in per_descriptor.values() if not np.isnan(v)])
    if defined.size == 0:
        raise UndefinedMetricError("noise ceiling undefined for every descriptor")
    overall = (float(defined.mean()), float(defined.std()))
    return NoiseCeiling(
        descriptors=data.descriptors,
        per_descriptor=per_descriptor,
        per_subject=per_subject,
        overall=overall,
        n_excluded=n_excluded,
    )
