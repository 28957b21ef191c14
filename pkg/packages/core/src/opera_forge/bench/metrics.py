"""Evaluation metrics and significance tests."""

import logging
from typing import NamedTuple

import numpy as np
from scipy import special, stats

from opera_forge.core.exceptions import InvalidInputError, ShapeError

logger = logging.getLogger(__name__)


def _pair(pred: np.ndarray, y: np.ndarray, op: str) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).reshape(-1)
    t = np.asarray(y, dtype=np.float64).reshape(-1)
    if p.shape != t.shape or p.size == 0:
        raise ShapeError(op, p.shape, t.shape)
    return p, t


def auroc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-based (Mann-Whitney) AUROC with average ranks for ties.

    Args:
        scores: Higher means more likely positive
        labels: Truthy for positives

    Raises:
        InvalidInputError: If only one class is present
    """
    s, y = _pair(scores, labels, "auroc")
    positive = y != 0
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InvalidInputError("labels", "AUROC needs both classes")
    ranks = stats.rankdata(s)
    rank_sum = float(ranks[positive].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auroc_multiclass(probabilities: np.ndarray, labels: np.ndarray) -> float:
    """Macro average of one-vs-rest AUROC over the classes present in ``labels``.

    Raises:
        InvalidInputError: If fewer than two classes are present
    """
    probs = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels).astype(np.intp).reshape(-1)
    if probs.ndim != 2 or probs.shape[0] != y.size:
        raise ShapeError("auroc_multiclass", probs.shape, y.shape)
    present = np.unique(y)
    if present.size < 2:
        raise InvalidInputError("labels", "AUROC needs at least two classes")
    skipped = probs.shape[1] - present.size
    if skipped:
        logger.debug("Skipping %d classes absent from the labels", skipped)
    return float(np.mean([auroc(probs[:, k], y == k) for k in present]))


def mae(pred: np.ndarray, y: np.ndarray) -> float:
    p, t = _pair(pred, y, "mae")
    return float(np.mean(np.abs(p - t)))


def mape(pred: np.ndarray, y: np.ndarray) -> float:
    """Mean absolute error relative to ``|y|``.

    Raises:
        InvalidInputError: If any target is zero
    """
    p, t = _pair(pred, y, "mape")
    if np.any(t == 0.0):
        raise InvalidInputError("targets", "MAPE is undefined for zero targets")
    return float(np.mean(np.abs(p - t) / np.abs(t)))


class TTestResult(NamedTuple):
    t: float
    df: float
    p: float


def _sample(values: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64).reshape(-1)
    if x.size < 2:
        raise InvalidInputError(name, "a t-test needs at least two values")
    return x


def student_t_two_sided(t: float, df: float) -> float:
    """Two-sided p-value of Student's t via the regularized incomplete beta."""
    if np.isinf(t):
        return 0.0
    return float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))


def welch_ttest(a: np.ndarray, b: np.ndarray) -> TTestResult:
    """Welch's unequal-variance t-test with Welch-Satterthwaite df.

    When both samples have zero variance, equal means give ``p = 1`` and
    different means give ``p = 0``.

    Raises:
        InvalidInputError: If either sample has fewer than two values
    """
    x, y = _sample(a, "a"), _sample(b, "b")
    va = x.var(ddof=1) / x.size
    vb = y.var(ddof=1) / y.size
    diff = float(x.mean() - y.mean())
    se2 = va + vb
    if se2 == 0.0:
        df = float(x.size + y.size - 2)
        if diff == 0.0:
            return TTestResult(0.0, df, 1.0)
        return TTestResult(float(np.copysign(np.inf, diff)), df, 0.0)
    t = diff / float(np.sqrt(se2))
    df = se2**2 / (va**2 / (x.size - 1) + vb**2 / (y.size - 1))
    return TTestResult(t, float(df), student_t_two_sided(t, float(df)))


def paired_ttest(a: np.ndarray, b: np.ndarray) -> TTestResult:
    """Paired t-test on per-unit differences ``a - b``.

    Constant differences follow the same policy as :func:`welch_ttest`.
    """
    x, y = _sample(a, "a"), _sample(b, "b")
    if x.shape != y.shape:
        raise ShapeError("paired_ttest", x.shape, y.shape)
    diff = x - y
    df = float(diff.size - 1)
    if np.all(diff == diff[0]):
        if diff[0] == 0.0:
            return TTestResult(0.0, df, 1.0)
        return TTestResult(float(np.copysign(np.inf, diff[0])), df, 0.0)
    result = stats.ttest_rel(x, y)
    return TTestResult(float(result.statistic), df, float(result.pvalue))
