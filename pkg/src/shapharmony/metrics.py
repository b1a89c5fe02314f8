"""Accuracy, precision, recall and F1 with binary, macro, weighted and micro averaging."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Metric(str, Enum):
    ACCURACY = "accuracy"
    PRECISION = "precision"
    RECALL = "recall"
    F1 = "f1"


class Average(str, Enum):
    BINARY = "binary"
    MACRO = "macro"
    WEIGHTED = "weighted"
    MICRO = "micro"


@dataclass(frozen=True)
class MetricKind:
    metric: Metric
    average: Average = Average.WEIGHTED

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric(self.metric))
        object.__setattr__(self, "average", Average(self.average))

    @property
    def label(self) -> str:
        if self.metric is Metric.ACCURACY:
            return "accuracy"
        return f"{self.metric.value}_{self.average.value}"

    @classmethod
    def parse(cls, text: str, average: str | Average = Average.WEIGHTED) -> MetricKind:
        """Accepts ``"f1"`` or ``"f1_macro"`` style names."""
        name, _, avg = text.partition("_")
        return cls(Metric(name), Average(avg) if avg else Average(average))


@dataclass(frozen=True)
class ConfusionCounts:
    """One-vs-rest counts, one entry per class."""

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray

    @property
    def support(self) -> np.ndarray:
        return self.tp + self.fn

    @property
    def n(self) -> int:
        return int(self.tp[0] + self.fp[0] + self.fn[0] + self.tn[0])

    @property
    def class_count(self) -> int:
        return self.tp.size


@dataclass(frozen=True)
class Score:
    value: float
    zero_division: tuple[int, ...] = ()


def confusion(y_true, y_pred, C: int) -> ConfusionCounts:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(f"label vectors must be 1-D and equal length, got {y_true.shape} and {y_pred.shape}")
    if y_true.size and (min(y_true.min(), y_pred.min()) < 0 or max(y_true.max(), y_pred.max()) >= C):
        raise ValueError(f"labels must lie in [0, {C})")
    cm = np.zeros((C, C), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    tp = np.diag(cm).copy()
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    tn = y_true.size - tp - fp - fn
    return ConfusionCounts(tp, fp, fn, tn)


def _ratio(num: np.ndarray, den: np.ndarray) -> tuple[np.ndarray, list[int]]:
    out = np.zeros(num.shape, dtype=np.float64)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out, np.flatnonzero(~ok).tolist()


def per_class(counts: ConfusionCounts, metric: Metric) -> tuple[np.ndarray, list[int]]:
    """Per-class precision, recall or F1; classes with a zero denominator score 0."""
    metric = Metric(metric)
    if metric is Metric.PRECISION:
        return _ratio(counts.tp, counts.tp + counts.fp)
    if metric is Metric.RECALL:
        return _ratio(counts.tp, counts.tp + counts.fn)
    if metric is Metric.F1:
        p, fp_ = _ratio(counts.tp, counts.tp + counts.fp)
        r, fr_ = _ratio(counts.tp, counts.tp + counts.fn)
        f, ff_ = _ratio(2 * p * r, p + r)
        return f, sorted(set(fp_) | set(fr_) | set(ff_))
    raise ValueError("accuracy has no per-class form")


def score_detail(counts: ConfusionCounts, kind: MetricKind) -> Score:
    n = counts.n
    if kind.metric is Metric.ACCURACY:
        return Score(float(counts.tp.sum() / n) if n else 0.0)
    if kind.average is Average.BINARY:
        if counts.class_count != 2:
            raise ValueError("binary averaging needs exactly two classes")
        vals, flagged = per_class(counts, kind.metric)
        return Score(float(vals[1]), tuple(c for c in flagged if c == 1))
    if kind.average is Average.MICRO:
        tp, fp, fn = counts.tp.sum(), counts.fp.sum(), counts.fn.sum()
        micro = ConfusionCounts(np.array([tp]), np.array([fp]), np.array([fn]), np.array([0]))
        vals, flagged = per_class(micro, kind.metric)
        return Score(float(vals[0]), tuple(flagged))
    vals, flagged = per_class(counts, kind.metric)
    if kind.average is Average.MACRO:
        return Score(float(vals.mean()), tuple(flagged))
    support = counts.support
    return Score(float(np.dot(vals, support) / support.sum()) if support.sum() else 0.0, tuple(flagged))


def score(counts: ConfusionCounts, kind: MetricKind) -> float:
    """Scalar score in [0, 1] for ``kind``."""
    return score_detail(counts, kind).value


def evaluate(y_true, y_pred, C: int, kind: MetricKind) -> float:
    return score(confusion(y_true, y_pred, C), kind)
