import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn import metrics as skm

from shapharmony.metrics import Average, Metric, MetricKind, confusion, evaluate, score, score_detail


def test_hand_counts_binary():
    y_true = [1, 1, 1, 1, 0, 0]
    y_pred = [1, 1, 1, 1, 1, 1]
    # worked by hand for the positive class: tp=4 fp=2 fn=0
    # precision 4/6, recall 1, f1 = 2*(2/3)/(5/3) = 0.8
    c = confusion(y_true, y_pred, 2)
    assert (c.tp[1], c.fp[1], c.fn[1], c.tn[1]) == (4, 2, 0, 0)
    assert evaluate(y_true, y_pred, 2, MetricKind(Metric.PRECISION, Average.BINARY)) == pytest.approx(2 / 3)
    assert evaluate(y_true, y_pred, 2, MetricKind(Metric.RECALL, Average.BINARY)) == pytest.approx(1.0)
    assert evaluate(y_true, y_pred, 2, MetricKind(Metric.F1, Average.BINARY)) == pytest.approx(0.8)
    assert evaluate(y_true, y_pred, 2, MetricKind(Metric.ACCURACY)) == pytest.approx(4 / 6)


def test_zero_division_scores_zero_and_flags():
    # class 0 is never predicted, so its precision has a zero denominator
    c = confusion([0, 1, 1], [1, 1, 1], 2)
    s = score_detail(c, MetricKind(Metric.PRECISION, Average.MACRO))
    assert 0 in s.zero_division
    assert s.value == pytest.approx((0 + 2 / 3) / 2)


def test_binary_needs_two_classes():
    with pytest.raises(ValueError):
        evaluate([0, 1, 2], [0, 1, 2], 3, MetricKind(Metric.F1, Average.BINARY))


def test_label_range_checked():
    with pytest.raises(ValueError):
        confusion([0, 3], [0, 1], 3)


def test_parse_and_label():
    k = MetricKind.parse("f1_macro")
    assert (k.metric, k.average, k.label) == (Metric.F1, Average.MACRO, "f1_macro")
    assert MetricKind.parse("accuracy").label == "accuracy"
    assert MetricKind.parse("recall").average is Average.WEIGHTED


labels = st.integers(2, 5).flatmap(
    lambda C: st.tuples(
        st.just(C),
        st.lists(st.tuples(st.integers(0, C - 1), st.integers(0, C - 1)), min_size=1, max_size=60),
    )
)


@settings(max_examples=150, deadline=None)
@given(labels)
def test_agrees_with_sklearn(case):
    C, pairs = case
    t = np.array([p[0] for p in pairs])
    p = np.array([p[1] for p in pairs])
    c = confusion(t, p, C)
    assert score(c, MetricKind(Metric.ACCURACY)) == pytest.approx(skm.accuracy_score(t, p))
    fns = {Metric.PRECISION: skm.precision_score, Metric.RECALL: skm.recall_score, Metric.F1: skm.f1_score}
    for metric, fn in fns.items():
        for avg in (Average.MACRO, Average.WEIGHTED, Average.MICRO):
            ours = score(c, MetricKind(metric, avg))
            ref = fn(t, p, labels=list(range(C)), average=avg.value, zero_division=0)
            if avg is Average.WEIGHTED and c.support.sum() == 0:
                continue
            assert ours == pytest.approx(ref, abs=1e-12), (metric, avg)


@settings(max_examples=100, deadline=None)
@given(labels)
def test_identities(case):
    C, pairs = case
    t = np.array([p[0] for p in pairs])
    p = np.array([p[1] for p in pairs])
    c = confusion(t, p, C)
    np.testing.assert_array_equal(c.tp + c.fp + c.fn + c.tn, len(pairs))
    acc = score(c, MetricKind(Metric.ACCURACY))
    # single-label multiclass: micro precision == micro recall == accuracy
    for metric in (Metric.PRECISION, Metric.RECALL, Metric.F1):
        assert score(c, MetricKind(metric, Average.MICRO)) == pytest.approx(acc)
    # weighted recall equals accuracy as well
    assert score(c, MetricKind(Metric.RECALL, Average.WEIGHTED)) == pytest.approx(acc)
    for metric in (Metric.PRECISION, Metric.RECALL, Metric.F1):
        for avg in (Average.MACRO, Average.WEIGHTED):
            assert 0.0 <= score(c, MetricKind(metric, avg)) <= 1.0
