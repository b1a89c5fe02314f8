import csv
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shapharmony.data import Kind, encode, split
from shapharmony.models import train
from shapharmony.static_attribution import (
    AttributionMatrix,
    Backend,
    BackendError,
    ClassPolicy,
    attribute,
    combine_subsets,
    shapley_marginal,
    shapley_retrain,
    shapley_weights,
    static_rfi,
    summarize_background,
    within_cluster_sse,
)

from conftest import make_toy


def permutation_oracle(payoff_of_mask, m):
    """Average marginal contributions over all m! orderings."""
    phi = 0.0
    for order in itertools.permutations(range(m)):
        mask, prev = 0, payoff_of_mask(0)
        contrib = np.zeros((prev.size, m))
        for j in order:
            mask |= 1 << j
            cur = payoff_of_mask(mask)
            contrib[:, j] = cur - prev
            prev = cur
        phi = phi + contrib
    return phi / math.factorial(m)


def test_weights_sum_to_one_over_coalitions():
    for m in range(1, 9):
        w = shapley_weights(m)
        assert sum(math.comb(m - 1, s) * w[s] for s in range(m)) == pytest.approx(1.0)


def test_single_feature_is_full_minus_prior():
    ds = make_toy(n=40)
    raw = {"x0": ds.X[:, 0]}
    single = encode("one", raw, {"x0": Kind.CONTINUOUS}, [ds.class_labels[c] for c in ds.y])
    sp = split(single, 0.25, 0)
    attr = shapley_retrain("logit", sp, seed=0)
    full = train("logit", sp.train, seed=0).predict_proba(sp.test)[np.arange(sp.test.n), sp.test.y]
    prior = np.bincount(sp.train.y, minlength=2)[sp.test.y] / sp.train.n
    np.testing.assert_allclose(attr.values[:, 0], full - prior, atol=1e-12)


def test_exact_efficiency_identity():
    sp = split(make_toy(n=40), 0.25, 0)
    attr = shapley_retrain("logit", sp, seed=0)
    assert np.abs(attr.efficiency_gap).max() <= 1e-9


def test_constant_feature_is_a_dummy():
    ds = make_toy(n=40, extra={"const": lambda rng, X: np.full(X.shape[0], 2.5)})
    attr = shapley_retrain("logit", split(ds, 0.25, 0), seed=0)
    assert np.abs(attr.values[:, 3]).max() <= 1e-9


def test_clone_features_get_equal_credit():
    ds = make_toy(n=40, extra={"x0_clone": lambda rng, X: X[:, 0].copy()})
    attr = shapley_retrain("logit", split(ds, 0.25, 0), seed=0)
    np.testing.assert_allclose(attr.values[:, 0], attr.values[:, 3], atol=1e-6)


@pytest.mark.parametrize("kind", ["logit", "knn", "rf"])
def test_subset_form_matches_permutation_oracle(kind):
    sp = split(make_toy(n=40, seed=4), 0.25, 0)
    attr = shapley_retrain(kind, sp, seed=3)
    rows = np.arange(sp.test.n)
    cache = {}

    def payoff(mask):
        # independent retraining, one model per coalition
        if mask not in cache:
            cols = np.array([(mask >> j) & 1 for j in range(3)], dtype=bool)
            P = train(kind, sp.train, cols, seed=3).predict_proba(sp.test)
            cache[mask] = P[rows, sp.test.y]
        return cache[mask]

    np.testing.assert_allclose(attr.values, permutation_oracle(payoff, 3), atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5).flatmap(lambda m: arrays(np.float64, (1 << m, 3), elements=st.floats(-1, 1))))
def test_combine_subsets_matches_oracle_and_is_efficient(payoff):
    m = payoff.shape[0].bit_length() - 1
    phi = combine_subsets(payoff)
    np.testing.assert_allclose(phi, permutation_oracle(lambda s: payoff[s], m), atol=1e-12)
    np.testing.assert_allclose(phi.sum(axis=1), payoff[-1] - payoff[0], atol=1e-12)


def test_exact_cap():
    ds = make_toy(n=30, extra={f"n{j}": (lambda rng, X: rng.normal(size=X.shape[0])) for j in range(3)})
    with pytest.raises(BackendError):
        shapley_retrain("logit", split(ds, 0.25, 0), cap=5)


def test_predicted_class_policy(iris_split):
    attr = shapley_retrain("logit", iris_split, seed=0, class_policy=ClassPolicy.PREDICTED)
    pred = train("logit", iris_split.train, seed=0).predict(iris_split.test)
    np.testing.assert_array_equal(attr.explained_class, pred)
    assert attr.class_policy is ClassPolicy.PREDICTED


# -- sampling backend -------------------------------------------------------


class AdditiveModel:
    """P(class 1) = 0.5 + sum_j a_j x_j on features in [-1, 1]."""

    def __init__(self, a):
        self.a = np.asarray(a)

    def predict_proba(self, X):
        p1 = 0.5 + X @ self.a
        return np.column_stack([1 - p1, p1])


class ConstantModel:
    def predict_proba(self, X):
        return np.tile([0.2, 0.7, 0.1], (X.shape[0], 1))


def additive_split(seed=0, n=120):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, 4))
    raw = {f"f{j}": X[:, j] for j in range(4)}
    y = ["a", "b"] * (n // 2)
    ds = encode("additive", raw, {k: Kind.CONTINUOUS for k in raw}, y)
    return split(ds, 0.25, seed)


def test_additive_closed_form():
    a = np.array([0.2, -0.1, 0.05, 0.0])
    sp = additive_split()
    bg = summarize_background(sp.train, 10, seed=0)
    attr = shapley_marginal(AdditiveModel(a), sp, bg, sample_budget=2000, seed=1)
    w = np.asarray(bg.meta["weights"]) / np.sum(bg.meta["weights"])
    # explained class is the true class; class 0 sees 1 - p1, flipping the sign
    sign = np.where(sp.test.y == 1, 1.0, -1.0)[:, None]
    expected = sign * a * (sp.test.X - w @ bg.X)
    assert np.abs(attr.values - expected).max() <= 0.02
    np.testing.assert_allclose(attr.values[:, 3], 0.0)


def test_constant_model_gets_zero_attribution(iris_split):
    bg = summarize_background(iris_split.train, 5, seed=0)
    attr = shapley_marginal(ConstantModel(), iris_split, bg, sample_budget=50, seed=0)
    np.testing.assert_array_equal(attr.values, 0.0)
    np.testing.assert_allclose(attr.baseline, np.array([0.2, 0.7, 0.1])[iris_split.test.y])


def test_sampling_error_shrinks_with_budget(iris_split):
    model = train("logit", iris_split.train, seed=0)
    bg = summarize_background(iris_split.train, 10, seed=0)
    ref = shapley_marginal(model, iris_split, bg, sample_budget=6400, seed=99).values
    B = 200
    err_b = np.abs(shapley_marginal(model, iris_split, bg, B, seed=1).values - ref).mean()
    err_4b = np.abs(shapley_marginal(model, iris_split, bg, 4 * B, seed=2).values - ref).mean()
    assert err_b / err_4b >= 1.5


def test_sampling_efficiency_is_loose(iris_split):
    attr = attribute("logit", iris_split, seed=0, backend="marginal")
    assert attr.backend is Backend.MARGINAL_SAMPLING and attr.sample_budget == 200
    assert np.abs(attr.efficiency_gap).mean() <= 0.05


def test_sampling_is_deterministic_and_row_local(iris_split):
    model = train("nn", iris_split.train, seed=0)
    bg = summarize_background(iris_split.train, 10, seed=0)
    a = shapley_marginal(model, iris_split, bg, 100, seed=4)
    b = shapley_marginal(model, iris_split, bg, 100, seed=4)
    np.testing.assert_array_equal(a.values, b.values)
    first = shapley_marginal(model, iris_split, bg, 100, seed=4, max_rows=7)
    # batch shapes differ, so allow BLAS-level rounding
    np.testing.assert_allclose(first.values, a.values[:7], rtol=0, atol=1e-12)


def test_sampling_argument_checks(iris_split):
    model = train("logit", iris_split.train)
    bg = summarize_background(iris_split.train, 3, seed=0)
    with pytest.raises(ValueError):
        shapley_marginal(model, iris_split, bg, sample_budget=0)


# -- background summary -----------------------------------------------------


def test_background_k_equals_n_returns_rows(iris_split):
    tr = iris_split.train
    bg = summarize_background(tr, tr.n, seed=0)
    np.testing.assert_array_equal(bg.X, tr.X)
    assert bg.meta["weights"] == [1.0] * tr.n


def test_background_k1_is_mean(iris_split):
    bg = summarize_background(iris_split.train, 1, seed=0)
    np.testing.assert_allclose(bg.X[0], iris_split.train.X.mean(axis=0))
    assert bg.meta["weights"] == [float(iris_split.train.n)]


def test_kmeans_beats_random_centroids(iris):
    bg = summarize_background(iris, 10, seed=0)
    ours = within_cluster_sse(iris.X, bg.X)
    rng = np.random.default_rng(0)
    random_sse = np.mean([within_cluster_sse(iris.X, iris.X[rng.choice(iris.n, 10, replace=False)])
                          for _ in range(20)])
    assert ours < random_sse
    assert sum(bg.meta["weights"]) == iris.n


def test_background_keeps_one_hot_binary():
    from shapharmony.data import synth_fraud

    ds = synth_fraud(400, 0.5, seed=0)
    bg = summarize_background(ds, 8, seed=0)
    cat = [j for j in range(ds.m) if ds.is_categorical(j)]
    assert set(np.unique(bg.X[:, cat]).tolist()) <= {0.0, 1.0}


# -- relative importance ----------------------------------------------------


def make_attr(values, names=("a", "b", "c", "d")):
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    return AttributionMatrix(values, Backend.RETRAIN_EXACT, np.zeros(n), values.sum(axis=1),
                             np.zeros(n, dtype=int), tuple(names), "d", "logit", 0)


def test_static_rfi_worked_example():
    rfi = static_rfi(make_attr([[2.0, -1.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0]]))
    np.testing.assert_allclose(rfi.values, [0.75, 0.25, 0.0, 0.0])
    assert not rfi.degenerate
    assert rfi.provenance.backend == "retrain"


def test_static_rfi_degenerate():
    rfi = static_rfi(make_attr(np.zeros((3, 4))))
    np.testing.assert_allclose(rfi.values, 0.25)
    assert rfi.degenerate


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 4), elements=st.floats(-1, 1)), st.floats(0.01, 100))
def test_static_rfi_scale_invariant(values, c):
    a = static_rfi(make_attr(values))
    b = static_rfi(make_attr(values * c))
    np.testing.assert_allclose(a.values, b.values, atol=1e-12)
    assert a.values.sum() == pytest.approx(1.0)


def test_attribution_csv_export(tmp_path, iris_split):
    attr = shapley_retrain("logit", iris_split, seed=0)
    attr.to_csv(tmp_path / "a.csv")
    with open(tmp_path / "a.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["row", "explained_class", *iris_split.train.feature_names, "baseline"]
    assert len(rows) == iris_split.test.n + 1
    np.testing.assert_allclose([float(v) for v in rows[1][2:6]], attr.values[0], rtol=1e-11)
