import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shapharmony.data import Kind, encode, split
from shapharmony.models import (
    ModelKind,
    ShapeError,
    load_model,
    predict_label,
    save_model,
    train,
)

from conftest import make_toy

ALL_KINDS = [k.value for k in ModelKind]


def test_empty_mask_gives_prior():
    ds = encode("p", {"x": [float(i) for i in range(10)]}, {"x": Kind.CONTINUOUS}, ["a"] * 6 + ["b"] * 4)
    model = train("logit", ds, feature_mask=np.zeros(1, bool))
    assert model.is_prior
    np.testing.assert_allclose(model.predict_proba(ds.X[:3]), [[0.6, 0.4]] * 3)


def test_knn_k1_memorises_training_rows(iris):
    model = train("knn", iris, hyperparams={"k": 1})
    # duplicated rows resolve to their first occurrence, so check first occurrences
    _, first = np.unique(iris.X, axis=0, return_index=True)
    np.testing.assert_array_equal(model.predict(iris.X[first]), iris.y[first])


def test_knn_k3_matches_brute_force():
    X = np.array([[0.0, 0], [1, 0], [0, 1], [5, 5], [6, 5], [5, 6]])
    y = ["a", "a", "b", "b", "b", "a"]
    ds = encode("six", {"u": X[:, 0], "v": X[:, 1]}, {"u": Kind.CONTINUOUS, "v": Kind.CONTINUOUS}, y)
    model = train("knn", ds, hyperparams={"k": 3})
    queries = np.array([[0.2, 0.2], [5.5, 5.5], [3.0, 3.0], [0.5, 0.5]])
    expected = []
    for q in queries:
        d = ((X - q) ** 2).sum(axis=1)
        nn = np.argsort(d, kind="stable")[:3]
        votes = np.bincount(ds.y[nn], minlength=2)
        expected.append(votes / 3)
    np.testing.assert_allclose(model.predict_proba(queries), expected)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 25), binary=st.booleans(), offset=st.sampled_from([0.0, 1e4]))
def test_knn_neighbours_match_stable_brute_force(seed, k, binary, offset):
    from shapharmony.models import _Knn

    rng = np.random.default_rng(seed)
    draw = (lambda *s: rng.integers(0, 2, s).astype(float)) if binary else (lambda *s: rng.normal(size=s))
    X, Q = offset + draw(60, 4), offset + draw(40, 4)
    knn = _Knn(k).fit(X, rng.integers(0, 2, 60), 2, 0)
    d = ((Q[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    np.testing.assert_array_equal(knn.neighbours(Q), np.argsort(d, axis=1, kind="stable")[:, :k])


def test_knn_tie_goes_to_lower_row():
    ds = encode("tie", {"x": [1.0, -1.0, 5.0]}, {"x": Kind.CONTINUOUS}, ["a", "b", "b"])
    model = train("knn", ds, hyperparams={"k": 1})
    assert model.predict(np.array([[0.0]]))[0] == 0


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_masked_columns_are_never_read(kind, toy):
    mask = np.array([True, False, True])
    model = train(kind, toy, feature_mask=mask, seed=1)
    X = toy.X[:10].copy()
    scrambled = X.copy()
    scrambled[:, 1] = 1e6
    np.testing.assert_array_equal(model.predict_proba(X), model.predict_proba(scrambled))


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_training_is_deterministic(kind, toy):
    a = train(kind, toy, seed=5).predict_proba(toy.X)
    b = train(kind, toy, seed=5).predict_proba(toy.X)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_probabilities_are_normalised(kind, iris):
    P = train(kind, iris, seed=0).predict_proba(iris.X)
    assert P.shape == (150, 3)
    assert (P >= 0).all()
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_beats_prior_on_iris(kind, iris_split):
    model = train(kind, iris_split.train, seed=0)
    acc = np.mean(model.predict(iris_split.test) == iris_split.test.y)
    prior = np.bincount(iris_split.train.y).max() / iris_split.train.n
    assert acc >= prior


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_constant_column_does_not_change_model(kind):
    base = make_toy(seed=2)
    padded = make_toy(seed=2, extra={"const": lambda rng, X: np.full(X.shape[0], 3.0)})
    a = train(kind, base, seed=0).predict_proba(base.X)
    b = train(kind, padded, seed=0).predict_proba(padded.X)
    np.testing.assert_array_equal(a, b)


def test_wrong_width_raises(iris):
    model = train("logit", iris)
    with pytest.raises(ShapeError):
        model.predict_proba(iris.X[:, :3])


def test_bad_mask_length(iris):
    with pytest.raises(ShapeError):
        train("logit", iris, feature_mask=np.ones(3, bool))


def test_unknown_hyperparameter(iris):
    with pytest.raises(ValueError):
        train("knn", iris, hyperparams={"neighbours": 3})


def test_single_class_training_rejected():
    ds = encode("two", {"x": [0.0, 1.0, 2.0]}, {"x": Kind.CONTINUOUS}, ["a", "b", "a"])
    with pytest.raises(ValueError):
        train("logit", ds.take(np.array([0, 2])))


def test_save_load_round_trip(tmp_path, iris):
    model = train("rf", iris, seed=3)
    save_model(model, tmp_path / "m.pkl")
    loaded = load_model(tmp_path / "m.pkl")
    np.testing.assert_array_equal(predict_label(loaded, iris), model.predict(iris))


def test_seed_changes_stochastic_models(iris):
    sp = split(iris, 0.2, 0)
    a = train("nn", sp.train, seed=0).predict_proba(sp.test)
    b = train("nn", sp.train, seed=1).predict_proba(sp.test)
    assert not np.array_equal(a, b)
