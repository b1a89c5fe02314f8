"""Shapley-based static feature attributions and their relative-importance vector.

Two backends produce an :class:`AttributionMatrix`:

* ``shapley_retrain`` enumerates every feature subset, retrains a model on
  each, and combines the subset models with the classic Shapley weights.
* ``shapley_marginal`` estimates the same quantity for one fitted model by
  permutation sampling, filling unrevealed features from a background set.

Attributions are taken on the predicted probability of each test row's true
class (or, optionally, its predicted class).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Protocol, Sequence

import numpy as np

from . import _budget
from ._seeding import derive_seed, rng_for
from .data import DataSplit, Dataset, Kind
from .models import ModelKind, TrainedModel, train

EXACT_CAP = 12
DEFAULT_SAMPLE_BUDGET = 200
DEFAULT_BACKGROUND_K = 10


class BackendError(ValueError):
    pass


class Backend(str, Enum):
    RETRAIN_EXACT = "retrain"
    MARGINAL_SAMPLING = "marginal"


class ClassPolicy(str, Enum):
    TRUE = "true_class"
    PREDICTED = "predicted_class"


class RfiSource(str, Enum):
    STATIC_SHAP = "static_shap"
    DYNAMIC_ANWA = "dynamic_anwa"


class ProbabilisticModel(Protocol):
    def predict_proba(self, X: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class Provenance:
    dataset: str
    model: str
    policy: str
    seed: int
    backend: str | None = None


@dataclass(frozen=True, eq=False)
class AttributionMatrix:
    """Per-row, per-feature Shapley values for the explained class.

    ``baseline`` is the explained-class probability with no feature revealed
    (the prior model for the exact backend, the background expectation for
    the sampling backend); ``output`` is the full-model probability.
    """

    values: np.ndarray
    backend: Backend
    baseline: np.ndarray
    output: np.ndarray
    explained_class: np.ndarray
    feature_names: tuple[str, ...]
    dataset: str
    model: str
    seed: int
    class_policy: ClassPolicy = ClassPolicy.TRUE
    sample_budget: int | None = None
    background_size: int | None = None

    def __post_init__(self):
        for name in ("values", "baseline", "output", "explained_class"):
            arr = np.array(getattr(self, name), copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def efficiency_gap(self) -> np.ndarray:
        """Per-row ``sum_j phi_j - (output - baseline)``."""
        return self.values.sum(axis=1) - (self.output - self.baseline)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "explained_class", *self.feature_names, "baseline"])
            for i, row in enumerate(self.values):
                w.writerow([i, int(self.explained_class[i]), *(f"{v:.12g}" for v in row),
                            f"{self.baseline[i]:.12g}"])


@dataclass(frozen=True, eq=False)
class RfiVector:
    """Nonnegative relative feature importance summing to one.

    When every raw importance is zero the vector falls back to uniform and
    ``degenerate`` is set.
    """

    values: np.ndarray
    source: RfiSource
    feature_names: tuple[str, ...]
    provenance: Provenance
    degenerate: bool = False

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if arr.shape != (len(self.feature_names),):
            raise ValueError("one RFI entry per feature name is required")
        if np.any(arr < 0):
            raise ValueError("RFI entries must be nonnegative")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.feature_names, self.values.tolist()))


def normalize_importance(
    raw: np.ndarray,
    source: RfiSource,
    feature_names: Sequence[str],
    provenance: Provenance,
) -> RfiVector:
    raw = np.asarray(raw, dtype=np.float64)
    total = raw.sum()
    if not total > 0:
        return RfiVector(np.full(raw.size, 1.0 / raw.size), source, feature_names, provenance, True)
    return RfiVector(raw / total, source, feature_names, provenance, False)


# ---------------------------------------------------------------------------
# Exact subset retraining
# ---------------------------------------------------------------------------


def shapley_weights(m: int) -> np.ndarray:
    """``w[s] = s! (m - s - 1)! / m!`` for coalition sizes ``s = 0..m-1``."""
    return np.array([math.factorial(s) * math.factorial(m - s - 1) / math.factorial(m) for s in range(m)])


def _popcount(masks: np.ndarray) -> np.ndarray:
    counts = np.zeros_like(masks)
    x = masks.copy()
    while np.any(x):
        counts += x & 1
        x >>= 1
    return counts


def _explained_classes(full_proba: np.ndarray, y: np.ndarray, policy: ClassPolicy) -> np.ndarray:
    if ClassPolicy(policy) is ClassPolicy.TRUE:
        return np.asarray(y, dtype=np.int64)
    return np.argmax(full_proba, axis=1)


def subset_values(
    kind: ModelKind | str,
    split: DataSplit,
    seed: int,
    hyperparams: Mapping[str, Any] | None = None,
    deadline: float | None = None,
) -> np.ndarray:
    """Probability matrices of every subset model, shape ``(2**m, n_test, C)``.

    Entry ``S`` (bit ``j`` set when column ``j`` is in the subset) comes from a
    model trained on exactly those columns with the shared ``seed``.
    """
    m = split.train.m
    out = np.empty((1 << m, split.test.n, split.train.class_count))
    for S in range(1 << m):
        _budget.check(deadline)
        mask = np.array([(S >> j) & 1 for j in range(m)], dtype=bool)
        out[S] = train(kind, split.train, mask, seed, hyperparams).predict_proba(split.test.X)
    return out


def combine_subsets(values: np.ndarray) -> np.ndarray:
    """Shapley values from per-subset payoffs ``values`` of shape ``(2**m, n)``.

    Sums run over subsets in increasing mask order for each feature, so the
    result does not depend on how the payoffs were produced.
    """
    n_sets = values.shape[0]
    m = n_sets.bit_length() - 1
    if 1 << m != n_sets:
        raise ValueError("payoff table must have 2**m rows")
    w = shapley_weights(m) if m else np.zeros(0)
    masks = np.arange(n_sets, dtype=np.int64)
    sizes = _popcount(masks)
    phi = np.zeros((values.shape[1], m))
    for j in range(m):
        without = masks[(masks >> j) & 1 == 0]
        diff = values[without | (1 << j)] - values[without]
        phi[:, j] = w[sizes[without]] @ diff
    return phi


def shapley_retrain(
    kind: ModelKind | str,
    split: DataSplit,
    seed: int = 0,
    class_policy: ClassPolicy = ClassPolicy.TRUE,
    hyperparams: Mapping[str, Any] | None = None,
    cap: int = EXACT_CAP,
    deadline: float | None = None,
) -> AttributionMatrix:
    """Exact Shapley regression values by retraining on all ``2**m`` feature subsets."""
    kind = ModelKind(kind)
    m = split.train.m
    if m > cap:
        raise BackendError(
            f"{m} features exceed the exact-backend cap of {cap} ({1 << m} retrainings); "
            "use the marginal sampling backend instead"
        )
    probs = subset_values(kind, split, seed, hyperparams, deadline)
    full = (1 << m) - 1
    cls = _explained_classes(probs[full], split.test.y, class_policy)
    rows = np.arange(split.test.n)
    payoff = probs[:, rows, cls]
    return AttributionMatrix(
        values=combine_subsets(payoff),
        backend=Backend.RETRAIN_EXACT,
        baseline=payoff[0],
        output=payoff[full],
        explained_class=cls,
        feature_names=tuple(split.train.feature_names),
        dataset=split.train.name,
        model=kind.value,
        seed=seed,
        class_policy=ClassPolicy(class_policy),
    )


# ---------------------------------------------------------------------------
# Permutation sampling against a background set
# ---------------------------------------------------------------------------


def _background_weights(background: Dataset) -> np.ndarray:
    w = np.asarray(background.meta.get("weights", np.ones(background.n)), dtype=np.float64)
    if w.shape != (background.n,) or not w.sum() > 0:
        raise ValueError("background weights must be one nonnegative entry per row with positive sum")
    return w / w.sum()


def shapley_marginal(
    model: TrainedModel | ProbabilisticModel,
    split: DataSplit,
    background: Dataset,
    sample_budget: int = DEFAULT_SAMPLE_BUDGET,
    seed: int = 0,
    class_policy: ClassPolicy = ClassPolicy.TRUE,
    max_rows: int | None = None,
    deadline: float | None = None,
) -> AttributionMatrix:
    """Interventional Shapley estimates by permutation sampling.

    For every test row, ``sample_budget`` feature orderings are drawn, each
    paired with one background row (drawn in proportion to
    ``background.meta['weights']`` when present). Features are revealed one at
    a time in that order, unrevealed ones keep the background value, and each
    step's change in explained-class probability is credited to the revealed
    feature.

    ``max_rows`` limits attribution to the first rows of the test set.
    """
    if background.n == 0:
        raise ValueError("background must contain at least one row")
    if sample_budget < 1:
        raise ValueError("sample_budget must be >= 1")
    test = split.test if max_rows is None else split.test.take(np.arange(min(max_rows, split.test.n)))
    X = test.X
    n, m = X.shape
    if background.m != m:
        raise ValueError(f"background has {background.m} columns, test has {m}")
    B = sample_budget
    bg_p = _background_weights(background)
    full_proba = model.predict_proba(X)
    cls = _explained_classes(full_proba, test.y, class_policy)
    baseline = model.predict_proba(background.X)[:, cls].T @ bg_p

    phi = np.zeros((n, m))
    steps = np.arange(m + 1)
    rows_per_batch = max(1, 60_000 // (B * (m + 1)))
    for start in range(0, n, rows_per_batch):
        _budget.check(deadline)
        batch = range(start, min(n, start + rows_per_batch))
        blocks, ranks_all = [], []
        for i in batch:
            rng = rng_for(seed, "marginal", i)
            ranks = np.argsort(np.argsort(rng.random((B, m)), axis=1), axis=1)
            bg_rows = background.X[rng.choice(background.n, size=B, p=bg_p)]
            revealed = ranks[:, None, :] < steps[None, :, None]
            blocks.append(np.where(revealed, X[i], bg_rows[:, None, :]).reshape(B * (m + 1), m))
            ranks_all.append(ranks)
        P = model.predict_proba(np.vstack(blocks))
        for b, i in enumerate(batch):
            v = P[b * B * (m + 1):(b + 1) * B * (m + 1), cls[i]].reshape(B, m + 1)
            gains = np.diff(v, axis=1)
            phi[i] = np.take_along_axis(gains, ranks_all[b], axis=1).mean(axis=0)

    return AttributionMatrix(
        values=phi,
        backend=Backend.MARGINAL_SAMPLING,
        baseline=baseline,
        output=full_proba[np.arange(n), cls],
        explained_class=cls,
        feature_names=tuple(split.train.feature_names),
        dataset=split.train.name,
        model=getattr(getattr(model, "kind", None), "value", type(model).__name__),
        seed=seed,
        class_policy=ClassPolicy(class_policy),
        sample_budget=B,
        background_size=background.n,
    )


def summarize_background(train_data: Dataset, k: int = DEFAULT_BACKGROUND_K, seed: int = 0,
                         max_iter: int = 100) -> Dataset:
    """Summarize training rows into ``k`` weighted k-means centroids.

    Lloyd iterations from k-means++ seeding. A cluster that empties is
    re-seeded at the row farthest from its assigned centroid. Boolean columns
    are rounded back to {0, 1}; cluster sizes land in ``meta['weights']`` and
    each centroid takes its cluster's majority label.
    """
    X = train_data.X
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}]")
    if k == n:
        centroids, assign = X.copy(), np.arange(n)
    else:
        rng = rng_for(seed, "kmeans")
        centroids = _kmeanspp(X, k, rng)
        assign = np.full(n, -1)
        for _ in range(max_iter):
            d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
            new_assign = np.argmin(d2, axis=1)
            new_centroids = centroids.copy()
            for c in range(k):
                members = new_assign == c
                if members.any():
                    new_centroids[c] = X[members].mean(axis=0)
                else:
                    far = int(np.argmax(d2[np.arange(n), new_assign]))
                    new_centroids[c] = X[far]
                    new_assign[far] = c
            if np.array_equal(new_assign, assign) and np.array_equal(new_centroids, centroids):
                break
            assign, centroids = new_assign, new_centroids

    for j, col in enumerate(train_data.columns):
        if col.kind is Kind.CATEGORICAL:
            centroids[:, j] = (centroids[:, j] >= 0.5).astype(float)
    weights = np.bincount(assign, minlength=k).astype(float)
    labels = np.array([
        np.bincount(train_data.y[assign == c], minlength=train_data.class_count).argmax() if weights[c] else 0
        for c in range(k)
    ])
    return Dataset(
        name=f"{train_data.name}:background",
        X=centroids,
        y=labels,
        class_count=train_data.class_count,
        columns=train_data.columns,
        features=train_data.features,
        class_labels=train_data.class_labels,
        meta={"weights": weights.tolist(), "k": k, "seed": seed},
    )


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            nxt = next(i for i in range(n) if i not in chosen)
        chosen.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[chosen].astype(np.float64)


def within_cluster_sse(X: np.ndarray, centroids: np.ndarray) -> float:
    d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return float(d2.min(axis=1).sum())


# ---------------------------------------------------------------------------
# Relative feature importance
# ---------------------------------------------------------------------------


def static_rfi(attr: AttributionMatrix) -> RfiVector:
    """Each feature's share of the summed absolute attributions over all rows."""
    if attr.values.size == 0:
        raise ValueError("attribution matrix is empty")
    totals = np.abs(attr.values).sum(axis=0)
    prov = Provenance(attr.dataset, attr.model, attr.class_policy.value, attr.seed, attr.backend.value)
    return normalize_importance(totals, RfiSource.STATIC_SHAP, attr.feature_names, prov)


def attribute(
    kind: ModelKind | str,
    split: DataSplit,
    seed: int = 0,
    backend: Backend | str | None = None,
    model: TrainedModel | None = None,
    sample_budget: int = DEFAULT_SAMPLE_BUDGET,
    background_k: int = DEFAULT_BACKGROUND_K,
    class_policy: ClassPolicy = ClassPolicy.TRUE,
    max_rows: int | None = None,
    deadline: float | None = None,
) -> AttributionMatrix:
    """Pick a backend (exact up to ``EXACT_CAP`` features) and compute attributions."""
    if backend is None:
        backend = Backend.RETRAIN_EXACT if split.train.m <= EXACT_CAP else Backend.MARGINAL_SAMPLING
    backend = Backend(backend)
    if backend is Backend.RETRAIN_EXACT:
        return shapley_retrain(kind, split, seed, class_policy, deadline=deadline)
    if model is None:
        model = train(kind, split.train, seed=seed)
    k = min(background_k, split.train.n)
    bg = summarize_background(split.train, k, derive_seed(seed, "background"))
    return shapley_marginal(model, split, bg, sample_budget, seed, class_policy, max_rows, deadline)
