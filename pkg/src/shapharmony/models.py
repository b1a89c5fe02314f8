"""Classifier suite trained on full or masked feature sets.

Five kinds are supported: multinomial logistic regression, k-nearest
neighbours, random forest, gradient-boosted trees and a one-hidden-layer
perceptron. SVM is deliberately absent.

A model only ever reads the columns selected by its feature mask. Columns
that are constant on the training rows are dropped as well, so adding or
removing a constant column never changes a fitted model. With nothing left to
read, training returns the prior model that predicts the empirical class
distribution.
"""

from __future__ import annotations

import logging
import pickle
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from sklearn.ensemble import GradientBoostingClassifier, RandomForestClassifier

from ._seeding import derive_seed
from .data import Dataset

log = logging.getLogger(__name__)


class ShapeError(ValueError):
    pass


class ModelKind(str, Enum):
    LOGIT = "logit"
    KNN = "knn"
    RANDOM_FOREST = "rf"
    GRAD_BOOST = "gbc"
    MLP = "nn"


DEFAULT_HYPERPARAMS: dict[ModelKind, dict[str, Any]] = {
    ModelKind.LOGIT: {"l2": 1e-4, "iterations": 500, "step": 0.1, "backtrack": 0.5, "tol": 1e-6},
    ModelKind.KNN: {"k": 5},
    ModelKind.RANDOM_FOREST: {"n_trees": 100, "max_depth": 8},
    ModelKind.GRAD_BOOST: {"n_trees": 100, "max_depth": 3, "learning_rate": 0.1},
    ModelKind.MLP: {"hidden": 32, "epochs": 300, "step": 0.01, "batch_size": 64, "l2": 1e-4},
}


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class _Standardizer:
    def __init__(self, X: np.ndarray):
        self.mean = X.mean(axis=0)
        self.scale = X.std(axis=0)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


class _Prior:
    def __init__(self, y: np.ndarray, C: int):
        self.dist = np.bincount(y, minlength=C) / y.size

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.tile(self.dist, (X.shape[0], 1))


class _Logit:
    """Multinomial logistic regression, full-batch gradient descent with Armijo backtracking.

    The first trial step is ``step``; later line searches start from twice the
    previously accepted step.

    Inputs are centred and scaled with training statistics inside the model,
    so callers still pass raw feature values.
    """

    def __init__(self, l2, iterations, step, backtrack, tol):
        self.l2, self.iterations, self.step, self.backtrack, self.tol = l2, iterations, step, backtrack, tol
        self.converged = False

    def _loss_grad(self, W, b, Z, Y):
        P = _softmax(Z @ W + b)
        n = Z.shape[0]
        loss = -np.sum(Y * np.log(np.clip(P, 1e-300, None))) / n + 0.5 * self.l2 * np.sum(W * W)
        G = (P - Y) / n
        return loss, Z.T @ G + self.l2 * W, G.sum(axis=0)

    def fit(self, X, y, C, seed):
        self.scaler = _Standardizer(X)
        Z = self.scaler(X)
        Y = np.eye(C)[y]
        W = np.zeros((Z.shape[1], C))
        b = np.zeros(C)
        loss, gW, gb = self._loss_grad(W, b, Z, Y)
        t = self.step / 2
        for _ in range(self.iterations):
            gnorm2 = np.sum(gW * gW) + np.sum(gb * gb)
            if gnorm2 < self.tol**2:
                self.converged = True
                break
            t *= 2.0
            while True:
                W_new, b_new = W - t * gW, b - t * gb
                new_loss, gW_new, gb_new = self._loss_grad(W_new, b_new, Z, Y)
                if new_loss <= loss - 0.5 * t * gnorm2 or t < 1e-10:
                    break
                t *= self.backtrack
            W, b, loss, gW, gb = W_new, b_new, new_loss, gW_new, gb_new
        self.W, self.b = W, b
        return self

    def predict_proba(self, X):
        return _softmax(self.scaler(X) @ self.W + self.b)


class _Knn:
    """Brute-force Euclidean kNN; equal distances resolve to the lower training row."""

    def __init__(self, k):
        self.k = k
        self.converged = True

    def fit(self, X, y, C, seed):
        self.X, self.y, self.C = X, y, C
        self.k_eff = min(self.k, X.shape[0])
        return self

    def neighbours(self, X: np.ndarray) -> np.ndarray:
        out = np.empty((X.shape[0], self.k_eff), dtype=np.int64)
        sq_train = np.einsum("ij,ij->i", self.X, self.X)
        chunk = max(1, int(2e6 // max(1, self.X.shape[0])))
        for start in range(0, X.shape[0], chunk):
            out[start:start + chunk] = self._select(X[start:start + chunk], sq_train)
        return out

    def _select(self, q: np.ndarray, sq_train: np.ndarray) -> np.ndarray:
        # BLAS expansion shortlists candidates; exact distances decide the order.
        k, n = self.k_eff, self.X.shape[0]
        width = k + 16
        if width >= n:
            return self._exact_topk(q, np.broadcast_to(np.arange(n), (q.shape[0], n)))
        sq_q = np.einsum("ij,ij->i", q, q)
        approx = sq_q[:, None] + sq_train[None, :] - 2.0 * (q @ self.X.T)
        cand = np.argpartition(approx, width - 1, axis=1)[:, :width]
        cutoff = np.partition(np.take_along_axis(approx, cand, axis=1), k - 1, axis=1)[:, k - 1]
        cutoff += 1e-9 * (np.abs(cutoff) + sq_q + sq_train.max() + 1.0)
        # rows with more near-ties than the shortlist holds are ranked over all training rows
        crowded = np.count_nonzero(approx <= cutoff[:, None], axis=1) > width
        out = np.empty((q.shape[0], k), dtype=np.int64)
        easy = ~crowded
        out[easy] = self._exact_topk(q[easy], np.sort(cand[easy], axis=1))
        if crowded.any():
            out[crowded] = self._exact_topk(q[crowded], np.broadcast_to(np.arange(n), (int(crowded.sum()), n)))
        return out

    def _exact_topk(self, q: np.ndarray, cand: np.ndarray) -> np.ndarray:
        # cand rows are sorted ascending, so a stable sort on distance keeps lower rows first
        D = np.sum((q[:, None, :] - self.X[cand]) ** 2, axis=2)
        order = np.argsort(D, axis=1, kind="stable")[:, : self.k_eff]
        return np.take_along_axis(cand, order, axis=1)

    def predict_proba(self, X):
        votes = self.y[self.neighbours(X)]
        P = np.zeros((X.shape[0], self.C))
        for c in range(self.C):
            P[:, c] = np.count_nonzero(votes == c, axis=1)
        return P / self.k_eff


class _Mlp:
    """One hidden ReLU layer with a softmax head, trained by minibatch Adam."""

    def __init__(self, hidden, epochs, step, batch_size, l2):
        self.hidden, self.epochs, self.step, self.batch_size, self.l2 = hidden, epochs, step, batch_size, l2
        self.converged = True

    def fit(self, X, y, C, seed):
        rng = np.random.default_rng(seed)
        self.scaler = _Standardizer(X)
        Z = self.scaler(X)
        n, d = Z.shape
        Y = np.eye(C)[y]
        params = [
            rng.normal(0.0, np.sqrt(2.0 / d), (d, self.hidden)),
            np.zeros(self.hidden),
            rng.normal(0.0, np.sqrt(1.0 / self.hidden), (self.hidden, C)),
            np.zeros(C),
        ]
        m1 = [np.zeros_like(p) for p in params]
        m2 = [np.zeros_like(p) for p in params]
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        t = 0
        bs = min(self.batch_size, n)
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, bs):
                idx = order[start:start + bs]
                W1, b1, W2, b2 = params
                H = np.maximum(Z[idx] @ W1 + b1, 0.0)
                G = (_softmax(H @ W2 + b2) - Y[idx]) / idx.size
                gW2 = H.T @ G + self.l2 * W2
                dH = (G @ W2.T) * (H > 0)
                grads = [Z[idx].T @ dH + self.l2 * W1, dH.sum(axis=0), gW2, G.sum(axis=0)]
                t += 1
                for i, g in enumerate(grads):
                    m1[i] = beta1 * m1[i] + (1 - beta1) * g
                    m2[i] = beta2 * m2[i] + (1 - beta2) * g * g
                    mhat = m1[i] / (1 - beta1**t)
                    vhat = m2[i] / (1 - beta2**t)
                    params[i] = params[i] - self.step * mhat / (np.sqrt(vhat) + eps)
        self.params = params
        if not np.all(np.isfinite(np.concatenate([p.ravel() for p in params]))):
            raise FloatingPointError("MLP parameters diverged")
        return self

    def predict_proba(self, X):
        W1, b1, W2, b2 = self.params
        return _softmax(np.maximum(self.scaler(X) @ W1 + b1, 0.0) @ W2 + b2)


class _SklearnEnsemble:
    def __init__(self, kind: ModelKind, hp: Mapping[str, Any]):
        self.kind, self.hp = kind, dict(hp)
        self.converged = True

    def fit(self, X, y, C, seed):
        if self.kind is ModelKind.RANDOM_FOREST:
            est = RandomForestClassifier(
                n_estimators=self.hp["n_trees"], max_depth=self.hp["max_depth"], criterion="gini",
                max_features="sqrt", bootstrap=True, random_state=seed, n_jobs=1,
            )
        else:
            est = GradientBoostingClassifier(
                n_estimators=self.hp["n_trees"], max_depth=self.hp["max_depth"],
                learning_rate=self.hp["learning_rate"], random_state=seed,
            )
        self.est = est.fit(X, y)
        self.C = C
        return self

    def predict_proba(self, X):
        P = np.zeros((X.shape[0], self.C))
        P[:, self.est.classes_] = self.est.predict_proba(X)
        return P


_BUILDERS = {
    ModelKind.LOGIT: lambda hp: _Logit(**hp),
    ModelKind.KNN: lambda hp: _Knn(**hp),
    ModelKind.MLP: lambda hp: _Mlp(**hp),
    ModelKind.RANDOM_FOREST: lambda hp: _SklearnEnsemble(ModelKind.RANDOM_FOREST, hp),
    ModelKind.GRAD_BOOST: lambda hp: _SklearnEnsemble(ModelKind.GRAD_BOOST, hp),
}


@dataclass(eq=False)
class TrainedModel:
    kind: ModelKind
    feature_mask: np.ndarray
    class_count: int
    train_seed: int
    hyperparams: Mapping[str, Any]
    used_columns: np.ndarray
    estimator: Any = field(repr=False)
    converged: bool = True

    @property
    def m(self) -> int:
        return self.feature_mask.size

    @property
    def is_prior(self) -> bool:
        return isinstance(self.estimator, _Prior)

    def predict_proba(self, X: np.ndarray | Dataset) -> np.ndarray:
        if isinstance(X, Dataset):
            X = X.X
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.m:
            raise ShapeError(f"expected an (n, {self.m}) matrix, got shape {X.shape}")
        P = self.estimator.predict_proba(X[:, self.used_columns])
        P = np.clip(P, 0.0, None)
        return P / P.sum(axis=1, keepdims=True)

    def predict(self, X: np.ndarray | Dataset) -> np.ndarray:
        # argmax resolves ties to the lower class index
        return np.argmax(self.predict_proba(X), axis=1)


def train(
    kind: ModelKind | str,
    train_data: Dataset,
    feature_mask: np.ndarray | None = None,
    seed: int = 0,
    hyperparams: Mapping[str, Any] | None = None,
) -> TrainedModel:
    """Fit a classifier of ``kind`` on the masked columns of ``train_data``.

    The fitted model is a deterministic function of its inputs and ``seed``.
    """
    kind = ModelKind(kind)
    m = train_data.m
    mask = np.ones(m, dtype=bool) if feature_mask is None else np.asarray(feature_mask, dtype=bool)
    if mask.shape != (m,):
        raise ShapeError(f"feature_mask must have length {m}, got {mask.shape}")
    if train_data.n == 0 or np.unique(train_data.y).size < 2:
        raise ValueError("training data must be nonempty and contain at least two classes")
    hp = dict(DEFAULT_HYPERPARAMS[kind])
    if hyperparams:
        unknown = set(hyperparams) - set(hp)
        if unknown:
            raise ValueError(f"unknown hyperparameters for {kind.value}: {sorted(unknown)}")
        hp.update(hyperparams)

    X = train_data.X
    varying = np.ptp(X, axis=0) > 0 if train_data.n else np.zeros(m, dtype=bool)
    used = np.flatnonzero(mask & varying)
    frozen_mask = mask.copy()
    frozen_mask.setflags(write=False)
    used.setflags(write=False)

    fit_seed = derive_seed(seed, "train", kind.value)
    if used.size == 0:
        est: Any = _Prior(train_data.y, train_data.class_count)
    else:
        est = _BUILDERS[kind](hp).fit(X[:, used], train_data.y, train_data.class_count, fit_seed)
    converged = getattr(est, "converged", True)
    if not converged:
        log.debug("%s did not meet its tolerance within the iteration budget", kind.value)
    return TrainedModel(kind, frozen_mask, train_data.class_count, seed, hp, used, est, converged)


def predict_proba(model: TrainedModel, X: np.ndarray | Dataset) -> np.ndarray:
    return model.predict_proba(X)


def predict_label(model: TrainedModel, X: np.ndarray | Dataset) -> np.ndarray:
    return model.predict(X)


_FORMAT = {"format": "shapharmony-model", "version": 1}


def save_model(model: TrainedModel, path: str | Path) -> None:
    """Pickle a model behind a small version header."""
    with open(path, "wb") as fh:
        pickle.dump((_FORMAT, model), fh, protocol=pickle.HIGHEST_PROTOCOL)


def load_model(path: str | Path) -> TrainedModel:
    with open(path, "rb") as fh:
        header, model = pickle.load(fh)
    if header != _FORMAT:
        raise ValueError(f"unsupported model file header {header!r}")
    return model
