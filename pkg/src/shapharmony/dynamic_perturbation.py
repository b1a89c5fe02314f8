"""Test-set perturbation sweeps, weighted-average aggregation and dynamic importance.

A fixed model is scored on copies of the test set in which one feature at a
time is perturbed by a factor ``p`` in (0, 2). Continuous columns are
multiplied by ``p``. For a boolean category column, ``p`` scales the number of
rows where the category is active. Scores across the grid are averaged with
weights ``1 - |1 - p|`` (peaking at the unperturbed ``p = 1``). A feature's
dynamic importance is how far that average drifts from the unperturbed score.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np

from . import _budget
from ._seeding import derive_seed, rng_for
from .data import DataSplit, Dataset
from .metrics import Metric, MetricKind, evaluate
from .models import TrainedModel
from .static_attribution import Provenance, RfiSource, RfiVector, normalize_importance


class FeatureKindError(ValueError):
    pass


class CategoricalMode(str, Enum):
    COUNT = "count"
    PSEUDOCODE = "pseudocode"


@dataclass(frozen=True)
class PerturbationGrid:
    points: tuple[float, ...]

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        if not pts:
            raise ValueError("grid needs at least one point")
        bad = [p for p in pts if not 0.0 < p < 2.0]
        if bad:
            raise ValueError(f"grid points must lie in the open interval (0, 2): {bad}")
        object.__setattr__(self, "points", pts)

    @property
    def weights(self) -> np.ndarray:
        p = np.asarray(self.points)
        return 1.0 - np.abs(1.0 - p)

    @classmethod
    def from_range(cls, start: float, stop: float, step: float) -> PerturbationGrid:
        """Inclusive arithmetic grid; ``"0.1:1.9:0.1"`` style."""
        if step <= 0:
            raise ValueError("step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return cls(tuple(round(start + i * step, 10) for i in range(count)))

    @classmethod
    def parse(cls, text: str) -> PerturbationGrid:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid spec must be 'start:stop:step', got {text!r}")
        return cls.from_range(*(float(x) for x in parts))

    def spec(self) -> str:
        return ",".join(f"{p:g}" for p in self.points)


DEFAULT_GRID = PerturbationGrid.from_range(0.1, 1.9, 0.1)


def anwa(scores: np.ndarray, grid: PerturbationGrid) -> np.ndarray:
    """Weighted average of scores along the last axis with the grid's weights."""
    w = grid.weights
    scores = np.asarray(scores, dtype=np.float64)
    # averaging offsets from one entry keeps constant rows exact
    ref = scores[..., :1]
    return ref[..., 0] + (scores - ref) @ w / w.sum()


# ---------------------------------------------------------------------------
# Single-feature perturbations
# ---------------------------------------------------------------------------


def perturb_continuous(test: Dataset, j: int, p: float) -> Dataset:
    if test.is_categorical(j):
        raise FeatureKindError(f"column {test.columns[j].name!r} is categorical")
    if not 0.0 < p < 2.0:
        raise ValueError("p must lie in (0, 2)")
    X = test.X.copy()
    X[:, j] = X[:, j] * p
    return test.with_X(X)


def categorical_target(active: int, n: int, p: float) -> int:
    """Active-row count after scaling ``active`` by ``p``: ``clamp(round(p * active), 0, n)``."""
    return min(max(int(math.floor(p * active + 0.5)), 0), n)


def perturb_categorical(
    test: Dataset,
    j: int,
    p: float,
    seed: int,
    mode: CategoricalMode = CategoricalMode.COUNT,
) -> Dataset:
    """Scale how many rows have boolean column ``j`` switched on.

    Activated rows have their sibling category columns cleared; deactivated
    rows end up with no active category for that feature. When nothing would
    change (for instance no active rows at all) the copy carries
    ``meta['perturbation_noop'] = True``.

    ``mode=PSEUDOCODE`` instead rescales the values of the active entries by
    ``2 - p`` (``p >= 1``) or ``1 - p`` (``p < 1``), leaving inactive rows alone.
    """
    if not test.is_categorical(j):
        raise FeatureKindError(f"column {test.columns[j].name!r} is continuous")
    if not 0.0 < p < 2.0:
        raise ValueError("p must lie in (0, 2)")
    X = test.X.copy()
    active = np.flatnonzero(X[:, j] == 1.0)
    mode = CategoricalMode(mode)
    if mode is CategoricalMode.PSEUDOCODE:
        X[active, j] = (2.0 - p) if p >= 1.0 else (1.0 - p)
        return _with(test, X, noop=active.size == 0)

    c, n = active.size, test.n
    t = categorical_target(c, n, p)
    rng = rng_for(seed, "categorical")
    if t < c:
        off = rng.choice(active, size=c - t, replace=False)
        X[off, j] = 0.0
    elif t > c:
        inactive = np.flatnonzero(X[:, j] != 1.0)
        on = rng.choice(inactive, size=t - c, replace=False)
        sibs = test.siblings(j)
        if sibs:
            X[np.ix_(on, sibs)] = 0.0
        X[on, j] = 1.0
    return _with(test, X, noop=t == c)


def _with(test: Dataset, X: np.ndarray, noop: bool) -> Dataset:
    return Dataset(test.name, X, test.y, test.class_count, test.columns, test.features,
                   test.class_labels, {**test.meta, "perturbation_noop": noop})


def perturb(test: Dataset, j: int, p: float, seed: int,
            mode: CategoricalMode = CategoricalMode.COUNT) -> Dataset:
    if test.is_categorical(j):
        return perturb_categorical(test, j, p, seed, mode)
    return perturb_continuous(test, j, p)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Metric scores for every (feature, grid point) perturbation."""

    scores: np.ndarray
    base_score: float
    anwa: np.ndarray
    grid: PerturbationGrid
    metric: MetricKind
    model: str
    dataset: str
    seed: int
    feature_names: tuple[str, ...]
    noop_cells: tuple[tuple[int, int], ...] = ()
    categorical_mode: CategoricalMode = CategoricalMode.COUNT

    def __post_init__(self):
        for name in ("scores", "anwa"):
            arr = np.array(getattr(self, name), dtype=np.float64, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", *(f"p={p:g}" for p in self.grid.points), "anwa", "base_score"])
            for name, row, a in zip(self.feature_names, self.scores, self.anwa):
                w.writerow([name, *(f"{v:.12g}" for v in row), f"{a:.12g}", f"{self.base_score:.12g}"])


@dataclass(frozen=True, eq=False)
class PerturbedPredictions:
    """Labels predicted on every perturbed copy, shape ``(m, |P|, n_test)``."""

    labels: np.ndarray
    base_labels: np.ndarray
    noop_cells: tuple[tuple[int, int], ...]


def perturbed_predictions(
    model: TrainedModel,
    test: Dataset,
    grid: PerturbationGrid,
    seed: int,
    mode: CategoricalMode = CategoricalMode.COUNT,
    deadline: float | None = None,
) -> PerturbedPredictions:
    """Predict on each single-feature perturbation of the pristine ``test`` set.

    Perturbations never compound; every cell starts from ``test``. Cell
    ``(j, i)`` draws its randomness from ``(seed, j, i)`` alone.
    """
    m, P = test.m, len(grid.points)
    labels = np.empty((m, P, test.n), dtype=np.int64)
    noop = []
    for j in range(m):
        _budget.check(deadline)
        copies = []
        for i, p in enumerate(grid.points):
            pert = perturb(test, j, p, _cell_seed(seed, j, i), mode)
            if test.is_categorical(j) and pert.meta.get("perturbation_noop"):
                noop.append((j, i))
            copies.append(pert.X)
        labels[j] = model.predict(np.vstack(copies)).reshape(P, test.n)
    return PerturbedPredictions(labels, model.predict(test.X), tuple(noop))


def _cell_seed(seed: int, j: int, i: int) -> int:
    return derive_seed(seed, "cell", j, i)


def score_sweep(
    preds: PerturbedPredictions,
    test: Dataset,
    grid: PerturbationGrid,
    metric: MetricKind,
    model_name: str,
    seed: int,
    mode: CategoricalMode = CategoricalMode.COUNT,
) -> SweepResult:
    m, P = preds.labels.shape[:2]
    scores = np.empty((m, P))
    for j in range(m):
        for i in range(P):
            scores[j, i] = evaluate(test.y, preds.labels[j, i], test.class_count, metric)
    base = evaluate(test.y, preds.base_labels, test.class_count, metric)
    return SweepResult(
        scores=scores,
        base_score=base,
        anwa=anwa(scores, grid),
        grid=grid,
        metric=metric,
        model=model_name,
        dataset=test.name,
        seed=seed,
        feature_names=tuple(test.feature_names),
        noop_cells=preds.noop_cells,
        categorical_mode=CategoricalMode(mode),
    )


def sweep(
    model: TrainedModel,
    split: DataSplit,
    grid: PerturbationGrid = DEFAULT_GRID,
    metric: MetricKind = MetricKind(Metric.ACCURACY),
    seed: int = 0,
    mode: CategoricalMode = CategoricalMode.COUNT,
    deadline: float | None = None,
) -> SweepResult:
    preds = perturbed_predictions(model, split.test, grid, seed, mode, deadline)
    return score_sweep(preds, split.test, grid, metric, _model_name(model), seed, mode)


def sweep_metrics(
    model: TrainedModel,
    split: DataSplit,
    metrics: Iterable[MetricKind],
    grid: PerturbationGrid = DEFAULT_GRID,
    seed: int = 0,
    mode: CategoricalMode = CategoricalMode.COUNT,
    deadline: float | None = None,
) -> list[SweepResult]:
    """One sweep per metric, sharing a single pass of perturbed predictions."""
    preds = perturbed_predictions(model, split.test, grid, seed, mode, deadline)
    return [score_sweep(preds, split.test, grid, mk, _model_name(model), seed, mode) for mk in metrics]


def _model_name(model) -> str:
    kind = getattr(model, "kind", None)
    return getattr(kind, "value", type(model).__name__)


def dynamic_rfi(result: SweepResult) -> RfiVector:
    """Normalized ``|base_score - anwa_j|`` per feature."""
    u = np.abs(result.base_score - result.anwa)
    prov = Provenance(result.dataset, result.model, result.metric.label, result.seed)
    return normalize_importance(u, RfiSource.DYNAMIC_ANWA, result.feature_names, prov)
