"""Static (Shapley) versus dynamic (perturbation) feature-importance harmony."""

__version__ = "0.1.0"

from .comparison import HarmonyReport, cosine, harmony, jaccard, top_k
from .data import Dataset, DataSplit, load_bundled, load_csv, split, subsample, synth_census, synth_fraud
from .dynamic_perturbation import DEFAULT_GRID, PerturbationGrid, SweepResult, dynamic_rfi, sweep
from .metrics import MetricKind, confusion, score
from .models import ModelKind, TrainedModel, train
from .static_attribution import (
    AttributionMatrix,
    RfiVector,
    shapley_marginal,
    shapley_retrain,
    static_rfi,
    summarize_background,
)

__all__ = [
    "AttributionMatrix", "DEFAULT_GRID", "DataSplit", "Dataset", "HarmonyReport", "MetricKind",
    "ModelKind", "PerturbationGrid", "RfiVector", "SweepResult", "TrainedModel", "confusion",
    "cosine", "dynamic_rfi", "harmony", "jaccard", "load_bundled", "load_csv", "score",
    "shapley_marginal", "shapley_retrain", "split", "static_rfi", "subsample",
    "summarize_background", "sweep", "synth_census", "synth_fraud", "top_k", "train",
]
