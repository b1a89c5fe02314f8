"""Agreement between static and dynamic importance vectors: cosine and top-k Jaccard."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .static_attribution import Provenance, RfiVector


class SimilarityError(ValueError):
    pass


class PairingError(ValueError):
    pass


def _values(v: RfiVector | Sequence[float] | np.ndarray) -> np.ndarray:
    return np.asarray(v.values if isinstance(v, RfiVector) else v, dtype=np.float64)


def cosine(static: RfiVector | np.ndarray, dynamic: RfiVector | np.ndarray) -> float:
    a, b = _values(static), _values(dynamic)
    if a.shape != b.shape:
        raise SimilarityError(f"length mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise SimilarityError("cosine similarity is undefined for a zero vector")
    # clip guards the [0, 1] contract against last-ulp rounding
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class TopKSet:
    k: int
    members: frozenset[str]


def top_k(v: RfiVector, k: int) -> TopKSet:
    """The ``k`` largest entries; equal values are ordered by ascending feature name."""
    m = len(v.feature_names)
    if not 1 <= k <= m:
        raise IndexError(f"k={k} outside [1, {m}]")
    order = sorted(range(m), key=lambda j: (-v.values[j], v.feature_names[j]))
    return TopKSet(k, frozenset(v.feature_names[j] for j in order[:k]))


def jaccard(a: TopKSet | Iterable[str], b: TopKSet | Iterable[str]) -> float:
    """``|A & B| / |A | B|``; top-k sets must share the same ``k``."""
    if isinstance(a, TopKSet) and isinstance(b, TopKSet) and a.k != b.k:
        raise ValueError(f"cannot compare top-{a.k} with top-{b.k}")
    sa = a.members if isinstance(a, TopKSet) else frozenset(a)
    sb = b.members if isinstance(b, TopKSet) else frozenset(b)
    union = sa | sb
    if not union:
        return 1.0
    return len(sa & sb) / len(union)


@dataclass(frozen=True)
class HarmonyReport:
    cosine: float
    jaccard_curve: dict[int, float]
    static_source: Provenance
    dynamic_source: Provenance
    warnings: tuple[str, ...] = ()

    def mean_jaccard(self, ks: Iterable[int] | None = None) -> float:
        ks = list(self.jaccard_curve) if ks is None else [k for k in ks if k in self.jaccard_curve]
        return float(np.mean([self.jaccard_curve[k] for k in ks])) if ks else float("nan")


def harmony(static: RfiVector, dynamic: RfiVector) -> HarmonyReport:
    """Cosine similarity plus the Jaccard curve for every ``k`` in ``1..m``."""
    s, d = static.provenance, dynamic.provenance
    if (s.dataset, s.model, s.seed) != (d.dataset, d.model, d.seed):
        raise PairingError(f"static {s} and dynamic {d} come from different runs")
    if static.feature_names != dynamic.feature_names:
        raise PairingError("static and dynamic vectors cover different features")
    warnings = []
    if static.degenerate:
        warnings.append("static RFI is degenerate (uniform fallback)")
    if dynamic.degenerate:
        warnings.append("dynamic RFI is degenerate (uniform fallback)")
    m = len(static.feature_names)
    curve = {k: jaccard(top_k(static, k), top_k(dynamic, k)) for k in range(1, m + 1)}
    return HarmonyReport(cosine(static, dynamic), curve, s, d, tuple(warnings))
