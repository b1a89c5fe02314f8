"""Experiment orchestration: dataset x model x metric matrices, sample-size sweeps, reports.

Every cell runs the same pipeline: split, train, static attribution, dynamic
sweep, harmony. Cells are independent jobs; their results are assembled in
configuration order, so outputs are identical for any worker count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import platform
import time
import urllib.request
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from ._budget import BudgetExceeded
from ._seeding import derive_seed
from .comparison import harmony
from .data import (
    BUNDLED,
    DataError,
    Dataset,
    load_bundled,
    load_census,
    split,
    subsample,
    synth_census,
    synth_fraud,
)
from .dynamic_perturbation import CategoricalMode, PerturbationGrid, dynamic_rfi, sweep_metrics
from .metrics import Average, Metric, MetricKind
from .models import ModelKind, train
from .static_attribution import Backend, ClassPolicy, attribute, static_rfi

log = logging.getLogger(__name__)

DATASETS = (*BUNDLED, "census", "census_like", "fraud")
DEFAULT_CACHE = Path(os.environ.get("SHAPHARMONY_DATA", Path.home() / ".cache" / "shapharmony"))


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """One experiment matrix. ``seed`` is mandatory; there is no clock-based default."""

    seed: int
    datasets: list[str] = field(default_factory=lambda: ["iris"])
    models: list[str] = field(default_factory=lambda: ["logit"])
    metrics: list[str] = field(default_factory=lambda: ["accuracy"])
    average: str = "weighted"
    grid: str = "0.1:1.9:0.1"
    test_fraction: float = 0.2
    stratified: bool = False
    seeds: int = 1
    backend: str | None = None
    sample_budget: int = 200
    background_k: int = 10
    explain_rows: int | None = None
    class_policy: str = "true_class"
    categorical_mode: str = "count"
    sizes: list[int] = field(default_factory=list)
    census_path: str | None = None
    census_like_rows: int = 4000
    fraud_rows: int = 3430
    jaccard_min_features: int = 5
    cell_budget_s: float = 600.0
    jobs: int = 1
    out: str = "results"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.seed is None or isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError("an integer 'seed' is required")
        for name in self.datasets:
            if name not in DATASETS:
                raise ConfigError(f"unknown dataset {name!r}; choose from {DATASETS}")
        try:
            [ModelKind(m) for m in self.models]
            self.metric_kinds()
            PerturbationGrid.parse(self.grid)
            if self.backend is not None:
                Backend(self.backend)
            ClassPolicy(self.class_policy)
            CategoricalMode(self.categorical_mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.datasets or not self.models or not self.metrics:
            raise ConfigError("datasets, models and metrics must be nonempty")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.seeds < 1 or self.jobs < 1 or self.sample_budget < 1 or self.background_k < 1:
            raise ConfigError("seeds, jobs, sample_budget and background_k must be positive")

    def metric_kinds(self) -> list[MetricKind]:
        return [MetricKind.parse(m, Average(self.average)) for m in self.metrics]

    def grid_obj(self) -> PerturbationGrid:
        return PerturbationGrid.parse(self.grid)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        if "seed" not in raw:
            raise ConfigError("an integer 'seed' is required")
        return cls(**raw)

    @classmethod
    def from_file(cls, path: str | Path) -> ExperimentConfig:
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None

    def with_overrides(self, **overrides: Any) -> ExperimentConfig:
        """Return a copy with every non-None override applied."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **changes)


@dataclass
class CellResult:
    dataset: str
    model: str
    metric: str
    seed: int
    cosine: float
    base_score: float
    test_accuracy: float
    backend: str
    feature_names: tuple[str, ...]
    static_rfi: tuple[float, ...]
    dynamic_rfi: tuple[float, ...]
    jaccard_curve: dict[int, float] | None
    warnings: tuple[str, ...] = ()
    size: int | None = None


@dataclass
class Skip:
    dataset: str
    model: str
    seed: int
    reason: str
    size: int | None = None


@dataclass
class ResultTable:
    rows: list[CellResult]
    skips: list[Skip]
    config: ExperimentConfig
    datasets: dict[str, dict[str, Any]]
    kind: str = "matrix"

    def group_stats(self, key: str) -> dict[str, tuple[float, float, int]]:
        """Mean, population standard deviation and count of cosine per group."""
        groups: dict[str, list[float]] = {}
        for r in self.rows:
            groups.setdefault(str(getattr(r, key)), []).append(r.cosine)
        return {k: (float(np.mean(v)), float(np.std(v)), len(v)) for k, v in groups.items()}


# ---------------------------------------------------------------------------
# Dataset resolution
# ---------------------------------------------------------------------------


def census_files(config: ExperimentConfig) -> list[Path]:
    root = Path(config.census_path) if config.census_path else DEFAULT_CACHE / "census"
    if root.is_file():
        return [root]
    return [p for p in (root / "adult.data", root / "adult.test") if p.is_file()]


def resolve_dataset(name: str, config: ExperimentConfig, rows: int | None = None) -> tuple[Dataset, dict]:
    """Materialize a dataset and describe where it came from."""
    if name in BUNDLED:
        ds = load_bundled(name)
        return ds, {"source": f"bundled:{name}", "n": ds.n, "m": ds.m}
    if name == "fraud":
        ds = synth_fraud(config.fraud_rows, 0.5, config.seed)
        return ds, {"source": "synth_fraud", "generated": True, "n": ds.n, "m": ds.m}
    if name == "census":
        files = census_files(config)
        if files:
            ds = load_census(*files)
            return ds, {"source": "uci_adult", "files": [p.name for p in files],
                        "dropped_rows": ds.meta["dropped_rows"], "n": ds.n, "m": ds.m}
    n = rows or config.census_like_rows
    ds = synth_census(n, config.seed)
    info = {"source": "synth_census", "generated": True, "n": ds.n, "m": ds.m}
    if name == "census":
        info["substituted_for"] = "census"
        info["reason"] = "UCI Adult files not found; generated census-like data used"
    return ds, info


# ---------------------------------------------------------------------------
# Cell pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Job:
    dataset: Dataset
    model: str
    seed: int
    config: ExperimentConfig
    size: int | None = None


def _run_cell(job: _Job) -> list[CellResult] | Skip:
    cfg = job.config
    deadline = time.monotonic() + cfg.cell_budget_s
    try:
        ds = job.dataset
        if job.size is not None:
            ds = subsample(ds, job.size, derive_seed(job.seed, "size", job.size))
        sp = split(ds, cfg.test_fraction, job.seed, stratified=cfg.stratified)
        model = train(job.model, sp.train, seed=job.seed)
        attr = attribute(
            job.model, sp, job.seed,
            backend=cfg.backend, model=model, sample_budget=cfg.sample_budget,
            background_k=cfg.background_k, class_policy=ClassPolicy(cfg.class_policy),
            max_rows=cfg.explain_rows, deadline=deadline,
        )
        s_rfi = static_rfi(attr)
        sweeps = sweep_metrics(model, sp, cfg.metric_kinds(), cfg.grid_obj(), job.seed,
                               CategoricalMode(cfg.categorical_mode), deadline)
        accuracy = float(np.mean(model.predict(sp.test.X) == sp.test.y))
    except BudgetExceeded:
        return Skip(job.dataset.name, job.model, job.seed, "budget", job.size)
    except (DataError, ValueError, FloatingPointError) as exc:
        return Skip(job.dataset.name, job.model, job.seed, f"{type(exc).__name__}: {exc}", job.size)

    out = []
    keep_curve = ds.m >= cfg.jaccard_min_features
    for sw in sweeps:
        d_rfi = dynamic_rfi(sw)
        report = harmony(s_rfi, d_rfi)
        warns = list(report.warnings)
        if not model.converged:
            warns.append("model did not converge within its iteration budget")
        if sw.noop_cells:
            warns.append(f"{len(sw.noop_cells)} categorical perturbation cells were no-ops")
        out.append(CellResult(
            dataset=job.dataset.name,
            model=job.model,
            metric=sw.metric.label,
            seed=job.seed,
            cosine=report.cosine,
            base_score=sw.base_score,
            test_accuracy=accuracy,
            backend=attr.backend.value,
            feature_names=tuple(ds.feature_names),
            static_rfi=tuple(s_rfi.values.tolist()),
            dynamic_rfi=tuple(d_rfi.values.tolist()),
            jaccard_curve=report.jaccard_curve if keep_curve else None,
            warnings=tuple(warns),
            size=job.size,
        ))
    return out


def _execute(jobs: list[_Job], workers: int) -> list[list[CellResult] | Skip]:
    if workers <= 1 or len(jobs) <= 1:
        return [_run_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, jobs))


def _assemble(results, config, datasets, kind) -> ResultTable:
    rows, skips = [], []
    for res in results:
        if isinstance(res, Skip):
            skips.append(res)
        else:
            rows.extend(res)
    return ResultTable(rows, skips, config, datasets, kind)


def run_matrix(config: ExperimentConfig) -> ResultTable:
    """Run every (dataset, model, replicate seed) cell for all configured metrics."""
    loaded, info = {}, {}
    for name in config.datasets:
        ds, meta = resolve_dataset(name, config)
        loaded[name], info[ds.name] = ds, meta
    jobs = [
        _Job(loaded[d], m, config.seed + r, config)
        for d in config.datasets
        for m in config.models
        for r in range(config.seeds)
    ]
    return _assemble(_execute(jobs, config.jobs), config, info, "matrix")


def run_sample_size(config: ExperimentConfig, sizes: Sequence[int] | None = None) -> ResultTable:
    """One pipeline run per subsample size, first configured dataset/model/metric only."""
    sizes = list(sizes if sizes is not None else config.sizes)
    if not sizes:
        raise ConfigError("no sample sizes given")
    cfg = replace(config, metrics=config.metrics[:1], models=config.models[:1], datasets=config.datasets[:1])
    ds, meta = resolve_dataset(cfg.datasets[0], cfg, rows=max(sizes))
    too_big = [s for s in sizes if s > ds.n]
    if too_big:
        raise ConfigError(f"sizes {too_big} exceed the {ds.n} available rows")
    jobs = [_Job(ds, cfg.models[0], cfg.seed + r, cfg, size=s) for s in sizes for r in range(cfg.seeds)]
    return _assemble(_execute(jobs, cfg.jobs), cfg, {ds.name: meta}, "sample_size")


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

REPORT_FILES = ("cells.csv", "similarity_long.csv", "jaccard_long.csv", "rfi_long.csv", "summary.txt")


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def build_manifest(table: ResultTable, files: Sequence[str]) -> dict[str, Any]:
    import sklearn

    cfg = asdict(table.config)
    cfg.pop("out", None)
    cfg.pop("jobs", None)
    return {
        "package": {"name": "shapharmony", "version": __version__},
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scikit-learn": sklearn.__version__,
        },
        "kind": table.kind,
        "config": cfg,
        "seeds": sorted({r.seed for r in table.rows} | {s.seed for s in table.skips}),
        "grid": table.config.grid_obj().spec(),
        "backends": sorted({f"{r.dataset}/{r.model}: {r.backend}" for r in table.rows}),
        "datasets": table.datasets,
        "jaccard_excluded": sorted({r.dataset for r in table.rows if r.jaccard_curve is None}),
        "skips": [asdict(s) for s in table.skips],
        "skip_count": len(table.skips),
        "files": list(files),
    }


def _summary_text(table: ResultTable, run_id: str) -> str:
    lines = [f"run {run_id}", ""]
    metrics = list(dict.fromkeys(r.metric for r in table.rows))
    models = list(dict.fromkeys(r.model for r in table.rows))
    datasets = list(dict.fromkeys(r.dataset for r in table.rows))
    if table.kind == "sample_size":
        sizes = sorted({r.size for r in table.rows})
        lines.append("Similarity by sample size")
        lines.append("|X|        " + " ".join(f"{s:>8d}" for s in sizes))
        means = [np.mean([r.cosine for r in table.rows if r.size == s]) for s in sizes]
        lines.append("Similarity " + " ".join(f"{m:8.3f}" for m in means))
    else:
        lines.append("Cosine similarity (static vs dynamic), averaged over seeds")
        head = ["dataset".ljust(16)] + [f"{mo}/{me}"[:18].rjust(18) for mo in models for me in metrics]
        lines.append(" ".join(head))
        for d in datasets:
            cells = []
            for mo in models:
                for me in metrics:
                    vals = [r.cosine for r in table.rows if (r.dataset, r.model, r.metric) == (d, mo, me)]
                    cells.append((f"{np.mean(vals):.3f}" if vals else "-").rjust(18))
            lines.append(" ".join([d.ljust(16)] + cells))
    for key in ("dataset", "model", "metric"):
        lines.append("")
        lines.append(f"by {key}: mean / std / count")
        for k, (mu, sd, n) in table.group_stats(key).items():
            lines.append(f"  {k:<24} {mu:.3f} / {sd:.3f} / {n}")
    lines.append("")
    lines.append(f"skipped cells: {len(table.skips)}")
    for s in table.skips:
        lines.append(f"  {s.dataset}/{s.model}/seed={s.seed}" + (f"/size={s.size}" if s.size else "") + f": {s.reason}")
    warned = [r for r in table.rows if r.warnings]
    if warned:
        lines.append("")
        lines.append("warnings:")
        for r in warned:
            lines.append(f"  {r.dataset}/{r.model}/{r.metric}/seed={r.seed}: {'; '.join(r.warnings)}")
    return "\n".join(lines) + "\n"


def emit_reports(table: ResultTable, out_dir: str | Path) -> list[Path]:
    """Write CSV tables, a text summary and a manifest; returns the written paths.

    Every CSV carries a ``run_id`` column holding the first 16 hex digits of
    the manifest's SHA-256, and the summary names it on its first line.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc

    names = list(REPORT_FILES) + (["sample_size.csv"] if table.kind == "sample_size" else [])
    manifest = build_manifest(table, names + ["manifest.json"])
    manifest_text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    run_id = hashlib.sha256(manifest_text.encode()).hexdigest()[:16]

    rows = table.rows
    texts = {
        "cells.csv": _csv_text(
            ["run_id", "dataset", "model", "metric", "seed", "size", "cosine", "base_score",
             "test_accuracy", "backend", "mean_jaccard_k1_10", "warnings"],
            [[run_id, r.dataset, r.model, r.metric, r.seed, "" if r.size is None else r.size,
              _fmt(r.cosine), _fmt(r.base_score), _fmt(r.test_accuracy), r.backend,
              _fmt(np.mean([r.jaccard_curve[k] for k in r.jaccard_curve if k <= 10])) if r.jaccard_curve else "",
              "; ".join(r.warnings)] for r in rows],
        ),
        "similarity_long.csv": _csv_text(
            ["run_id", "dataset", "model", "metric", "seed", "cosine"],
            [[run_id, r.dataset, r.model, r.metric, r.seed, _fmt(r.cosine)] for r in rows],
        ),
        "jaccard_long.csv": _csv_text(
            ["run_id", "dataset", "model", "metric", "seed", "k", "jaccard"],
            [[run_id, r.dataset, r.model, r.metric, r.seed, k, _fmt(j)]
             for r in rows if r.jaccard_curve for k, j in sorted(r.jaccard_curve.items())],
        ),
        "rfi_long.csv": _csv_text(
            ["run_id", "dataset", "model", "metric", "seed", "size", "feature", "static_rfi", "dynamic_rfi"],
            [[run_id, r.dataset, r.model, r.metric, r.seed, "" if r.size is None else r.size, f, _fmt(s), _fmt(d)]
             for r in rows for f, s, d in zip(r.feature_names, r.static_rfi, r.dynamic_rfi)],
        ),
        "summary.txt": _summary_text(table, run_id),
    }
    if table.kind == "sample_size":
        sizes = sorted({r.size for r in rows})
        means = [_fmt(np.mean([r.cosine for r in rows if r.size == s])) for s in sizes]
        texts["sample_size.csv"] = _csv_text(["run_id", "|X|", *sizes], [[run_id, "Similarity", *means]])
    texts["manifest.json"] = manifest_text

    written = []
    for name, text in texts.items():
        path = out / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# Dataset download
# ---------------------------------------------------------------------------


def _checksum_manifest() -> dict[str, Any]:
    return json.loads((resources.files("shapharmony") / "datasets" / "checksums.json").read_text())


def fetch_dataset(name: str, dest: str | Path | None = None, allow_unpinned: bool = False,
                  opener=urllib.request.urlopen) -> list[Path]:
    """Download a dataset listed in the checksum manifest and verify each file.

    Files whose manifest entry has no pinned SHA-256 are refused unless
    ``allow_unpinned`` is set; in that case the observed digest is written to
    ``checksums.lock.json`` beside the files and enforced on later fetches.
    """
    entry = _checksum_manifest().get(name)
    if entry is None:
        raise ConfigError(f"no download recipe for {name!r}")
    dest = Path(dest) if dest else DEFAULT_CACHE / name
    dest.mkdir(parents=True, exist_ok=True)
    lock_path = dest / "checksums.lock.json"
    lock = json.loads(lock_path.read_text()) if lock_path.exists() else {}
    written = []
    for fname, spec in entry["files"].items():
        pinned = spec.get("sha256") or lock.get(fname)
        if pinned is None and not allow_unpinned:
            raise ConfigError(f"{fname} has no pinned checksum; rerun with --allow-unpinned to pin on first use")
        with opener(spec["url"]) as resp:
            payload = resp.read()
        digest = hashlib.sha256(payload).hexdigest()
        if pinned is not None and digest != pinned:
            raise ConfigError(f"checksum mismatch for {fname}: expected {pinned}, got {digest}")
        (dest / fname).write_bytes(payload)
        lock[fname] = digest
        written.append(dest / fname)
    lock_path.write_text(json.dumps(lock, indent=2, sort_keys=True) + "\n")
    return written
