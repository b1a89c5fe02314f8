"""Tabular dataset ingestion, one-hot encoding, splitting and synthetic generators."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from ._seeding import rng_for


class DataError(ValueError):
    pass


class SchemaError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.column = column


class ValidationError(DataError):
    pass


class StratificationError(DataError):
    pass


class Kind(str, Enum):
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class FeatureSpec:
    """A raw (pre-encoding) feature declaration."""

    name: str
    kind: Kind
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.CONTINUOUS and self.categories is not None:
            raise SchemaError(f"continuous feature {self.name!r} cannot declare categories")
        if self.kind is Kind.CATEGORICAL:
            if self.categories is None or len(self.categories) < 2:
                raise ValidationError(f"categorical feature {self.name!r} needs at least 2 categories")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"categorical feature {self.name!r} has duplicate categories")
            object.__setattr__(self, "categories", tuple(self.categories))


@dataclass(frozen=True)
class Column:
    """One encoded column: a continuous feature or one boolean category indicator."""

    name: str
    kind: Kind
    source: str
    category: str | None = None


def _frozen(a: np.ndarray, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """Encoded feature matrix with labels.

    ``X`` and ``y`` are read-only copies. Categorical features appear as one
    boolean column per category; ``columns`` describes each encoded column.
    """

    name: str
    X: np.ndarray
    y: np.ndarray
    class_count: int
    columns: tuple[Column, ...]
    features: tuple[FeatureSpec, ...] = ()
    class_labels: tuple[str, ...] = ()
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        X = _frozen(self.X, np.float64)
        y = _frozen(self.y, np.int64)
        if X.ndim != 2:
            raise ValidationError("X must be a 2-D matrix")
        if y.shape != (X.shape[0],):
            raise ValidationError(f"label count {y.shape[0]} does not match row count {X.shape[0]}")
        if X.shape[1] != len(self.columns):
            raise ValidationError(f"X has {X.shape[1]} columns but {len(self.columns)} are declared")
        if self.class_count < 2:
            raise ValidationError("at least two classes are required")
        if y.size and (y.min() < 0 or y.max() >= self.class_count):
            raise ValidationError("labels must lie in [0, class_count)")
        if not np.all(np.isfinite(X)):
            raise ValidationError("X contains non-finite values")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValidationError("encoded column names must be unique")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "class_labels", tuple(self.class_labels))
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def is_categorical(self, j: int) -> bool:
        return self.columns[j].kind is Kind.CATEGORICAL

    def siblings(self, j: int) -> list[int]:
        """Encoded columns sharing column ``j``'s source feature, excluding ``j``."""
        col = self.columns[j]
        if col.kind is not Kind.CATEGORICAL:
            return []
        return [i for i, c in enumerate(self.columns) if i != j and c.source == col.source]

    def check_invariants(self, require_all_classes: bool = True) -> None:
        for j, col in enumerate(self.columns):
            if col.kind is Kind.CATEGORICAL and not np.isin(self.X[:, j], (0.0, 1.0)).all():
                raise ValidationError(f"categorical column {col.name!r} holds values outside {{0, 1}}")
        if require_all_classes:
            missing = sorted(set(range(self.class_count)) - set(np.unique(self.y).tolist()))
            if missing:
                raise StratificationError(f"classes {missing} are absent from {self.name!r}")

    def take(self, idx: Sequence[int] | np.ndarray, name: str | None = None) -> Dataset:
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            name=name or self.name,
            X=self.X[idx],
            y=self.y[idx],
            class_count=self.class_count,
            columns=self.columns,
            features=self.features,
            class_labels=self.class_labels,
            meta=self.meta,
        )

    def with_X(self, X: np.ndarray) -> Dataset:
        return Dataset(
            name=self.name,
            X=X,
            y=self.y,
            class_count=self.class_count,
            columns=self.columns,
            features=self.features,
            class_labels=self.class_labels,
            meta=self.meta,
        )


@dataclass(frozen=True, eq=False)
class DataSplit:
    train: Dataset
    test: Dataset
    seed: int
    test_fraction: float
    train_idx: np.ndarray
    test_idx: np.ndarray
    stratified: bool = False


# ---------------------------------------------------------------------------
# Encoding and CSV ingestion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Schema:
    """Sidecar schema for a CSV file.

    JSON fields: ``target`` (required), ``features`` (required; column name to
    ``"continuous"`` or ``"categorical"``), and optionally ``name``,
    ``categories`` (column name to ordered label list), ``ignore`` (columns to
    skip), ``missing`` (tokens meaning "no value") and ``drop_missing``.
    """

    target: str
    features: Mapping[str, Kind]
    name: str = "dataset"
    categories: Mapping[str, Sequence[str]] = field(default_factory=dict)
    ignore: Sequence[str] = ()
    missing: Sequence[str] = ("",)
    drop_missing: bool = False

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> Schema:
        for key in ("target", "features"):
            if key not in raw:
                raise SchemaError(f"schema is missing required field {key!r}")
        try:
            feats = {str(k): Kind(v) for k, v in raw["features"].items()}
        except ValueError as exc:
            raise SchemaError(f"unknown feature kind: {exc}") from None
        unknown = set(raw) - {"target", "features", "name", "categories", "ignore", "missing", "drop_missing"}
        if unknown:
            raise SchemaError(f"unknown schema fields {sorted(unknown)}")
        missing = tuple(raw.get("missing", ("",)))
        if "" not in missing:
            missing = missing + ("",)
        return cls(
            target=raw["target"],
            features=feats,
            name=raw.get("name", "dataset"),
            categories={k: tuple(v) for k, v in raw.get("categories", {}).items()},
            ignore=tuple(raw.get("ignore", ())),
            missing=missing,
            drop_missing=bool(raw.get("drop_missing", False)),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> Schema:
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: invalid JSON ({exc})") from None


def _first_appearance(values: Sequence[str]) -> list[str]:
    return list(dict.fromkeys(values))


def encode(
    name: str,
    raw: Mapping[str, Sequence[Any]],
    kinds: Mapping[str, Kind | str],
    target: Sequence[str],
    categories: Mapping[str, Sequence[str]] | None = None,
    meta: Mapping[str, Any] | None = None,
) -> Dataset:
    """Build a Dataset from raw columns.

    Continuous values are taken as floats; categorical values are one-hot
    encoded, one column per category (declared order, else first appearance).
    Target labels map to dense class indices in first-appearance order.
    """
    categories = dict(categories or {})
    target = [str(t) for t in target]
    labels = _first_appearance(target)
    if len(labels) < 2:
        raise ValidationError(f"target of {name!r} has a single class {labels}")
    label_index = {lab: i for i, lab in enumerate(labels)}
    y = np.array([label_index[t] for t in target], dtype=np.int64)

    blocks: list[np.ndarray] = []
    columns: list[Column] = []
    specs: list[FeatureSpec] = []
    for fname, kind in kinds.items():
        kind = Kind(kind)
        values = raw[fname]
        if kind is Kind.CONTINUOUS:
            col = np.asarray(values, dtype=np.float64)
            specs.append(FeatureSpec(fname, kind))
            columns.append(Column(fname, kind, fname))
            blocks.append(col[:, None])
            continue
        values = [str(v) for v in values]
        cats = list(categories.get(fname) or _first_appearance(values))
        unknown = set(values) - set(cats)
        if unknown:
            raise ValidationError(f"feature {fname!r} has undeclared categories {sorted(unknown)}")
        specs.append(FeatureSpec(fname, kind, tuple(cats)))
        pos = {c: i for i, c in enumerate(cats)}
        onehot = np.zeros((len(values), len(cats)))
        onehot[np.arange(len(values)), [pos[v] for v in values]] = 1.0
        blocks.append(onehot)
        columns.extend(Column(f"{fname}={c}", kind, fname, c) for c in cats)

    X = np.hstack(blocks) if blocks else np.zeros((len(y), 0))
    ds = Dataset(name, X, y, len(labels), tuple(columns), tuple(specs), tuple(labels), meta or {})
    ds.check_invariants()
    return ds


def load_csv(path: str | Path, schema: Schema | Mapping[str, Any] | str | Path) -> Dataset:
    """Read a headered CSV and encode it according to ``schema``."""
    if isinstance(schema, (str, Path)):
        schema = Schema.from_file(schema)
    elif not isinstance(schema, Schema):
        schema = Schema.from_dict(schema)

    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, skipinitialspace=True)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path} is empty") from None
        rows = [r for r in reader if any(cell.strip() for cell in r)]

    pos = {h: i for i, h in enumerate(header)}
    needed = [schema.target, *schema.features]
    absent = [c for c in needed if c not in pos]
    if absent:
        raise SchemaError(f"columns {absent} are declared in the schema but missing from {path}")
    extra = [h for h in header if h not in needed and h not in schema.ignore]
    if extra:
        raise SchemaError(f"columns {extra} are not declared in the schema (list them under 'ignore')")

    missing_tokens = set(schema.missing)
    kept: list[list[str]] = []
    dropped = 0
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", row=lineno)
        cells = [c.strip() for c in row]
        holes = [c for c in needed if cells[pos[c]] in missing_tokens]
        if holes:
            if schema.drop_missing:
                dropped += 1
                continue
            raise ParseError("missing value", row=lineno, column=holes[0])
        kept.append(cells)
        for fname, kind in schema.features.items():
            if kind is Kind.CONTINUOUS:
                try:
                    v = float(cells[pos[fname]])
                except ValueError:
                    raise ParseError(f"non-numeric value {cells[pos[fname]]!r}", row=lineno, column=fname) from None
                if not math.isfinite(v):
                    raise ParseError(f"non-finite value {cells[pos[fname]]!r}", row=lineno, column=fname)

    raw = {}
    for fname, kind in schema.features.items():
        col = [r[pos[fname]] for r in kept]
        raw[fname] = [float(v) for v in col] if kind is Kind.CONTINUOUS else col
    target = [r[pos[schema.target]] for r in kept]
    return encode(
        schema.name,
        raw,
        schema.features,
        target,
        categories=schema.categories,
        meta={"source": str(path), "dropped_rows": dropped},
    )


BUNDLED = ("iris", "wine", "breast_cancer")


def load_bundled(name: str) -> Dataset:
    """Load one of the CSV fixtures shipped with the package."""
    if name not in BUNDLED:
        raise DataError(f"unknown bundled dataset {name!r}; choose from {BUNDLED}")
    root = resources.files("shapharmony") / "datasets"
    with resources.as_file(root / f"{name}.csv") as csv_path, resources.as_file(
        root / f"{name}.schema.json"
    ) as schema_path:
        ds = load_csv(csv_path, schema_path)
    return Dataset(ds.name, ds.X, ds.y, ds.class_count, ds.columns, ds.features, ds.class_labels,
                   {"source": f"bundled:{name}", "dropped_rows": 0})


# ---------------------------------------------------------------------------
# Splitting and subsampling
# ---------------------------------------------------------------------------


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(ds: Dataset, test_fraction: float = 0.2, seed: int = 0, stratified: bool = False) -> DataSplit:
    """Shuffle and partition ``ds`` into train and test views.

    The test partition receives ``round(n * test_fraction)`` rows (at least
    one); the rest go to train. Every class must be present in train.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError("test_fraction must lie in (0, 1)")
    rng = rng_for(seed, "split")
    if stratified:
        test_parts, train_parts = [], []
        for c in range(ds.class_count):
            members = np.flatnonzero(ds.y == c)
            members = members[rng.permutation(members.size)]
            k = min(_round_half_up(members.size * test_fraction), members.size - 1)
            test_parts.append(members[:max(k, 0)])
            train_parts.append(members[max(k, 0):])
        test_idx = np.concatenate(test_parts)
        train_idx = np.concatenate(train_parts)
        test_idx = test_idx[rng.permutation(test_idx.size)]
        train_idx = train_idx[rng.permutation(train_idx.size)]
        if test_idx.size == 0:
            raise ValidationError("stratified split produced an empty test partition")
    else:
        n_test = max(1, _round_half_up(ds.n * test_fraction))
        if n_test >= ds.n:
            raise ValidationError(f"cannot split {ds.n} rows with test_fraction={test_fraction}")
        perm = rng.permutation(ds.n)
        test_idx, train_idx = perm[:n_test], perm[n_test:]

    train = ds.take(train_idx, name=ds.name)
    absent = sorted(set(range(ds.class_count)) - set(np.unique(train.y).tolist()))
    if absent:
        raise StratificationError(
            f"classes {absent} are absent from the training partition (seed={seed}); "
            "retry with another seed or stratified=True"
        )
    return DataSplit(
        train=train,
        test=ds.take(test_idx, name=ds.name),
        seed=seed,
        test_fraction=test_fraction,
        train_idx=_frozen(train_idx, np.int64),
        test_idx=_frozen(test_idx, np.int64),
        stratified=stratified,
    )


def subsample(ds: Dataset, size: int, seed: int) -> Dataset:
    """Uniform row subset of ``size`` rows without replacement."""
    if not 0 < size <= ds.n:
        raise ValidationError(f"subsample size {size} outside (0, {ds.n}]")
    idx = rng_for(seed, "subsample").choice(ds.n, size=size, replace=False)
    out = ds.take(idx)
    out.check_invariants(require_all_classes=True)
    return out


# ---------------------------------------------------------------------------
# Synthetic generators
# ---------------------------------------------------------------------------


def synth_fraud(n: int = 3430, fraud_fraction: float = 0.5, seed: int = 0) -> Dataset:
    """Generate a transaction-fraud table with eight raw features.

    Generative rules (class 0 = genuine, class 1 = fraud):

    ``transaction_amount``
        log-normal; genuine mu=3.5, sigma=0.9; fraud mu=4.3, sigma=1.0.
        This is the planted signal and the strongest single predictor.
    ``account_age_days``
        gamma(shape=2); scale 400 for genuine, 250 for fraud.
    ``prior_txn_count``
        Poisson; mean 40 for genuine, 32 for fraud.
    ``channel``
        categorical {online, pos, atm}; genuine p=(.40, .45, .15),
        fraud p=(.55, .30, .15).
    ``foreign``
        categorical {no, yes}; P(yes) = .05 genuine, .12 fraud.
    ``hour``
        categorical 0..23; genuine centred on 14h (sd 4h, wrapped), fraud uniform.
    ``day_of_week``, ``month``
        categorical, uniform for both classes (pure noise).

    Exactly ``round(n * fraud_fraction)`` rows are fraud; rows are shuffled.
    """
    if n < 100:
        raise ValidationError("synth_fraud needs n >= 100")
    if not 0.0 < fraud_fraction < 1.0:
        raise ValidationError("fraud_fraction must lie in (0, 1)")
    n_fraud = _round_half_up(n * fraud_fraction)
    if n_fraud == 0 or n_fraud == n:
        raise ValidationError(f"fraud_fraction={fraud_fraction} leaves a class empty at n={n}")
    rng = rng_for(seed, "synth_fraud")
    fraud = np.zeros(n, dtype=bool)
    fraud[:n_fraud] = True
    fraud = fraud[rng.permutation(n)]

    amount = np.where(fraud, rng.lognormal(4.3, 1.0, n), rng.lognormal(3.5, 0.9, n))
    age = rng.gamma(2.0, np.where(fraud, 250.0, 400.0))
    prior = rng.poisson(np.where(fraud, 32.0, 40.0)).astype(float)
    u = rng.random(n)
    channel = np.where(
        fraud,
        np.select([u < 0.55, u < 0.85], ["online", "pos"], "atm"),
        np.select([u < 0.40, u < 0.85], ["online", "pos"], "atm"),
    )
    foreign = np.where(rng.random(n) < np.where(fraud, 0.12, 0.05), "yes", "no")
    day_hour = np.mod(np.rint(rng.normal(14.0, 4.0, n)), 24).astype(int)
    hour = np.where(fraud, rng.integers(0, 24, n), day_hour)
    dow = rng.integers(0, 7, n)
    month = rng.integers(1, 13, n)
    days = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")

    raw = {
        "transaction_amount": np.round(amount, 2),
        "account_age_days": np.round(age, 1),
        "prior_txn_count": prior,
        "channel": channel.tolist(),
        "foreign": foreign.tolist(),
        "hour": [f"{h:02d}" for h in hour],
        "day_of_week": [days[d] for d in dow],
        "month": [f"{m:02d}" for m in month],
    }
    kinds = {k: Kind.CONTINUOUS for k in ("transaction_amount", "account_age_days", "prior_txn_count")}
    kinds.update({k: Kind.CATEGORICAL for k in ("channel", "foreign", "hour", "day_of_week", "month")})
    target = np.where(fraud, "fraud", "genuine").tolist()
    return encode("synthetic_fraud", raw, kinds, target, meta={"source": f"synth_fraud(n={n}, seed={seed})"})


CENSUS_FEATURES: dict[str, Kind] = {
    "age": Kind.CONTINUOUS,
    "workclass": Kind.CATEGORICAL,
    "fnlwgt": Kind.CONTINUOUS,
    "education": Kind.CATEGORICAL,
    "education-num": Kind.CONTINUOUS,
    "marital-status": Kind.CATEGORICAL,
    "occupation": Kind.CATEGORICAL,
    "relationship": Kind.CATEGORICAL,
    "race": Kind.CATEGORICAL,
    "sex": Kind.CATEGORICAL,
    "capital-gain": Kind.CONTINUOUS,
    "capital-loss": Kind.CONTINUOUS,
    "hours-per-week": Kind.CONTINUOUS,
    "native-country": Kind.CATEGORICAL,
}

CENSUS_SCHEMA = Schema(
    target="income",
    features=CENSUS_FEATURES,
    name="census",
    missing=("", "?"),
    drop_missing=True,
)

CENSUS_COLUMNS = [*CENSUS_FEATURES, "income"]


def load_census(*paths: str | Path) -> Dataset:
    """Load UCI Adult files (header-less); rows with '?' fields are dropped.

    Several files (``adult.data``, ``adult.test``) are concatenated in order.
    The number of dropped rows is recorded in ``meta['dropped_rows']``.
    Labels from the test file (``>50K.``) are folded into the training spelling.
    """
    if not paths:
        raise DataError("load_census needs at least one file")
    rows: list[list[str]] = []
    for path in paths:
        with open(path, encoding="utf-8", newline="") as fh:
            lines = [ln for ln in fh if ln.strip() and not ln.startswith("|")]
        rows.extend(csv.reader(lines, skipinitialspace=True))
    tmp = Path(paths[0]).with_suffix(".with_header.csv")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CENSUS_COLUMNS)
        for r in rows:
            r = [c.strip() for c in r]
            r[-1] = r[-1].rstrip(".")
            w.writerow(r)
    try:
        ds = load_csv(tmp, CENSUS_SCHEMA)
    finally:
        tmp.unlink()
    return Dataset(ds.name, ds.X, ds.y, ds.class_count, ds.columns, ds.features, ds.class_labels,
                   {"source": ",".join(str(p) for p in paths), "dropped_rows": ds.meta["dropped_rows"]})


def synth_census(n: int = 4000, seed: int = 0) -> Dataset:
    """Generate a census-like income table with the UCI Adult raw schema.

    Fourteen raw features (six continuous, eight categorical). Income above
    the threshold is drawn from a logistic model on education-num, age,
    hours-per-week, capital-gain, marital status, sex and occupation, giving
    roughly a quarter positives.
    """
    if n < 100:
        raise ValidationError("synth_census needs n >= 100")
    rng = rng_for(seed, "synth_census")

    def pick(options: Sequence[str], probs: Sequence[float]) -> np.ndarray:
        return rng.choice(np.array(options), size=n, p=np.asarray(probs) / np.sum(probs))

    age = np.clip(rng.normal(39, 13, n), 17, 90).round()
    edu_levels = ["HS-grad", "Some-college", "Bachelors", "Masters", "Assoc", "11th", "Doctorate", "9th"]
    edu_num_map = {"HS-grad": 9, "Some-college": 10, "Bachelors": 13, "Masters": 14, "Assoc": 11,
                   "11th": 7, "Doctorate": 16, "9th": 5}
    education = pick(edu_levels, [32, 22, 17, 6, 8, 4, 1.5, 2])
    edu_num = np.array([edu_num_map[e] for e in education], dtype=float)
    marital = pick(["Married-civ-spouse", "Never-married", "Divorced", "Separated", "Widowed"],
                   [46, 33, 14, 3, 4])
    married = marital == "Married-civ-spouse"
    sex = pick(["Male", "Female"], [67, 33])
    relationship = np.where(
        married,
        np.where(sex == "Male", "Husband", "Wife"),
        pick(["Not-in-family", "Own-child", "Unmarried", "Other-relative"], [50, 30, 15, 5]),
    )
    occupations = ["Prof-specialty", "Exec-managerial", "Craft-repair", "Adm-clerical", "Sales",
                   "Other-service", "Machine-op-inspct", "Transport-moving"]
    occupation = pick(occupations, [13, 13, 13, 12, 12, 11, 7, 5])
    workclass = pick(["Private", "Self-emp", "Local-gov", "State-gov", "Federal-gov"], [74, 11, 7, 4, 3])
    race = pick(["White", "Black", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other"], [85, 9.5, 3, 1, 1])
    country = pick(["United-States", "Mexico", "Philippines", "Germany", "Canada", "India"], [91, 3, 2, 1.5, 1.5, 1])
    hours = np.clip(rng.normal(40, 12, n), 1, 99).round()
    fnlwgt = np.round(rng.lognormal(12.0, 0.5, n))
    has_gain = rng.random(n) < 0.08
    gain = np.where(has_gain, np.round(rng.lognormal(8.5, 1.0, n)), 0.0)
    has_loss = rng.random(n) < 0.05
    loss = np.where(has_loss, np.round(rng.normal(1900, 300, n)).clip(0), 0.0)

    white_collar = np.isin(occupation, ["Prof-specialty", "Exec-managerial"])
    logit = (
        -7.6
        + 0.32 * edu_num
        + 0.035 * np.minimum(age, 60)
        + 0.03 * hours
        + 1.9 * married
        + 0.35 * (sex == "Male")
        + 0.7 * white_collar
        + 0.00025 * gain
    )
    income = np.where(rng.random(n) < 1.0 / (1.0 + np.exp(-logit)), ">50K", "<=50K")
    if np.unique(income).size < 2:
        raise ValidationError("synth_census produced a single class; increase n")

    raw = {
        "age": age, "workclass": workclass.tolist(), "fnlwgt": fnlwgt,
        "education": education.tolist(), "education-num": edu_num,
        "marital-status": marital.tolist(), "occupation": occupation.tolist(),
        "relationship": relationship.tolist(), "race": race.tolist(), "sex": sex.tolist(),
        "capital-gain": gain, "capital-loss": loss, "hours-per-week": hours,
        "native-country": country.tolist(),
    }
    return encode("census_like", raw, CENSUS_FEATURES, income.tolist(),
                  meta={"source": f"synth_census(n={n}, seed={seed})", "generated": True})
