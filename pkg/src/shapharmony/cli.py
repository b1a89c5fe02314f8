"""Command-line entry point.

Precedence: built-in defaults < ``--config`` file < command-line flags.
Exit codes: 0 success, 1 configuration error, 2 finished with skipped cells,
3 fatal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .data import DataError, split
from .dynamic_perturbation import CategoricalMode, sweep
from .models import train
from .runner import (
    DATASETS,
    ConfigError,
    ExperimentConfig,
    emit_reports,
    fetch_dataset,
    resolve_dataset,
    run_matrix,
    run_sample_size,
)
from .static_attribution import ClassPolicy, attribute

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_FATAL = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON experiment config")
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=int, help="replicate every cell over seeds seed..seed+N-1")
    p.add_argument("--out", type=str)
    p.add_argument("--jobs", type=int)
    p.add_argument("--backend", choices=["retrain", "marginal"])
    p.add_argument("--grid", help='perturbation grid as "start:stop:step"')
    p.add_argument("--metric", action="append", choices=["accuracy", "precision", "recall", "f1"],
                   help="repeatable; replaces the configured metric list")
    p.add_argument("--average", choices=["weighted", "macro", "micro", "binary"])
    p.add_argument("--dataset", action="append", choices=DATASETS, help="repeatable")
    p.add_argument("--model", action="append", choices=["logit", "knn", "rf", "gbc", "nn"], help="repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shapharmony", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the dataset x model x metric matrix")
    _common(run)

    size = sub.add_parser("sweep-size", help="similarity as a function of dataset size")
    _common(size)
    size.add_argument("--sizes", help="comma-separated sizes, e.g. 1000,2000,4000")

    pert = sub.add_parser("perturb", help="export one model's perturbation sweep as CSV")
    _common(pert)
    pert.add_argument("--categorical-mode", choices=[m.value for m in CategoricalMode])

    attr = sub.add_parser("attr", help="export one model's Shapley attributions as CSV")
    _common(attr)
    attr.add_argument("--class-policy", choices=[c.value for c in ClassPolicy])

    ds = sub.add_parser("datasets", help="dataset utilities")
    ds_sub = ds.add_subparsers(dest="action", required=True)
    fetch = ds_sub.add_parser("fetch", help="download a dataset with checksum verification")
    fetch.add_argument("name", nargs="?", default="census")
    fetch.add_argument("--dest", type=Path)
    fetch.add_argument("--allow-unpinned", action="store_true",
                       help="accept files without a pinned checksum and pin them locally")
    ds_sub.add_parser("list", help="list known datasets")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict = {}
    if args.config is not None:
        try:
            raw = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
    overrides = {
        "seed": args.seed,
        "seeds": args.seeds,
        "out": args.out,
        "jobs": args.jobs,
        "backend": args.backend,
        "grid": args.grid,
        "metrics": args.metric,
        "average": args.average,
        "datasets": args.dataset,
        "models": args.model,
    }
    if getattr(args, "categorical_mode", None):
        overrides["categorical_mode"] = args.categorical_mode
    if getattr(args, "class_policy", None):
        overrides["class_policy"] = args.class_policy
    if getattr(args, "sizes", None):
        overrides["sizes"] = [int(s) for s in args.sizes.split(",") if s.strip()]
    raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig.from_dict(raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _single(config: ExperimentConfig):
    ds, _ = resolve_dataset(config.datasets[0], config)
    sp = split(ds, config.test_fraction, config.seed, stratified=config.stratified)
    return ds, sp


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "datasets":
            if args.action == "list":
                for name in DATASETS:
                    print(name)
                return EXIT_OK
            for path in fetch_dataset(args.name, args.dest, args.allow_unpinned):
                print(path)
            return EXIT_OK

        config = load_config(args)
        out = Path(config.out)
        if args.command == "run":
            table = run_matrix(config)
        elif args.command == "sweep-size":
            table = run_sample_size(config)
        elif args.command == "perturb":
            _, sp = _single(config)
            model = train(config.models[0], sp.train, seed=config.seed)
            result = sweep(model, sp, config.grid_obj(), config.metric_kinds()[0], config.seed,
                           CategoricalMode(config.categorical_mode))
            out.mkdir(parents=True, exist_ok=True)
            path = out / f"sweep_{sp.train.name}_{config.models[0]}_{result.metric.label}.csv"
            result.to_csv(path)
            print(path)
            return EXIT_OK
        else:
            _, sp = _single(config)
            matrix = attribute(config.models[0], sp, config.seed, backend=config.backend,
                               sample_budget=config.sample_budget, background_k=config.background_k,
                               class_policy=ClassPolicy(config.class_policy), max_rows=config.explain_rows)
            out.mkdir(parents=True, exist_ok=True)
            path = out / f"attr_{sp.train.name}_{config.models[0]}_{matrix.backend.value}.csv"
            matrix.to_csv(path)
            print(path)
            return EXIT_OK

        for path in emit_reports(table, out):
            print(path)
        if table.skips:
            print(f"{len(table.skips)} cell(s) skipped; see summary.txt", file=sys.stderr)
            return EXIT_PARTIAL
        return EXIT_OK
    except (ConfigError, DataError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        logging.getLogger(__name__).debug("fatal", exc_info=True)
        print(f"fatal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
